#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "idvo/objective.hpp"

namespace idvo {

std::string to_string(LossTerm term) {
  switch (term) {
    case LossTerm::inertia: return "inertia";
    case LossTerm::reconstruction: return "reconstruction";
    case LossTerm::ssim: return "ssim";
    case LossTerm::alignment: return "alignment";
    case LossTerm::mask: return "mask";
    case LossTerm::total: return "total";
  }
  return "unknown";
}

LossWeights select_term(const LossWeights& base, LossTerm term) {
  if (term == LossTerm::total) return base;
  LossWeights w = base;
  w.inertia = term == LossTerm::inertia ? 1.0 : 0.0;
  w.rec = term == LossTerm::reconstruction ? 1.0 : 0.0;
  w.ssim = term == LossTerm::ssim ? 1.0 : 0.0;
  w.align = term == LossTerm::alignment ? 1.0 : 0.0;
  w.mask = term == LossTerm::mask ? 1.0 : 0.0;
  return w;
}

namespace {

// Addresses one scalar parameter of a SnippetState.
struct ParamRef {
  std::size_t item;
  Eigen::Index index;
};

double evaluate(const ObjectiveContext& ctx, const SnippetState& state) {
  const double v = total_loss(ctx, state, false).total;
  if (!std::isfinite(v)) throw EvaluationError("grad_check: non-finite loss");
  return v;
}

double& param(SnippetState& s, const std::string& block, const ParamRef& ref, Vector6d& pose_vec) {
  if (block == "depth") return s.depth_logits[ref.item](ref.index);
  if (block == "explainability") return s.explainability[ref.item].logits()(ref.index);
  pose_vec = s.poses[ref.item].vector();
  return pose_vec(ref.index);
}

void commit(SnippetState& s, const std::string& block, const ParamRef& ref,
            const Vector6d& pose_vec) {
  if (block == "pose") s.poses[ref.item] = Pose6DoF::from_vector(pose_vec);
}

double analytic_value(const LossBreakdown& b, const std::string& block, const ParamRef& ref) {
  if (block == "depth") return b.grad_depth_logits[ref.item](ref.index);
  if (block == "explainability") return b.grad_explainability[ref.item](ref.index);
  return b.grad_poses[ref.item](ref.index);
}

std::vector<ParamRef> block_params(const SnippetState& s, const std::string& block) {
  std::vector<ParamRef> refs;
  if (block == "depth") {
    for (std::size_t i = 0; i < s.depth_logits.size(); ++i) {
      for (Eigen::Index k = 0; k < s.depth_logits[i].size(); ++k) refs.push_back({i, k});
    }
  } else if (block == "explainability") {
    for (std::size_t i = 0; i < s.explainability.size(); ++i) {
      for (Eigen::Index k = 0; k < s.explainability[i].logits().size(); ++k) refs.push_back({i, k});
    }
  } else {
    for (std::size_t i = 0; i < s.poses.size(); ++i) {
      for (Eigen::Index k = 0; k < 6; ++k) refs.push_back({i, k});
    }
  }
  return refs;
}

std::vector<std::string> blocks_for(LossTerm term) {
  switch (term) {
    case LossTerm::inertia: return {"pose"};
    case LossTerm::mask: return {"explainability"};
    case LossTerm::alignment: return {"depth", "pose"};
    default: return {"depth", "pose", "explainability"};
  }
}

}  // namespace

GradCheckReport grad_check(LossTerm term, const ObjectiveContext& ctx, const SnippetState& state,
                           std::uint64_t seed, const GradCheckOptions& options) {
  ObjectiveContext selected = ctx;
  selected.weights = select_term(ctx.weights, term);
  const LossBreakdown analytic = total_loss(selected, state, true);
  if (!std::isfinite(analytic.total)) throw EvaluationError("grad_check: non-finite loss");

  std::mt19937_64 rng(seed);
  GradCheckReport report;
  report.term = term;
  report.pass = true;
  for (const std::string& block : blocks_for(term)) {
    std::vector<ParamRef> refs = block_params(state, block);
    if (refs.size() > options.samples_per_block) {
      std::shuffle(refs.begin(), refs.end(), rng);
      refs.resize(options.samples_per_block);
    }
    double max_abs = 0.0;
    for (const ParamRef& r : refs) max_abs = std::max(max_abs, std::abs(analytic_value(analytic, block, r)));
    // Entries far below the block's scale are compared against this absolute floor.
    const double floor = 1e-6 * max_abs + 1e-10;

    BlockCheck check;
    check.block = block;
    check.sampled = refs.size();
    for (const ParamRef& r : refs) {
      SnippetState plus = state;
      SnippetState minus = state;
      Vector6d pv;
      Vector6d mv;
      param(plus, block, r, pv) += options.step;
      commit(plus, block, r, pv);
      param(minus, block, r, mv) -= options.step;
      commit(minus, block, r, mv);
      const double numeric = (evaluate(selected, plus) - evaluate(selected, minus)) / (2.0 * options.step);
      const double a = options.corrupt_factor * analytic_value(analytic, block, r);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      check.max_relative_error = std::max(check.max_relative_error, rel);
    }
    check.pass = check.max_relative_error <= options.tolerance;
    report.pass = report.pass && check.pass;
    report.blocks.push_back(check);
  }
  return report;
}

namespace {

double grid_distance(double x) { return std::abs(x - std::round(x)); }

// Active hinge terms have curvature ~ 1/|x|^2, so they are kept well above the threshold to hold
// the central-difference truncation error down.
bool near_kink(double x, double typ) {
  const double m = std::abs(x);
  return m < 0.05 * typ || (m > 0.5 * typ && m < 2.5 * typ);
}

struct InertiaScan {
  bool clear = true;
  bool any_active = false;
};

InertiaScan scan_inertia(const std::vector<Pose6DoF>& relative, const InertiaParams& p) {
  InertiaScan out;
  if (relative.empty()) return out;
  const std::vector<Pose6DoF> abs = absolute_poses(relative);
  const MotionSeries m = motion_series(abs, p.chi);
  for (double v : m.v) out.clear = out.clear && v >= 5e-2;
  for (double r : m.phi_rate) out.clear = out.clear && r >= 1e-2;
  bool any_a = false;
  bool any_j = false;
  for (double a : m.a) {
    out.clear = out.clear && !near_kink(a, p.a_typ);
    any_a = any_a || std::abs(a) > p.a_typ;
  }
  for (double j : m.j) {
    out.clear = out.clear && !near_kink(j, p.j_typ);
    any_j = any_j || std::abs(j) > p.j_typ;
  }
  out.any_active = any_a && any_j;
  return out;
}

// Flags, per frame and per pixel of scale index si, target pixels whose warp sits near a kink:
// coordinates close to a grid line, photometric residual near zero or 3D distance near zero.
std::vector<Image> kink_flags(const ObjectiveContext& ctx, const std::vector<Pose6DoF>& poses,
                              const std::vector<Image>& depth, std::size_t si, double margin) {
  const int f = ctx.weights.scales[si];
  const CameraIntrinsics kf = ctx.intrinsics.scaled(f);
  std::vector<Image> depth_f;
  for (const Image& d : depth) depth_f.push_back(downsample(d, f));
  std::vector<Image> flags(depth.size(), Image::Zero(kf.height, kf.width));
  for (const FramePair& pair : ctx.pairs) {
    const auto t = std::size_t(pair.target);
    const auto s = std::size_t(pair.source);
    const WarpResult w = sample_view(ctx.pyramids[s][si],
                                     warp_coords(depth_f[t], pair_transform(poses, pair), kf));
    for (Eigen::Index r = 0; r < kf.height; ++r) {
      for (Eigen::Index c = 0; c < kf.width; ++c) {
        const auto idx = std::size_t(r * kf.width + c);
        const double u = w.coords.u(r, c);
        const double v = w.coords.v(r, c);
        bool bad = w.coords.source_points[idx].z() <= 0.1 || grid_distance(u) < margin ||
                   grid_distance(v) < margin;
        if (!bad && w.validity(r, c) > 0.0) {
          bad = std::abs(ctx.pyramids[t][si](r, c) - w.synthesized(r, c)) < 5e-3;
          const double ds = bilinear_sample(depth_f[s], u, v).value;
          const Eigen::Vector3d y((u - kf.cx) / kf.fx * ds, (v - kf.cy) / kf.fy * ds, ds);
          bad = bad || (w.coords.source_points[idx] - y).norm() < 5e-2;
        }
        if (bad) flags[t](r, c) = 1.0;
      }
    }
  }
  return flags;
}

bool any_flag(const std::vector<Image>& flags) {
  for (const Image& f : flags) {
    if ((f > 0.0).any()) return true;
  }
  return false;
}

}  // namespace

GradCheckProblem make_gradcheck_problem(std::uint64_t seed, int width, int height, int frames,
                                        double margin) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::mt19937_64 rng(seed * 7919 + attempt);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = 0.75 * width;
    k.cx = 0.5 * width - 0.5;
    k.cy = 0.5 * height - 0.5;

    std::vector<Frame> images;
    for (int i = 0; i < frames; ++i) {
      Frame f;
      f.intensity = Image::NullaryExpr(height, width, [&] { return uniform(0.1, 0.9); });
      f.timestamp = 0.1 * i;
      images.push_back(std::move(f));
    }

    LossWeights weights;
    weights.scales = {1, 2};
    GradCheckProblem prob{make_context(images, k, weights, InertiaParams{}), {}};
    ObjectiveContext& ctx = prob.context;
    SnippetState& st = prob.state;

    // Motion parallel to the image plane keeps the epipole outside the image, so re-drawing a
    // pixel's depth moves both of its warped coordinates. Poses are drawn one at a time so long
    // sequences can still satisfy every inertia condition.
    bool poses_ok = true;
    for (int i = 0; i + 1 < frames && poses_ok; ++i) {
      poses_ok = false;
      for (int tries = 0; tries < 1000 && !poses_ok; ++tries) {
        const double sx = unit(rng) < 0.5 ? -1.0 : 1.0;
        const double sy = unit(rng) < 0.5 ? -1.0 : 1.0;
        st.poses.resize(std::size_t(i));
        st.poses.emplace_back(
            Eigen::Vector3d(sx * uniform(0.2, 0.4), sy * uniform(0.15, 0.3), uniform(-0.05, 0.05)),
            Eigen::Vector3d(uniform(-0.05, 0.05), uniform(-0.05, 0.05), uniform(-0.05, 0.05)));
        poses_ok = scan_inertia(st.poses, ctx.inertia).clear;
      }
    }
    if (!poses_ok || (frames >= 4 && !scan_inertia(st.poses, ctx.inertia).any_active)) continue;

    constexpr double kNear = 3.0;
    constexpr double kFar = 10.0;
    std::vector<Image> depth;
    for (int i = 0; i < frames; ++i) {
      depth.push_back(Image::NullaryExpr(height, width, [&] { return uniform(kNear, kFar); }));
    }
    for (std::size_t p = 0; p < ctx.pairs.size(); ++p) {
      st.explainability.emplace_back(Image::NullaryExpr(height, width, [&] { return uniform(-2.0, 4.0); }));
    }
    // One blocked column on the first pair exercises the hard-mask path.
    ctx.hard_masks[0].grid.col(0).setZero();
    ctx.hard_masks[0].widths.left = 1;

    // Coarse pass: whole 2x2 blocks are re-drawn until the half-resolution warp is clean.
    bool coarse_clean = false;
    for (int round = 0; round < 500 && !coarse_clean; ++round) {
      const std::vector<Image> flags = kink_flags(ctx, st.poses, depth, 1, margin);
      coarse_clean = !any_flag(flags);
      for (int i = 0; i < frames; ++i) {
        for (Eigen::Index r = 0; r < flags[std::size_t(i)].rows(); ++r) {
          for (Eigen::Index c = 0; c < flags[std::size_t(i)].cols(); ++c) {
            if (flags[std::size_t(i)](r, c) == 0.0) continue;
            depth[std::size_t(i)].block(2 * r, 2 * c, 2, 2) =
                Image::NullaryExpr(2, 2, [&] { return uniform(kNear, kFar); });
          }
        }
      }
    }
    if (!coarse_clean) continue;

    // Fine pass: a flagged pixel is re-drawn together with a partner from its block so that the
    // block sum, and with it the half-resolution depth, stays fixed.
    std::uniform_int_distribution<int> other(1, 3);
    for (int round = 0; round < 500; ++round) {
      const std::vector<Image> flags = kink_flags(ctx, st.poses, depth, 0, margin);
      if (!any_flag(flags)) {
        if (any_flag(kink_flags(ctx, st.poses, depth, 1, margin))) break;
        for (const Image& d : depth) {
          st.depth_logits.push_back(d.unaryExpr([&](double x) { return ctx.depth_range.encode(x); }));
        }
        return prob;
      }
      for (int i = 0; i < frames; ++i) {
        Image& d = depth[std::size_t(i)];
        for (Eigen::Index r = 0; r < height; ++r) {
          for (Eigen::Index c = 0; c < width; ++c) {
            if (flags[std::size_t(i)](r, c) == 0.0) continue;
            const int self = int((r % 2) * 2 + (c % 2));
            const int mate = (self + other(rng)) % 4;
            double& a = d(r, c);
            double& b = d(r - r % 2 + mate / 2, c - c % 2 + mate % 2);
            const double sum = a + b;
            a = uniform(std::max(kNear, sum - kFar), std::min(kFar, sum - kNear));
            b = sum - a;
          }
        }
      }
    }
  }
}

std::vector<GradCheckReport> grad_check_suite(std::uint64_t seed, const GradCheckOptions& options,
                                              std::size_t min_samples) {
  const std::vector<LossTerm> terms{LossTerm::inertia, LossTerm::reconstruction, LossTerm::ssim,
                                    LossTerm::alignment, LossTerm::mask, LossTerm::total};
  std::vector<GradCheckReport> merged;
  for (LossTerm t : terms) merged.push_back({t, {}, true});

  auto short_of_samples = [&] {
    for (const GradCheckReport& r : merged) {
      if (r.blocks.empty()) return true;
      for (const BlockCheck& b : r.blocks) {
        if (b.sampled < min_samples) return true;
      }
    }
    return false;
  };

  for (std::uint64_t k = 0; short_of_samples(); ++k) {
    const GradCheckProblem prob = make_gradcheck_problem(seed + k);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const GradCheckReport r = grad_check(terms[i], prob.context, prob.state, seed + k, options);
      GradCheckReport& m = merged[i];
      for (const BlockCheck& b : r.blocks) {
        auto it = std::find_if(m.blocks.begin(), m.blocks.end(),
                               [&](const BlockCheck& x) { return x.block == b.block; });
        if (it == m.blocks.end()) {
          m.blocks.push_back(b);
          continue;
        }
        if (it->sampled >= min_samples) continue;
        it->sampled += b.sampled;
        it->max_relative_error = std::max(it->max_relative_error, b.max_relative_error);
        it->pass = it->pass && b.pass;
      }
    }
  }
  for (GradCheckReport& m : merged) {
    m.pass = std::all_of(m.blocks.begin(), m.blocks.end(), [](const BlockCheck& b) { return b.pass; });
  }
  return merged;
}

}  // namespace idvo
