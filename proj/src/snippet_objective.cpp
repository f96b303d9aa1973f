#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "idvo/objective.hpp"

namespace idvo {

void LossWeights::validate() const {
  if (!(inertia >= 0.0 && rec >= 0.0 && ssim >= 0.0 && align >= 0.0 && mask >= 0.0)) {
    throw DomainError("loss weights must be non-negative");
  }
  if (scales.empty()) throw DomainError("loss weights: at least one scale is required");
  std::set<int> seen;
  for (int s : scales) {
    if (!is_valid_scale_factor(s)) {
      throw DomainError("loss weights: scale factor " + std::to_string(s) +
                        " is not one of 1, 2, 4, 8");
    }
    if (!seen.insert(s).second) {
      throw DomainError("loss weights: duplicate scale factor " + std::to_string(s));
    }
  }
}

std::vector<FramePair> frame_pairs(int frame_count, SourceDirection direction) {
  std::vector<FramePair> pairs;
  for (int t = 0; t < frame_count; ++t) {
    if (direction != SourceDirection::next && t > 0) pairs.push_back({t, t - 1});
    if (direction != SourceDirection::previous && t + 1 < frame_count) pairs.push_back({t, t + 1});
  }
  return pairs;
}

Image DepthRange::decode(const Image& logits) const {
  return min + (max - min) * logits.unaryExpr([](double x) { return logistic(x); });
}

Image DepthRange::derivative(const Image& logits) const {
  return logits.unaryExpr([this](double x) {
    const double s = logistic(x);
    return (max - min) * s * (1.0 - s);
  });
}

double DepthRange::encode(double depth) const {
  const double s = (depth - min) / (max - min);
  if (!(s > 0.0 && s < 1.0)) {
    throw DomainError("depth " + std::to_string(depth) + " outside the open decoding range");
  }
  return std::log(s / (1.0 - s));
}

namespace {

struct Chain {
  std::vector<Eigen::Matrix3d> rotation;
  std::vector<Eigen::Vector3d> translation;
};

Chain chain_matrices(std::span<const Pose6DoF> relative) {
  Chain c;
  c.rotation.push_back(Eigen::Matrix3d::Identity());
  c.translation.push_back(Eigen::Vector3d::Zero());
  for (const Pose6DoF& rel : relative) {
    const Eigen::Matrix3d& r = c.rotation.back();
    c.translation.push_back(r * rel.translation() + c.translation.back());
    c.rotation.push_back(r * rel.rotation());
  }
  return c;
}

void check_state(const ObjectiveContext& ctx, const SnippetState& state) {
  const int n = state.frame_count();
  std::ostringstream msg;
  if (n < 2) {
    msg << "snippet state needs at least 2 frames, got " << n;
  } else if (int(ctx.pyramids.size()) != n) {
    msg << "context has " << ctx.pyramids.size() << " frames but state has " << n;
  } else if (int(state.poses.size()) != n - 1) {
    msg << "state has " << state.poses.size() << " relative poses for " << n << " frames";
  } else if (state.explainability.size() != ctx.pairs.size() ||
             ctx.hard_masks.size() != ctx.pairs.size()) {
    msg << "mask count does not match the " << ctx.pairs.size() << " frame pairs";
  } else {
    return;
  }
  throw DimensionError(msg.str());
}

}  // namespace

std::vector<Pose6DoF> absolute_poses(std::span<const Pose6DoF> relative) {
  const Chain c = chain_matrices(relative);
  std::vector<Pose6DoF> out;
  out.reserve(c.rotation.size());
  for (std::size_t i = 0; i < c.rotation.size(); ++i) {
    out.push_back(Pose6DoF::from_rotation(c.rotation[i], c.translation[i]));
  }
  return out;
}

Eigen::Isometry3d pair_transform(const std::vector<Pose6DoF>& relative, const FramePair& pair) {
  if (pair.source == pair.target - 1) return to_isometry(relative.at(std::size_t(pair.source)));
  if (pair.source == pair.target + 1) {
    return to_isometry(relative.at(std::size_t(pair.target))).inverse(Eigen::Isometry);
  }
  throw DomainError("pair_transform: only adjacent frame pairs are supported");
}

ObjectiveContext make_context(const std::vector<Frame>& frames, const CameraIntrinsics& k,
                              const LossWeights& weights, const InertiaParams& inertia,
                              SourceDirection direction) {
  weights.validate();
  inertia.validate();
  k.validate();
  ObjectiveContext ctx;
  ctx.intrinsics = k;
  ctx.weights = weights;
  ctx.inertia = inertia;
  ctx.pairs = frame_pairs(int(frames.size()), direction);
  for (const Frame& f : frames) {
    if (f.width() != k.width || f.height() != k.height) {
      throw DimensionError("make_context: frame size differs from intrinsics");
    }
    std::vector<Image> pyramid;
    for (int s : weights.scales) pyramid.push_back(downsample(f.intensity, s));
    ctx.pyramids.push_back(std::move(pyramid));
  }
  for (std::size_t p = 0; p < ctx.pairs.size(); ++p) {
    ctx.hard_masks.push_back(build_dhem(0.0, 0.0, k, DhemParams{}));
  }
  return ctx;
}

void refresh_hard_masks(ObjectiveContext& ctx, const SnippetState& state,
                        const DhemParams& params) {
  ctx.hard_masks.clear();
  for (const FramePair& pair : ctx.pairs) {
    const Eigen::Isometry3d source_from_target = pair_transform(state.poses, pair);
    const Eigen::Isometry3d target_from_source = source_from_target.inverse(Eigen::Isometry);
    const Pose6DoF source_in_target =
        Pose6DoF::from_rotation(target_from_source.linear(), target_from_source.translation());
    ctx.hard_masks.push_back(build_dhem(source_from_target.translation().norm(),
                                        steering_rate(source_in_target), ctx.intrinsics, params));
  }
}

double LossBreakdown::rec_sum() const {
  double s = 0.0;
  for (double r : rec) s += r;
  return s;
}

double LossBreakdown::weighted_sum(const LossWeights& w) const {
  double total = w.inertia * inertia;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    total += w.rec * rec[i] + w.ssim * ssim[i] + w.align * align[i] + w.mask * mask[i];
  }
  return total;
}

LossBreakdown total_loss(const ObjectiveContext& ctx, const SnippetState& state,
                         bool with_gradient) {
  check_state(ctx, state);
  const LossWeights& w = ctx.weights;
  const int n = state.frame_count();
  const std::size_t n_pairs = ctx.pairs.size();
  const CameraIntrinsics& k = ctx.intrinsics;

  LossBreakdown out;
  out.scales = w.scales;
  out.rec.assign(w.scales.size(), 0.0);
  out.ssim.assign(w.scales.size(), 0.0);
  out.align.assign(w.scales.size(), 0.0);
  out.mask.assign(w.scales.size(), 0.0);

  std::vector<Image> depth_full;
  for (const Image& logits : state.depth_logits) depth_full.push_back(ctx.depth_range.decode(logits));
  std::vector<Image> soft_values;
  for (const auto& field : state.explainability) soft_values.push_back(field.values());
  std::vector<Eigen::Isometry3d> transforms;
  for (const FramePair& pair : ctx.pairs) transforms.push_back(pair_transform(state.poses, pair));

  std::vector<Image> g_depth(std::size_t(n), Image::Zero(k.height, k.width));
  std::vector<Image> g_soft(n_pairs, Image::Zero(k.height, k.width));
  std::vector<Eigen::Matrix3d> g_rot(n_pairs, Eigen::Matrix3d::Zero());
  std::vector<Eigen::Vector3d> g_trans(n_pairs, Eigen::Vector3d::Zero());
  if (with_gradient) {
    out.grad_explainability.assign(n_pairs, Image::Zero(k.height, k.width));
    out.grad_poses.assign(state.poses.size(), Vector6d::Zero());
  }

  const bool need_warp = w.rec > 0.0 || w.ssim > 0.0 || w.align > 0.0;
  for (std::size_t si = 0; si < w.scales.size(); ++si) {
    const int f = w.scales[si];
    const CameraIntrinsics kf = k.scaled(f);
    std::vector<Image> depth_f;
    for (const Image& d : depth_full) depth_f.push_back(downsample(d, f));
    std::vector<Image> g_depth_f(std::size_t(n), Image::Zero(kf.height, kf.width));

    for (std::size_t p = 0; p < n_pairs; ++p) {
      const auto t = std::size_t(ctx.pairs[p].target);
      const auto s = std::size_t(ctx.pairs[p].source);
      if (need_warp) {
        const WarpResult warped =
            sample_view(ctx.pyramids[s][si], warp_coords(depth_f[t], transforms[p], kf));
        const Image hard_f = min_pool(ctx.hard_masks[p].grid, f);
        const Image mask_f = hard_f * downsample(soft_values[p], f);
        const Image& target = ctx.pyramids[t][si];
        PairGradient pg;
        PairGradient* gp = nullptr;
        if (with_gradient) {
          pg = PairGradient(kf.height, kf.width);
          gp = &pg;
        }
        if (w.rec > 0.0) out.rec[si] += reconstruction_loss(target, warped, mask_f, gp, w.rec);
        if (w.ssim > 0.0) out.ssim[si] += ssim_loss(target, warped, mask_f, hard_f, gp, w.ssim);
        if (w.align > 0.0) {
          out.align[si] += alignment_3d_loss(depth_f[s], warped.coords, hard_f, gp, w.align);
        }
        if (with_gradient) {
          g_depth_f[t] += pg.warp.depth;
          g_depth_f[s] += pg.source_depth;
          g_rot[p] += pg.warp.rotation;
          g_trans[p] += pg.warp.translation;
          g_soft[p] += downsample_adjoint(Image(pg.mask * hard_f), f);
        }
      }
      if (w.mask > 0.0) {
        const MaskLoss ml = mask_loss(state.explainability[p], f, ctx.hard_masks[p].grid);
        out.mask[si] += ml.value;
        if (with_gradient) out.grad_explainability[p] += w.mask * ml.grad_logits;
      }
    }
    if (with_gradient) {
      for (std::size_t i = 0; i < std::size_t(n); ++i) g_depth[i] += downsample_adjoint(g_depth_f[i], f);
    }
  }

  if (w.inertia > 0.0) {
    if (n >= 4) {
      const Chain chain = chain_matrices(state.poses);
      std::vector<Pose6DoF> abs;
      for (std::size_t i = 0; i < chain.rotation.size(); ++i) {
        abs.push_back(Pose6DoF::from_rotation(chain.rotation[i], chain.translation[i]));
      }
      const InertiaLoss il = inertia_loss(abs, ctx.inertia);
      out.inertia = il.value;
      if (with_gradient) {
        std::vector<Eigen::Matrix3d> g_r(abs.size());
        std::vector<Eigen::Vector3d> g_t(abs.size());
        for (std::size_t i = 0; i < abs.size(); ++i) {
          const Vector6d g = w.inertia * il.grad[i];
          g_t[i] = g.head<3>();
          g_r[i] = rotation_to_euler_backward<double>(chain.rotation[i], g.tail<3>());
        }
        // abs[i+1] = abs[i] * rel[i], walked backwards.
        for (std::size_t i = abs.size() - 1; i >= 1; --i) {
          const Pose6DoF& rel = state.poses[i - 1];
          const Eigen::Matrix3d& r_prev = chain.rotation[i - 1];
          const Eigen::Matrix3d g_rel_r = r_prev.transpose() * g_r[i];
          const Eigen::Vector3d g_rel_t = r_prev.transpose() * g_t[i];
          g_r[i - 1] += g_r[i] * rel.rotation().transpose() + g_t[i] * rel.translation().transpose();
          g_t[i - 1] += g_t[i];
          out.grad_poses[i - 1] += pose_parameter_gradient(rel, g_rel_r, g_rel_t);
        }
      }
    } else {
      out.inertia_skipped = true;
    }
  }

  if (with_gradient) {
    for (std::size_t i = 0; i < std::size_t(n); ++i) {
      out.grad_depth_logits.push_back(g_depth[i] * ctx.depth_range.derivative(state.depth_logits[i]));
    }
    for (std::size_t p = 0; p < n_pairs; ++p) {
      const Image values = soft_values[p];
      out.grad_explainability[p] += g_soft[p] * values * (1.0 - values);
      const FramePair& pair = ctx.pairs[p];
      if (pair.source == pair.target - 1) {
        const Pose6DoF& rel = state.poses[std::size_t(pair.source)];
        out.grad_poses[std::size_t(pair.source)] += pose_parameter_gradient(rel, g_rot[p], g_trans[p]);
      } else {
        // transform = inverse(rel): R' = R^T, t' = -R^T t
        const Pose6DoF& rel = state.poses[std::size_t(pair.target)];
        const Eigen::Matrix3d r = rel.rotation();
        const Eigen::Matrix3d g_r = g_rot[p].transpose() - rel.translation() * g_trans[p].transpose();
        const Eigen::Vector3d g_t = -(r * g_trans[p]);
        out.grad_poses[std::size_t(pair.target)] += pose_parameter_gradient(rel, g_r, g_t);
      }
    }
  }

  out.total = out.weighted_sum(w);
  return out;
}

}  // namespace idvo
