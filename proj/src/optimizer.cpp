#include "idvo/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace idvo {

void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, AdamState& state,
               const AdamParams& adam, const Eigen::VectorXd& lr_scale) {
  const Eigen::Index n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n ||
      (lr_scale.size() != 0 && lr_scale.size() != n)) {
    throw DimensionError("adam_step: parameter, gradient and moment sizes differ");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(grads(i))) {
      std::ostringstream msg;
      msg << "adam_step: non-finite gradient at element " << i << " (step " << state.step + 1 << ")";
      throw EvaluationError(msg.str());
    }
  }
  ++state.step;
  state.m = adam.beta1 * state.m + (1.0 - adam.beta1) * grads;
  state.v = adam.beta2 * state.v + (1.0 - adam.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(adam.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(adam.beta2, double(state.step));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lr = lr_scale.size() == 0 ? adam.lr : adam.lr * lr_scale(i);
    const double m_hat = state.m(i) / c1;
    const double v_hat = state.v(i) / c2;
    params(i) -= lr * m_hat / (std::sqrt(v_hat) + adam.epsilon);
  }
}

StaticFilterReport static_filter(const std::vector<Frame>& frames, double threshold) {
  StaticFilterReport report;
  if (frames.empty()) return report;
  auto small = [](const Frame& f) {
    return resize_area(f.intensity, std::max<Eigen::Index>(1, f.intensity.cols() / 8),
                       std::max<Eigen::Index>(1, f.intensity.rows() / 8));
  };
  Image last = small(frames.front());
  report.kept.push_back(0);
  report.score.push_back(0.0);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const Image cur = small(frames[i]);
    if (cur.rows() != last.rows() || cur.cols() != last.cols()) {
      throw DimensionError("static_filter: frames differ in size");
    }
    const double score = (cur - last).abs().mean();
    report.score.push_back(score);
    if (score < threshold) {
      report.dropped.push_back(int(i));
    } else {
      report.kept.push_back(int(i));
      last = cur;
    }
  }
  return report;
}

void OptimizerConfig::validate() const {
  std::ostringstream msg;
  if (!(adam.lr > 0.0)) msg << "lr must be positive; ";
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) msg << "beta1 must lie in [0, 1); ";
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) msg << "beta2 must lie in [0, 1); ";
  if (!(adam.epsilon > 0.0)) msg << "epsilon must be positive; ";
  if (!(lr_depth >= 0.0 && lr_pose >= 0.0 && lr_mask >= 0.0)) msg << "lr multipliers must be >= 0; ";
  if (iters < 0) msg << "iters must be >= 0; ";
  if (snippet_len < 2) msg << "snippet_len must be >= 2; ";
  if (dhem_refresh < 1) msg << "dhem_refresh must be >= 1; ";
  if (!(init_step > 0.0)) msg << "init_step must be positive; ";
  if (!(init_depth > 0.1 && init_depth < 100.0)) msg << "init_depth must lie in (0.1, 100); ";
  const std::string errors = msg.str();
  if (!errors.empty()) throw DomainError("optimizer config: " + errors.substr(0, errors.size() - 2));
  weights.validate();
  inertia.validate();
}

SnippetState init_state(int frame_count, int width, int height, const OptimizerConfig& config) {
  if (frame_count < 2) throw LengthError("init_state: a snippet needs at least 2 frames");
  const DepthRange range;
  SnippetState s;
  const double logit = range.encode(config.init_depth);
  for (int i = 0; i < frame_count; ++i) s.depth_logits.push_back(Image::Constant(height, width, logit));
  for (int i = 0; i + 1 < frame_count; ++i) {
    s.poses.emplace_back(Eigen::Vector3d(0.0, 0.0, config.init_step), Eigen::Vector3d::Zero());
  }
  const std::size_t pairs = frame_pairs(frame_count, config.direction).size();
  for (std::size_t p = 0; p < pairs; ++p) s.explainability.emplace_back(height, width, config.init_mask_logit);
  return s;
}

Eigen::VectorXd pack_parameters(const SnippetState& state) {
  Eigen::Index n = 0;
  for (const Image& d : state.depth_logits) n += d.size();
  n += 6 * Eigen::Index(state.poses.size());
  for (const auto& e : state.explainability) n += e.logits().size();
  Eigen::VectorXd flat(n);
  Eigen::Index o = 0;
  for (const Image& d : state.depth_logits) {
    flat.segment(o, d.size()) = d.reshaped<Eigen::RowMajor>().matrix();
    o += d.size();
  }
  for (const Pose6DoF& p : state.poses) {
    flat.segment<6>(o) = p.vector();
    o += 6;
  }
  for (const auto& e : state.explainability) {
    flat.segment(o, e.logits().size()) = e.logits().reshaped<Eigen::RowMajor>().matrix();
    o += e.logits().size();
  }
  return flat;
}

void unpack_parameters(const Eigen::VectorXd& flat, SnippetState& state) {
  Eigen::Index o = 0;
  for (Image& d : state.depth_logits) {
    d.reshaped<Eigen::RowMajor>() = flat.segment(o, d.size()).array();
    o += d.size();
  }
  for (Pose6DoF& p : state.poses) {
    p = Pose6DoF::from_vector(flat.segment<6>(o));
    o += 6;
  }
  for (auto& e : state.explainability) {
    e.logits().reshaped<Eigen::RowMajor>() = flat.segment(o, e.logits().size()).array();
    o += e.logits().size();
  }
  if (o != flat.size()) throw DimensionError("unpack_parameters: size mismatch");
}

Eigen::VectorXd pack_gradient(const LossBreakdown& b) {
  Eigen::Index n = 0;
  for (const Image& d : b.grad_depth_logits) n += d.size();
  n += 6 * Eigen::Index(b.grad_poses.size());
  for (const Image& e : b.grad_explainability) n += e.size();
  Eigen::VectorXd flat(n);
  Eigen::Index o = 0;
  for (const Image& d : b.grad_depth_logits) {
    flat.segment(o, d.size()) = d.reshaped<Eigen::RowMajor>().matrix();
    o += d.size();
  }
  for (const Vector6d& g : b.grad_poses) {
    flat.segment<6>(o) = g;
    o += 6;
  }
  for (const Image& e : b.grad_explainability) {
    flat.segment(o, e.size()) = e.reshaped<Eigen::RowMajor>().matrix();
    o += e.size();
  }
  return flat;
}

namespace {

TraceRow trace_row(int iteration, const LossBreakdown& b) {
  TraceRow r;
  r.iteration = iteration;
  r.inertia = b.inertia;
  for (std::size_t i = 0; i < b.scales.size(); ++i) {
    r.rec += b.rec[i];
    r.ssim += b.ssim[i];
    r.align += b.align[i];
    r.mask += b.mask[i];
  }
  r.total = b.total;
  return r;
}

// Keeps the first translation at norm delta0, removing the global scale freedom.
void apply_gauge(SnippetState& s, double delta0) {
  const Eigen::Vector3d t = s.poses.front().translation();
  const double norm = t.norm();
  if (norm > 0.0) s.poses.front().set_translation(t * (delta0 / norm));
}

}  // namespace

SnippetResult optimize_snippet(const std::vector<Frame>& frames, const CameraIntrinsics& k,
                               const OptimizerConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ObjectiveContext ctx = make_context(frames, k, config.weights, config.inertia, config.direction);
  SnippetResult out;
  out.state = init_state(int(frames.size()), k.width, k.height, config);
  SnippetState& state = out.state;

  const Eigen::Index n_depth = Eigen::Index(frames.size()) * k.width * k.height;
  const Eigen::Index n_pose = 6 * Eigen::Index(state.poses.size());
  Eigen::VectorXd params = pack_parameters(state);
  Eigen::VectorXd lr_scale(params.size());
  lr_scale.head(n_depth).setConstant(config.lr_depth);
  lr_scale.segment(n_depth, n_pose).setConstant(config.lr_pose);
  lr_scale.tail(params.size() - n_depth - n_pose).setConstant(config.lr_mask);
  AdamState adam(params.size());

  auto finish = [&] {
    out.hard_masks = ctx.hard_masks;
    out.trace.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  };
  auto abort = [&](const std::string& why) {
    out.trace.aborted = true;
    out.trace.message = why;
    return finish();
  };

  for (int it = 0; it < config.iters; ++it) {
    if (it % config.dhem_refresh == 0) refresh_hard_masks(ctx, state, config.dhem);
    const LossBreakdown b = total_loss(ctx, state, true);
    if (!std::isfinite(b.total)) {
      return abort("non-finite loss at iteration " + std::to_string(it));
    }
    out.trace.rows.push_back(trace_row(it, b));
    const Eigen::VectorXd grad = pack_gradient(b);
    Eigen::VectorXd next = params;
    try {
      adam_step(next, grad, adam, config.adam, lr_scale);
    } catch (const EvaluationError& e) {
      out.trace.rows.pop_back();
      return abort(std::string(e.what()) + " at iteration " + std::to_string(it));
    }
    unpack_parameters(next, state);
    if (config.fix_gauge) apply_gauge(state, config.init_step);
    params = pack_parameters(state);
    state.iteration = it + 1;
  }

  const LossBreakdown final_b = total_loss(ctx, state, false);
  if (!std::isfinite(final_b.total)) return abort("non-finite final loss");
  out.trace.final_breakdown = final_b;
  out.trace.final_total = final_b.total;
  out.trace.initial_total = out.trace.rows.empty() ? final_b.total : out.trace.rows.front().total;
  out.trace.converged = out.trace.final_total <= out.trace.initial_total;
  if (!out.trace.converged) out.trace.message = "final loss above initial loss";
  return finish();
}

std::vector<Pose6DoF> chain_snippets(const std::vector<std::vector<Pose6DoF>>& relative, int overlap) {
  if (relative.empty()) return {Pose6DoF::identity()};
  const int m = int(relative.front().size());
  if (overlap < 0 || overlap >= m) {
    throw LengthError("chain_snippets: overlap must lie in [0, " + std::to_string(m) + ")");
  }
  for (std::size_t k = 0; k < relative.size(); ++k) {
    if (int(relative[k].size()) != m) {
      throw LengthError("chain_snippets: snippet " + std::to_string(k) + " has " +
                        std::to_string(relative[k].size()) + " poses, expected " + std::to_string(m));
    }
  }
  const int stride = m - overlap;
  const std::size_t total = std::size_t(stride) * (relative.size() - 1) + std::size_t(m);

  std::vector<Eigen::Vector3d> t_sum(total, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> e_ref(total, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> e_delta(total, Eigen::Vector3d::Zero());
  std::vector<int> count(total, 0);

  for (std::size_t k = 0; k < relative.size(); ++k) {
    const std::size_t base = k * std::size_t(stride);
    double scale = 1.0;
    if (k > 0 && overlap > 0) {
      double prev = 0.0;
      double cur = 0.0;
      for (int j = 0; j < overlap; ++j) {
        const std::size_t g = base + std::size_t(j);
        prev += (t_sum[g] / count[g]).norm();
        cur += relative[k][std::size_t(j)].translation().norm();
      }
      if (cur > 0.0 && prev > 0.0) scale = prev / cur;
    }
    for (int j = 0; j < m; ++j) {
      const std::size_t g = base + std::size_t(j);
      const Pose6DoF& p = relative[k][std::size_t(j)];
      t_sum[g] += scale * p.translation();
      if (count[g] == 0) {
        e_ref[g] = p.orientation();
      } else {
        e_delta[g] += wrap_angles(Eigen::Vector3d(p.orientation() - e_ref[g]));
      }
      ++count[g];
    }
  }

  std::vector<Pose6DoF> out{Pose6DoF::identity()};
  Eigen::Matrix4d acc = Eigen::Matrix4d::Identity();
  for (std::size_t g = 0; g < total; ++g) {
    const Pose6DoF avg(t_sum[g] / count[g], e_ref[g] + e_delta[g] / count[g]);
    acc = acc * avg.matrix();
    out.push_back(Pose6DoF::from_matrix(acc));
  }
  return out;
}

std::vector<Pose6DoF> chain_snippets(const std::vector<SnippetState>& states, int overlap) {
  std::vector<std::vector<Pose6DoF>> rel;
  for (const SnippetState& s : states) rel.push_back(s.poses);
  return chain_snippets(rel, overlap);
}

}  // namespace idvo
