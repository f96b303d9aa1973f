#include <cmath>

#include "idvo/objective.hpp"

namespace idvo {

namespace {

void check_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.cols()) +
                         "x" + std::to_string(a.rows()) + " vs " + std::to_string(b.cols()) +
                         "x" + std::to_string(b.rows()) + ")");
  }
}

// Pushes dL/d(synthesized) through the sampler and the warp.
void backprop_synthesized(const WarpResult& warped, const Image& g_synth, WarpGradient& grad) {
  for (Eigen::Index r = 0; r < g_synth.rows(); ++r) {
    for (Eigen::Index c = 0; c < g_synth.cols(); ++c) {
      const double g = g_synth(r, c);
      if (g == 0.0 || warped.validity(r, c) == 0.0) continue;
      accumulate_coord_gradient(warped.coords, r, c, g * warped.grad_u(r, c),
                                g * warped.grad_v(r, c), grad);
    }
  }
}

struct WindowStats {
  double mu_x, mu_y, var_x, var_y, cov;
};

WindowStats window_stats(const Image& x, const Image& y, Eigen::Index r, Eigen::Index c) {
  const auto wx = x.block(r - 1, c - 1, 3, 3);
  const auto wy = y.block(r - 1, c - 1, 3, 3);
  WindowStats s;
  s.mu_x = wx.mean();
  s.mu_y = wy.mean();
  s.var_x = (wx * wx).mean() - s.mu_x * s.mu_x;
  s.var_y = (wy * wy).mean() - s.mu_y * s.mu_y;
  s.cov = (wx * wy).mean() - s.mu_x * s.mu_y;
  return s;
}

double ssim_value(const WindowStats& s) {
  const double a1 = 2.0 * s.mu_x * s.mu_y + kSsimC1;
  const double a2 = 2.0 * s.cov + kSsimC2;
  const double b1 = s.mu_x * s.mu_x + s.mu_y * s.mu_y + kSsimC1;
  const double b2 = s.var_x + s.var_y + kSsimC2;
  return (a1 * a2) / (b1 * b2);
}

}  // namespace

double reconstruction_loss(const Image& target, const WarpResult& warped, const Image& mask,
                           PairGradient* grad, double grad_scale) {
  check_same_shape(target, warped.synthesized, "reconstruction_loss");
  check_same_shape(target, mask, "reconstruction_loss mask");
  const double n = double(target.size());
  const Image diff = target - warped.synthesized;
  const double value = (diff.abs() * mask * warped.validity).sum() / n;
  if (grad != nullptr) {
    const double s = grad_scale / n;
    // d|t - y|/dy = -sign(t - y), 0 at the kink.
    const Image g_synth = -s * diff.sign() * mask * warped.validity;
    backprop_synthesized(warped, g_synth, grad->warp);
    grad->mask += s * diff.abs() * warped.validity;
  }
  return value;
}

Image ssim_map(const Image& x, const Image& y) {
  check_same_shape(x, y, "ssim_map");
  Image out = Image::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 1; r + 1 < x.rows(); ++r) {
    for (Eigen::Index c = 1; c + 1 < x.cols(); ++c) out(r, c) = ssim_value(window_stats(x, y, r, c));
  }
  return out;
}

double ssim_loss(const Image& target, const WarpResult& warped, const Image& mask,
                 const Image& hard, PairGradient* grad, double grad_scale) {
  const Image& y = warped.synthesized;
  check_same_shape(target, y, "ssim_loss");
  check_same_shape(target, mask, "ssim_loss mask");
  check_same_shape(target, hard, "ssim_loss hard mask");
  const Eigen::Index rows = target.rows();
  const Eigen::Index cols = target.cols();

  const Image usable = ((warped.validity > 0.0) && (hard > 0.0)).cast<double>();
  Image counted = Image::Zero(rows, cols);
  for (Eigen::Index r = 1; r + 1 < rows; ++r) {
    for (Eigen::Index c = 1; c + 1 < cols; ++c) {
      if (usable.block(r - 1, c - 1, 3, 3).minCoeff() > 0.0) counted(r, c) = 1.0;
    }
  }
  const double n = counted.sum();
  if (n == 0.0) return 0.0;

  double value = 0.0;
  Image g_synth;
  if (grad != nullptr) g_synth = Image::Zero(rows, cols);
  for (Eigen::Index r = 1; r + 1 < rows; ++r) {
    for (Eigen::Index c = 1; c + 1 < cols; ++c) {
      if (counted(r, c) == 0.0) continue;
      const WindowStats s = window_stats(target, y, r, c);
      const double ssim = ssim_value(s);
      const double m = mask(r, c);
      value += m * (1.0 - ssim) / 2.0;
      if (grad == nullptr) continue;
      grad->mask(r, c) += grad_scale * (1.0 - ssim) / (2.0 * n);
      if (m == 0.0) continue;
      const double a1 = 2.0 * s.mu_x * s.mu_y + kSsimC1;
      const double a2 = 2.0 * s.cov + kSsimC2;
      const double b1 = s.mu_x * s.mu_x + s.mu_y * s.mu_y + kSsimC1;
      const double b2 = s.var_x + s.var_y + kSsimC2;
      const double outer = -grad_scale * m / (2.0 * n);
      for (Eigen::Index dr = -1; dr <= 1; ++dr) {
        for (Eigen::Index dc = -1; dc <= 1; ++dc) {
          const double xq = target(r + dr, c + dc);
          const double yq = y(r + dr, c + dc);
          const double da1 = 2.0 * s.mu_x / 9.0;
          const double da2 = 2.0 * (xq - s.mu_x) / 9.0;
          const double db1 = 2.0 * s.mu_y / 9.0;
          const double db2 = 2.0 * (yq - s.mu_y) / 9.0;
          const double d_ssim = (da1 * a2 + a1 * da2) / (b1 * b2) - ssim * (db1 / b1 + db2 / b2);
          g_synth(r + dr, c + dc) += outer * d_ssim;
        }
      }
    }
  }
  if (grad != nullptr) backprop_synthesized(warped, g_synth, grad->warp);
  return value / n;
}

double alignment_3d_loss(const Image& source_depth, const WarpCoords& coords, const Image& weight,
                         PairGradient* grad, double grad_scale) {
  check_same_shape(source_depth, coords.u, "alignment_3d_loss");
  check_same_shape(weight, coords.u, "alignment_3d_loss weight");
  const CameraIntrinsics& k = coords.intrinsics;
  const Image w = weight * coords.validity;
  const double n = (w > 0.0).count();
  if (n == 0.0) return 0.0;

  double value = 0.0;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      if (w(r, c) == 0.0) continue;
      const double u = coords.u(r, c);
      const double v = coords.v(r, c);
      const BilinearSample ds = bilinear_sample(source_depth, u, v);
      if (!ds.valid) continue;
      const Eigen::Vector3d ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d y = ray * ds.value;
      const Eigen::Vector3d& x = coords.source_points[std::size_t(r * w.cols() + c)];
      const Eigen::Vector3d diff = x - y;
      const double dist = diff.norm();
      value += w(r, c) * dist;
      if (grad == nullptr || dist == 0.0) continue;

      const Eigen::Vector3d g = (grad_scale * w(r, c) / (n * dist)) * diff;
      // dY/du' and dY/dv' through both the ray and the interpolated depth.
      const Eigen::Vector3d dy_du = Eigen::Vector3d(ds.value / k.fx, 0.0, 0.0) + ray * ds.d_u;
      const Eigen::Vector3d dy_dv = Eigen::Vector3d(0.0, ds.value / k.fy, 0.0) + ray * ds.d_v;
      accumulate_point_gradient(coords, r, c, g, grad->warp);
      accumulate_coord_gradient(coords, r, c, -g.dot(dy_du), -g.dot(dy_dv), grad->warp);
      bilinear_scatter(grad->source_depth, u, v, -g.dot(ray));
    }
  }
  return value / n;
}

double alignment_3d_loss(const Image& target_depth, const Image& source_depth,
                         const Pose6DoF& source_from_target, const CameraIntrinsics& k) {
  const WarpCoords coords = warp_coords(target_depth, source_from_target, k);
  return alignment_3d_loss(source_depth, coords, Image::Ones(k.height, k.width));
}

}  // namespace idvo
