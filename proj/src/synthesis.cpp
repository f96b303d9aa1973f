#include "idvo/synthesis.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace idvo {

namespace {

void check_shape(const Image& img, const CameraIntrinsics& k, const char* what) {
  if (img.cols() != k.width || img.rows() != k.height) {
    std::ostringstream msg;
    msg << what << " is " << img.cols() << "x" << img.rows() << " but intrinsics expect "
        << k.width << "x" << k.height;
    throw DimensionError(msg.str());
  }
}

bool is_identity(const Eigen::Isometry3d& t) {
  return t.linear() == Eigen::Matrix3d::Identity() && t.translation() == Eigen::Vector3d::Zero();
}

}  // namespace

void validate_frame(const Frame& frame) {
  if (!frame.intensity.allFinite() || (frame.intensity < 0.0).any() ||
      (frame.intensity > 1.0).any()) {
    throw DomainError("frame intensities must be finite and within [0, 1]");
  }
}

WarpCoords warp_coords(const Image& depth, const Eigen::Isometry3d& source_from_target,
                       const CameraIntrinsics& k) {
  check_shape(depth, k, "depth");
  const Eigen::Index rows = depth.rows();
  const Eigen::Index cols = depth.cols();
  WarpCoords w;
  w.u.resize(rows, cols);
  w.v.resize(rows, cols);
  w.validity.resize(rows, cols);
  w.target_points.resize(std::size_t(rows * cols));
  w.source_points.resize(std::size_t(rows * cols));
  w.source_from_target = source_from_target;
  w.intrinsics = k;

  const bool identity = is_identity(source_from_target);
  const Eigen::Matrix3d r = source_from_target.linear();
  const Eigen::Vector3d t = source_from_target.translation();
  const double max_u = cols - 1;
  const double max_v = rows - 1;

  for (Eigen::Index row = 0; row < rows; ++row) {
    for (Eigen::Index col = 0; col < cols; ++col) {
      const auto idx = std::size_t(row * cols + col);
      const Eigen::Vector3d p = backproject<double>(double(col), double(row), depth(row, col), k);
      w.target_points[idx] = p;
      if (identity) {
        w.source_points[idx] = p;
        w.u(row, col) = double(col);
        w.v(row, col) = double(row);
        w.validity(row, col) = 1.0;
        continue;
      }
      const Eigen::Vector3d x = r * p + t;
      w.source_points[idx] = x;
      if (!(x.z() > 0.0)) {
        w.u(row, col) = -1.0;
        w.v(row, col) = -1.0;
        w.validity(row, col) = 0.0;
        continue;
      }
      const double u = k.fx * x.x() / x.z() + k.cx;
      const double v = k.fy * x.y() / x.z() + k.cy;
      w.u(row, col) = u;
      w.v(row, col) = v;
      w.validity(row, col) = (u >= 0.0 && u <= max_u && v >= 0.0 && v <= max_v) ? 1.0 : 0.0;
    }
  }
  return w;
}

WarpCoords warp_coords(const Image& depth, const Pose6DoF& source_from_target,
                       const CameraIntrinsics& k) {
  return warp_coords(depth, to_isometry(source_from_target), k);
}

namespace {

struct BilinearCell {
  Eigen::Index x0, x1, y0, y1;
  double fu, fv;
};

std::optional<BilinearCell> bilinear_cell(Eigen::Index rows, Eigen::Index cols, double u,
                                          double v) {
  if (!(u >= 0.0 && u <= double(cols - 1) && v >= 0.0 && v <= double(rows - 1))) {
    return std::nullopt;
  }
  BilinearCell c;
  c.x0 = Eigen::Index(std::floor(u));
  c.y0 = Eigen::Index(std::floor(v));
  // The last row/column is sampled as the far corner of the previous cell.
  if (c.x0 == cols - 1 && cols > 1) --c.x0;
  if (c.y0 == rows - 1 && rows > 1) --c.y0;
  c.x1 = std::min(c.x0 + 1, cols - 1);
  c.y1 = std::min(c.y0 + 1, rows - 1);
  c.fu = u - double(c.x0);
  c.fv = v - double(c.y0);
  return c;
}

}  // namespace

BilinearSample bilinear_sample(const Image& img, double u, double v) {
  BilinearSample s;
  const auto cell = bilinear_cell(img.rows(), img.cols(), u, v);
  if (!cell) return s;
  const auto& [x0, x1, y0, y1, fu, fv] = *cell;
  const double i00 = img(y0, x0);
  const double i01 = img(y0, x1);
  const double i10 = img(y1, x0);
  const double i11 = img(y1, x1);
  const double top = i00 + fu * (i01 - i00);
  const double bottom = i10 + fu * (i11 - i10);
  s.value = top + fv * (bottom - top);
  s.d_u = (1.0 - fv) * (i01 - i00) + fv * (i11 - i10);
  s.d_v = bottom - top;
  s.valid = true;
  return s;
}

void bilinear_scatter(Image& grad, double u, double v, double g) {
  const auto cell = bilinear_cell(grad.rows(), grad.cols(), u, v);
  if (!cell) return;
  const auto& [x0, x1, y0, y1, fu, fv] = *cell;
  grad(y0, x0) += g * (1.0 - fu) * (1.0 - fv);
  grad(y0, x1) += g * fu * (1.0 - fv);
  grad(y1, x0) += g * (1.0 - fu) * fv;
  grad(y1, x1) += g * fu * fv;
}

WarpResult sample_view(const Image& src, WarpCoords coords) {
  if (src.rows() != coords.u.rows() || src.cols() != coords.u.cols()) {
    throw DimensionError("sample_view: source and coordinate grid shapes differ");
  }
  const Eigen::Index rows = src.rows();
  const Eigen::Index cols = src.cols();
  WarpResult out;
  out.synthesized = Image::Zero(rows, cols);
  out.validity = Image::Zero(rows, cols);
  out.grad_u = Image::Zero(rows, cols);
  out.grad_v = Image::Zero(rows, cols);
  for (Eigen::Index row = 0; row < rows; ++row) {
    for (Eigen::Index col = 0; col < cols; ++col) {
      if (coords.validity(row, col) == 0.0) continue;
      const BilinearSample s = bilinear_sample(src, coords.u(row, col), coords.v(row, col));
      if (!s.valid) continue;
      out.synthesized(row, col) = s.value;
      out.grad_u(row, col) = s.d_u;
      out.grad_v(row, col) = s.d_v;
      out.validity(row, col) = 1.0;
    }
  }
  out.coords = std::move(coords);
  return out;
}

WarpResult synthesize_view(const Frame& src, const Image& depth,
                           const Eigen::Isometry3d& source_from_target, const CameraIntrinsics& k) {
  check_shape(src.intensity, k, "source frame");
  return sample_view(src.intensity, warp_coords(depth, source_from_target, k));
}

WarpResult synthesize_view(const Frame& src, const Image& depth,
                           const Pose6DoF& source_from_target, const CameraIntrinsics& k) {
  return synthesize_view(src, depth, to_isometry(source_from_target), k);
}

void accumulate_point_gradient(const WarpCoords& coords, Eigen::Index row, Eigen::Index col,
                               const Eigen::Vector3d& g_point, WarpGradient& grad) {
  const auto idx = std::size_t(row * coords.u.cols() + col);
  const Eigen::Vector3d& p = coords.target_points[idx];
  grad.rotation += g_point * p.transpose();
  grad.translation += g_point;
  // p = ray * depth, so dX/d(depth) = R * p / depth.
  grad.depth(row, col) += g_point.dot(coords.source_from_target.linear() * p) / p.z();
}

void accumulate_coord_gradient(const WarpCoords& coords, Eigen::Index row, Eigen::Index col,
                               double g_u, double g_v, WarpGradient& grad) {
  if (g_u == 0.0 && g_v == 0.0) return;
  const auto idx = std::size_t(row * coords.u.cols() + col);
  const Eigen::Vector3d& x = coords.source_points[idx];
  const CameraIntrinsics& k = coords.intrinsics;
  const double inv_z = 1.0 / x.z();
  Eigen::Vector3d g_point;
  g_point.x() = g_u * k.fx * inv_z;
  g_point.y() = g_v * k.fy * inv_z;
  g_point.z() = -(g_u * k.fx * x.x() + g_v * k.fy * x.y()) * inv_z * inv_z;
  accumulate_point_gradient(coords, row, col, g_point, grad);
}

}  // namespace idvo
