#ifndef IDVO_SYNTHESIS_HPP
#define IDVO_SYNTHESIS_HPP

#include <Eigen/Geometry>

#include <vector>

#include "idvo/geometry.hpp"
#include "idvo/image.hpp"

namespace idvo {

struct Frame {
  Image intensity;  // grayscale, values in [0, 1]
  double timestamp = 0.0;

  int width() const { return int(intensity.cols()); }
  int height() const { return int(intensity.rows()); }
};

// Throws DomainError unless every value is finite and in [0, 1].
void validate_frame(const Frame& frame);

inline Eigen::Isometry3d to_isometry(const Pose6DoF& pose) {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = pose.rotation();
  iso.translation() = pose.translation();
  return iso;
}

// Per-pixel correspondence between a target view and a source view.
struct WarpCoords {
  Image u;         // continuous source column
  Image v;         // continuous source row
  Image validity;  // 1 where the transformed point is in front of the source camera and lands
                   // inside [0, W-1] x [0, H-1]
  std::vector<Eigen::Vector3d> target_points;  // backprojected target pixels, row-major order
  std::vector<Eigen::Vector3d> source_points;  // target_points mapped into the source frame
  Eigen::Isometry3d source_from_target = Eigen::Isometry3d::Identity();
  CameraIntrinsics intrinsics;
};

struct WarpResult {
  Image synthesized;  // F', zero where invalid
  Image validity;
  Image grad_u;  // d synthesized / d u'
  Image grad_v;  // d synthesized / d v'
  WarpCoords coords;
};

struct BilinearSample {
  double value = 0.0;
  double d_u = 0.0;
  double d_v = 0.0;
  bool valid = false;
};

// Inverse warp: for each target pixel, backproject with the target depth, transform into the
// source frame and project. source_from_target maps target-camera points into the source camera.
WarpCoords warp_coords(const Image& depth, const Eigen::Isometry3d& source_from_target,
                       const CameraIntrinsics& k);
WarpCoords warp_coords(const Image& depth, const Pose6DoF& source_from_target,
                       const CameraIntrinsics& k);

// 4-neighbour bilinear interpolation with its exact piecewise-linear gradient. Samples outside
// [0, W-1] x [0, H-1] return value 0 and valid = false.
BilinearSample bilinear_sample(const Image& img, double u, double v);

// Adjoint of bilinear_sample w.r.t. the image: adds g times each corner weight into grad.
// No-op outside the valid domain.
void bilinear_scatter(Image& grad, double u, double v, double g);

// Samples src at precomputed coordinates.
WarpResult sample_view(const Image& src, WarpCoords coords);

WarpResult synthesize_view(const Frame& src, const Image& depth,
                           const Eigen::Isometry3d& source_from_target, const CameraIntrinsics& k);
WarpResult synthesize_view(const Frame& src, const Image& depth,
                           const Pose6DoF& source_from_target, const CameraIntrinsics& k);

// Accumulated gradient of a scalar objective w.r.t. the inputs of a warp.
struct WarpGradient {
  Image depth;  // w.r.t. target depth
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  WarpGradient() = default;
  WarpGradient(Eigen::Index rows, Eigen::Index cols) : depth(Image::Zero(rows, cols)) {}
};

// Chain rule from dL/d(source point) at pixel (row, col) into depth and transform gradients.
void accumulate_point_gradient(const WarpCoords& coords, Eigen::Index row, Eigen::Index col,
                               const Eigen::Vector3d& g_point, WarpGradient& grad);

// Chain rule from dL/du', dL/dv' at pixel (row, col).
void accumulate_coord_gradient(const WarpCoords& coords, Eigen::Index row, Eigen::Index col,
                               double g_u, double g_v, WarpGradient& grad);

}  // namespace idvo

#endif  // IDVO_SYNTHESIS_HPP
