#include "idvo/geometry.hpp"

#include <sstream>

namespace idvo {

void CameraIntrinsics::validate() const {
  std::ostringstream msg;
  if (!(fx > 0.0) || !(fy > 0.0)) {
    msg << "intrinsics: focal lengths must be positive (fx=" << fx << ", fy=" << fy << ")";
  } else if (width <= 0 || height <= 0) {
    msg << "intrinsics: image size must be positive (" << width << "x" << height << ")";
  } else if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    msg << "intrinsics: principal point (" << cx << ", " << cy << ") outside " << width << "x"
        << height;
  } else {
    return;
  }
  throw DomainError(msg.str());
}

CameraIntrinsics CameraIntrinsics::scaled(int factor) const {
  if (factor <= 0 || width % factor != 0 || height % factor != 0) {
    throw DimensionError("intrinsics: " + std::to_string(width) + "x" + std::to_string(height) +
                         " not divisible by " + std::to_string(factor));
  }
  return resized(width / factor, height / factor);
}

CameraIntrinsics CameraIntrinsics::resized(int new_width, int new_height) const {
  if (new_width <= 0 || new_height <= 0) {
    throw DimensionError("intrinsics: resize target must be positive");
  }
  const double sx = double(new_width) / width;
  const double sy = double(new_height) / height;
  CameraIntrinsics k;
  k.fx = fx * sx;
  k.fy = fy * sy;
  k.cx = (cx + 0.5) * sx - 0.5;
  k.cy = (cy + 0.5) * sy - 0.5;
  k.width = new_width;
  k.height = new_height;
  return k;
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose6DoF& t) {
  const Eigen::Matrix3d r = t.rotation();
  PointCloud out;
  out.pixel_origin = cloud.pixel_origin;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(r * p + t.translation());
  return out;
}

}  // namespace idvo
