#ifndef IDVO_GEOMETRY_HPP
#define IDVO_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "idvo/errors.hpp"

namespace idvo {

template <typename Scalar>
using Vector2T = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3T = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4T = Eigen::Matrix<Scalar, 4, 4>;

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar angle) {
  using std::remainder;
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar r = remainder(angle, Scalar(2) * pi);
  if (r <= -pi) r += Scalar(2) * pi;
  return r;
}

template <typename Derived>
Vector3T<typename Derived::Scalar> wrap_angles(const Eigen::MatrixBase<Derived>& angles) {
  return {wrap_angle(angles(0)), wrap_angle(angles(1)), wrap_angle(angles(2))};
}

// Intrinsic Z-Y-X Euler angles packed as (roll, pitch, yaw): R = Rz(yaw) * Ry(pitch) * Rx(roll).
template <typename Scalar>
Matrix3T<Scalar> euler_to_rotation(const Vector3T<Scalar>& angles) {
  using std::cos;
  using std::sin;
  const Scalar cr = cos(angles(0)), sr = sin(angles(0));
  const Scalar cp = cos(angles(1)), sp = sin(angles(1));
  const Scalar cy = cos(angles(2)), sy = sin(angles(2));
  Matrix3T<Scalar> r;
  // clang-format off
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp,     cp * sr,                cp * cr;
  // clang-format on
  return r;
}

// Partial derivatives of euler_to_rotation w.r.t. roll, pitch, yaw (in that order).
template <typename Scalar>
std::array<Matrix3T<Scalar>, 3> euler_rotation_derivatives(const Vector3T<Scalar>& angles) {
  using std::cos;
  using std::sin;
  const Scalar cr = cos(angles(0)), sr = sin(angles(0));
  const Scalar cp = cos(angles(1)), sp = sin(angles(1));
  const Scalar cy = cos(angles(2)), sy = sin(angles(2));
  std::array<Matrix3T<Scalar>, 3> d;
  // clang-format off
  d[0] << Scalar(0), cy * sp * cr + sy * sr, -cy * sp * sr + sy * cr,
          Scalar(0), sy * sp * cr - cy * sr, -sy * sp * sr - cy * cr,
          Scalar(0), cp * cr,                -cp * sr;
  d[1] << -cy * sp, cy * cp * sr, cy * cp * cr,
          -sy * sp, sy * cp * sr, sy * cp * cr,
          -cp,      -sp * sr,     -sp * cr;
  d[2] << -sy * cp, -sy * sp * sr - cy * cr, -sy * sp * cr + cy * sr,
           cy * cp,  cy * sp * sr - sy * cr,  cy * sp * cr + sy * sr,
           Scalar(0), Scalar(0),              Scalar(0);
  // clang-format on
  return d;
}

// Inverse of euler_to_rotation. At gimbal lock (|pitch| = pi/2) roll is set to 0 and the
// remaining freedom goes to yaw.
template <typename Scalar>
Vector3T<Scalar> rotation_to_euler(const Matrix3T<Scalar>& r) {
  using std::asin;
  using std::atan2;
  using std::sqrt;
  constexpr Scalar half_pi = std::numbers::pi_v<Scalar> / Scalar(2);
  const Scalar cos_pitch = sqrt(r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0));
  if (cos_pitch < Scalar(1e-12)) {
    const Scalar pitch = r(2, 0) < Scalar(0) ? half_pi : -half_pi;
    return {Scalar(0), pitch, atan2(-r(0, 1), r(1, 1))};
  }
  return {atan2(r(2, 1), r(2, 2)), atan2(-r(2, 0), cos_pitch), atan2(r(1, 0), r(0, 0))};
}

// Reverse-mode derivative of rotation_to_euler away from gimbal lock: maps dL/d(roll,pitch,yaw)
// to dL/dR.
template <typename Scalar>
Matrix3T<Scalar> rotation_to_euler_backward(const Matrix3T<Scalar>& r,
                                            const Vector3T<Scalar>& g_angles) {
  Matrix3T<Scalar> g = Matrix3T<Scalar>::Zero();
  const Scalar n_roll = r(2, 1) * r(2, 1) + r(2, 2) * r(2, 2);
  g(2, 1) += g_angles(0) * r(2, 2) / n_roll;
  g(2, 2) -= g_angles(0) * r(2, 1) / n_roll;
  // pitch = atan2(-r20, c), c = sqrt(r00^2 + r10^2)
  const Scalar c2 = r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0);
  const Scalar c = std::sqrt(c2);
  const Scalar n_pitch = r(2, 0) * r(2, 0) + c2;
  g(2, 0) -= g_angles(1) * c / n_pitch;
  const Scalar d_c = g_angles(1) * r(2, 0) / n_pitch;  // dpitch/dc = r20 / n_pitch
  g(0, 0) += d_c * r(0, 0) / c;
  g(1, 0) += d_c * r(1, 0) / c;
  const Scalar n_yaw = c2;
  g(1, 0) += g_angles(2) * r(0, 0) / n_yaw;
  g(0, 0) -= g_angles(2) * r(1, 0) / n_yaw;
  return g;
}

// Rigid transform x' = R(orientation) x + translation. Orientation is kept wrapped into (-pi, pi].
// Absolute trajectory poses are camera-to-world; relative snippet poses map points of the later
// frame into the earlier one.
template <typename Scalar>
class Pose6 {
 public:
  using Vector3 = Vector3T<Scalar>;
  using Matrix3 = Matrix3T<Scalar>;
  using Matrix4 = Matrix4T<Scalar>;

  Pose6() : translation_(Vector3::Zero()), orientation_(Vector3::Zero()) {}
  Pose6(const Vector3& translation, const Vector3& orientation)
      : translation_(translation), orientation_(wrap_angles(orientation)) {}

  static Pose6 identity() { return Pose6(); }

  static Pose6 from_rotation(const Matrix3& r, const Vector3& t) {
    return Pose6(t, rotation_to_euler(r));
  }
  static Pose6 from_matrix(const Matrix4& m) {
    return from_rotation(m.template topLeftCorner<3, 3>(), m.template topRightCorner<3, 1>());
  }

  const Vector3& translation() const { return translation_; }
  const Vector3& orientation() const { return orientation_; }
  void set_translation(const Vector3& t) { translation_ = t; }
  void set_orientation(const Vector3& angles) { orientation_ = wrap_angles(angles); }

  Matrix3 rotation() const { return euler_to_rotation<Scalar>(orientation_); }

  Matrix4 matrix() const {
    Matrix4 m = Matrix4::Identity();
    m.template topLeftCorner<3, 3>() = rotation();
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  Vector3 operator*(const Vector3& p) const { return rotation() * p + translation_; }

  // (tx, ty, tz, roll, pitch, yaw)
  Eigen::Matrix<Scalar, 6, 1> vector() const {
    Eigen::Matrix<Scalar, 6, 1> v;
    v << translation_, orientation_;
    return v;
  }
  static Pose6 from_vector(const Eigen::Matrix<Scalar, 6, 1>& v) {
    return Pose6(v.template head<3>(), v.template tail<3>());
  }

 private:
  Vector3 translation_;
  Vector3 orientation_;
};

using Pose6DoF = Pose6<double>;

// Result maps x -> a(b(x)).
template <typename Scalar>
Pose6<Scalar> compose(const Pose6<Scalar>& a, const Pose6<Scalar>& b) {
  const Matrix3T<Scalar> ra = a.rotation();
  return Pose6<Scalar>::from_rotation(ra * b.rotation(), ra * b.translation() + a.translation());
}

template <typename Scalar>
Pose6<Scalar> invert(const Pose6<Scalar>& p) {
  const Matrix3T<Scalar> rt = p.rotation().transpose();
  return Pose6<Scalar>::from_rotation(rt, -(rt * p.translation()));
}

// Gradient of a scalar w.r.t. the 6 pose parameters, given its gradient w.r.t. the rotation
// matrix and translation of that pose.
inline Vector6d pose_parameter_gradient(const Pose6DoF& pose, const Eigen::Matrix3d& g_rotation,
                                        const Eigen::Vector3d& g_translation) {
  const auto d = euler_rotation_derivatives<double>(pose.orientation());
  Vector6d g;
  g.head<3>() = g_translation;
  for (int k = 0; k < 3; ++k) g(3 + k) = (g_rotation.array() * d[k].array()).sum();
  return g;
}

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Throws DomainError if focal lengths are nonpositive or the principal point is off-image.
  void validate() const;

  // Intrinsics of the factor-times box-downsampled image (pixel centers preserved).
  CameraIntrinsics scaled(int factor) const;

  // Intrinsics after area-resizing the image to new_width x new_height.
  CameraIntrinsics resized(int new_width, int new_height) const;

  bool operator==(const CameraIntrinsics&) const = default;
};

template <typename Scalar>
Vector3T<Scalar> backproject(Scalar u, Scalar v, Scalar depth, const CameraIntrinsics& k) {
  if (!(depth > Scalar(0))) {
    throw DomainError("backproject: depth must be positive, got " + std::to_string(double(depth)));
  }
  return {(u - Scalar(k.cx)) / Scalar(k.fx) * depth, (v - Scalar(k.cy)) / Scalar(k.fy) * depth,
          depth};
}

// Continuous pixel coordinates of a camera-frame point; may fall outside the image.
template <typename Scalar>
Vector2T<Scalar> project(const Vector3T<Scalar>& point, const CameraIntrinsics& k) {
  if (!(point.z() > Scalar(0))) {
    throw BehindCameraError("project: point has z <= 0");
  }
  return {Scalar(k.fx) * point.x() / point.z() + Scalar(k.cx),
          Scalar(k.fy) * point.y() / point.z() + Scalar(k.cy)};
}

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector2d> pixel_origin;
};

PointCloud transform_cloud(const PointCloud& cloud, const Pose6DoF& t);

}  // namespace idvo

#endif  // IDVO_GEOMETRY_HPP
