#include <doctest.h>

#include <numbers>
#include <random>

#include "idvo/geometry.hpp"
#include "test_util.hpp"

using namespace idvo;

TEST_CASE("euler_to_rotation") {
  CHECK(euler_to_rotation<double>(Eigen::Vector3d::Zero()).isApprox(Eigen::Matrix3d::Identity(), 0.0));

  const Eigen::Matrix3d yaw = euler_to_rotation<double>(Eigen::Vector3d(0, 0, std::numbers::pi / 2));
  CHECK((yaw * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm() < 1e-15);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Matrix3d r = euler_to_rotation<double>(Eigen::Vector3d(a(rng), a(rng), a(rng)));
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("rotation_to_euler inverts euler_to_rotation away from gimbal lock") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> a(-3.1, 3.1);
  std::uniform_real_distribution<double> p(-std::numbers::pi / 2 + 0.01, std::numbers::pi / 2 - 0.01);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d e(a(rng), p(rng), a(rng));
    CHECK((rotation_to_euler<double>(euler_to_rotation<double>(e)) - e).norm() < 1e-9);
  }
}

TEST_CASE("gimbal lock sets roll to zero") {
  const Eigen::Vector3d e(0.3, std::numbers::pi / 2, 0.2);
  const Eigen::Matrix3d r = euler_to_rotation<double>(e);
  const Eigen::Vector3d back = rotation_to_euler<double>(r);
  CHECK(back(0) == 0.0);
  CHECK((euler_to_rotation<double>(back) - r).norm() < 1e-9);
}

TEST_CASE("euler rotation derivatives match finite differences") {
  const Eigen::Vector3d e(0.3, -0.4, 1.1);
  const auto d = euler_rotation_derivatives<double>(e);
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d hi = e, lo = e;
    hi(k) += 1e-6;
    lo(k) -= 1e-6;
    const Eigen::Matrix3d fd = (euler_to_rotation<double>(hi) - euler_to_rotation<double>(lo)) / 2e-6;
    CHECK((fd - d[std::size_t(k)]).norm() < 1e-8);
  }
}

TEST_CASE("compose and invert") {
  std::mt19937_64 rng(3);
  const Pose6DoF p = test::random_pose(rng);
  CHECK(compose(Pose6DoF::identity(), p).matrix().isApprox(p.matrix(), 1e-12));
  CHECK((compose(p, invert(p)).matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-10);
  CHECK((invert(Pose6DoF::identity()).matrix() - Eigen::Matrix4d::Identity()).norm() == 0.0);

  const Pose6DoF a(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d::Zero());
  const Pose6DoF b(Eigen::Vector3d(0, 2, 0), Eigen::Vector3d::Zero());
  CHECK((compose(a, b).translation() - Eigen::Vector3d(1, 2, 0)).norm() == 0.0);

  const Pose6DoF t(Eigen::Vector3d(1, -2, 3), Eigen::Vector3d::Zero());
  CHECK((invert(t).translation() - Eigen::Vector3d(-1, 2, -3)).norm() == 0.0);
  CHECK(invert(t).orientation().norm() == 0.0);

  for (int i = 0; i < 100; ++i) {
    const Pose6DoF x = test::random_pose(rng), y = test::random_pose(rng), z = test::random_pose(rng);
    CHECK((compose(x, y).matrix() - x.matrix() * y.matrix()).norm() < 1e-10);
    CHECK((compose(compose(x, y), z).matrix() - compose(x, compose(y, z)).matrix()).norm() < 1e-9);
    CHECK((compose(invert(x), x).matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-10);
  }
}

TEST_CASE("pose matrix round trip") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Pose6DoF p = test::random_pose(rng);
    const Pose6DoF q = Pose6DoF::from_matrix(p.matrix());
    CHECK((q.vector() - p.vector()).norm() < 1e-9);
  }
}

TEST_CASE("orientation is wrapped") {
  const Pose6DoF p(Eigen::Vector3d::Zero(), Eigen::Vector3d(3 * std::numbers::pi, -std::numbers::pi, 0.5));
  CHECK(p.orientation()(0) == doctest::Approx(std::numbers::pi));
  CHECK(p.orientation()(1) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == std::numbers::pi);
}

TEST_CASE("backproject and project") {
  const CameraIntrinsics k = test::small_camera();
  CHECK((backproject(k.cx, k.cy, 5.0, k) - Eigen::Vector3d(0, 0, 5)).norm() == 0.0);
  CHECK((backproject(k.cx + k.fx, k.cy, 2.0, k) - Eigen::Vector3d(2, 0, 2)).norm() < 1e-15);
  CHECK_THROWS_AS(backproject(1.0, 1.0, 0.0, k), DomainError);
  CHECK_THROWS_AS(backproject(1.0, 1.0, -1.0, k), DomainError);

  CHECK((project(Eigen::Vector3d(0, 0, 7.5), k) - Eigen::Vector2d(k.cx, k.cy)).norm() == 0.0);
  CameraIntrinsics k2;
  k2.fx = k2.fy = 100;
  k2.cx = 50;
  k2.cy = 20;
  k2.width = 100;
  k2.height = 40;
  CHECK(project(Eigen::Vector3d(1, 0, 1), k2)(0) == 150.0);
  CHECK_THROWS_AS(project(Eigen::Vector3d(1, 0, 0), k), BehindCameraError);
  CHECK_THROWS_AS(project(Eigen::Vector3d(1, 0, -2), k), BehindCameraError);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-20, 80), v(-10, 40), d(0.1, 100);
  for (int i = 0; i < 500; ++i) {
    const double uu = u(rng), vv = v(rng);
    const Eigen::Vector2d back = project(backproject(uu, vv, d(rng), k), k);
    CHECK((back - Eigen::Vector2d(uu, vv)).norm() < 1e-9);
  }
}

TEST_CASE("transform_cloud") {
  PointCloud c;
  c.points = {{0, 0, 5}, {1, 2, 3}};
  c.pixel_origin = {{1, 2}, {3, 4}};
  const PointCloud same = transform_cloud(c, Pose6DoF::identity());
  CHECK((same.points[1] - c.points[1]).norm() == 0.0);

  const PointCloud moved = transform_cloud(c, Pose6DoF(Eigen::Vector3d(0, 0, -1), Eigen::Vector3d::Zero()));
  CHECK((moved.points[0] - Eigen::Vector3d(0, 0, 4)).norm() == 0.0);
  CHECK(moved.pixel_origin == c.pixel_origin);

  std::mt19937_64 rng(6);
  const Pose6DoF p = test::random_pose(rng);
  const PointCloud out = transform_cloud(c, p);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const Eigen::Vector4d h = p.matrix() * c.points[i].homogeneous();
    CHECK((out.points[i] - h.head<3>()).norm() < 1e-10);
  }
}

TEST_CASE("intrinsics validation and scaling") {
  CameraIntrinsics k = test::small_camera();
  CHECK_NOTHROW(k.validate());
  CameraIntrinsics bad = k;
  bad.fx = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = k;
  bad.cx = 64;
  CHECK_THROWS_AS(bad.validate(), DomainError);

  const CameraIntrinsics half = k.scaled(2);
  CHECK(half.width == 32);
  CHECK(half.fx == doctest::Approx(k.fx / 2));
  // pixel centres preserved: centre of fine pixel block (0..1) maps to coarse pixel 0
  CHECK(half.cx == doctest::Approx((k.cx + 0.5) / 2 - 0.5));

  CameraIntrinsics kitti;
  kitti.fx = kitti.fy = 718.856;
  kitti.cx = 607.1928;
  kitti.cy = 185.2157;
  kitti.width = 1241;
  kitti.height = 376;
  const CameraIntrinsics r = kitti.resized(416, 128);
  CHECK(r.fx == doctest::Approx(718.856 * 416.0 / 1241.0).epsilon(1e-12));
  CHECK(r.fy == doctest::Approx(718.856 * 128.0 / 376.0).epsilon(1e-12));
  CHECK(r.width == 416);
  CHECK(r.height == 128);
}
