#ifndef IDVO_TEST_UTIL_HPP
#define IDVO_TEST_UTIL_HPP

#include <filesystem>
#include <random>
#include <string>

#include "idvo/geometry.hpp"

namespace idvo::test {

inline Pose6DoF random_pose(std::mt19937_64& rng, double max_angle = 1.4, double max_t = 3.0) {
  std::uniform_real_distribution<double> a(-max_angle, max_angle);
  std::uniform_real_distribution<double> t(-max_t, max_t);
  return Pose6DoF(Eigen::Vector3d(t(rng), t(rng), t(rng)), Eigen::Vector3d(a(rng), a(rng), a(rng)));
}

inline CameraIntrinsics small_camera(int width = 64, int height = 32) {
  CameraIntrinsics k;
  k.fx = k.fy = 0.8 * width;
  k.cx = width / 2.0 - 0.5;
  k.cy = height / 2.0 - 0.5;
  k.width = width;
  k.height = height;
  return k;
}

// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("idvo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace idvo::test

#endif  // IDVO_TEST_UTIL_HPP
