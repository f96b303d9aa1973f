#ifndef IDVO_EVALUATION_HPP
#define IDVO_EVALUATION_HPP

#include <span>
#include <string>
#include <vector>

#include "idvo/geometry.hpp"
#include "idvo/image.hpp"

namespace idvo {

// How an estimated snippet is aligned to ground truth before the error is measured. Both
// variants first re-base each snippet so its first pose is the identity.
enum class AteAlignment {
  scale,       // least-squares scale on translations only
  similarity,  // Umeyama rotation, translation and scale on positions
};

// RMSE over poses of |s * t_est - t_gt| after alignment. Throws LengthError on a length mismatch
// or fewer than 2 poses.
double ate_snippet(std::span<const Pose6DoF> est, std::span<const Pose6DoF> gt,
                   AteAlignment alignment = AteAlignment::scale);

// Least-squares scale used by ate_snippet: sum <e, g> / sum |e|^2, 0 if the denominator is 0.
double ate_scale(std::span<const Pose6DoF> est, std::span<const Pose6DoF> gt);

struct AteReport {
  std::vector<double> per_snippet;  // window i covers poses [i, i + snippet_len)
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t count = 0;
};

// Sliding windows of snippet_len poses with stride 1.
AteReport ate_sequence(std::span<const Pose6DoF> est, std::span<const Pose6DoF> gt,
                       int snippet_len = 5, AteAlignment alignment = AteAlignment::scale);

// Sum of |P[i+1] - P[i]|.
double path_length(std::span<const Pose6DoF> traj);

struct DepthReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  std::size_t pixels = 0;
  double cap = 80.0;
};

// Median-scaled metrics over pixels with 0 < gt <= cap. Scaled predictions are clamped to
// [1e-3, cap]. Throws DimensionError on a shape mismatch and DomainError when no pixel is valid
// or the prediction median is not positive.
DepthReport depth_metrics(const Image& pred, const Image& gt, double cap = 80.0);

// Per-image mean of each metric; pixel counts are summed.
DepthReport average(const std::vector<DepthReport>& reports);

struct SmoothnessReport {
  std::vector<double> velocity;  // v_t
  std::vector<double> accel;     // a_t
  std::vector<double> jerk;      // j_t
  double mean_velocity = 0.0;
  double mean_abs_accel = 0.0;
  double mean_abs_jerk = 0.0;
  double max_abs_jerk = 0.0;
  double sawtooth_index = 0.0;  // mean |j| / mean v; 0 when the trajectory does not move
};

// Throws LengthError for fewer than 4 poses.
SmoothnessReport smoothness(std::span<const Pose6DoF> traj, double chi = 100.0);

// "0.012±0.011"
std::string format_mean_std(double mean, double std, int decimals = 3);

// CSV writers; throw LoadError when the file cannot be written.
void write_ate_csv(const std::string& path, const AteReport& report);
void write_depth_csv(const std::string& path, const std::vector<DepthReport>& per_image);
void write_smoothness_csv(const std::string& path, const SmoothnessReport& report);

}  // namespace idvo

#endif  // IDVO_EVALUATION_HPP
