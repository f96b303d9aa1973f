#ifndef IDVO_OBJECTIVE_HPP
#define IDVO_OBJECTIVE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "idvo/geometry.hpp"
#include "idvo/masking.hpp"
#include "idvo/synthesis.hpp"

namespace idvo {

// ---------------------------------------------------------------------------------------------
// Inertia
// ---------------------------------------------------------------------------------------------

struct InertiaParams {
  double chi = 100.0;   // weight of the angular-rate change inside the acceleration value
  double a_typ = 2.0;   // typical |acceleration|, scene units per frame^2
  double j_typ = 0.5;   // typical |jerk|, scene units per frame^3
  // true: hinge ratio (|x| - typ) / |x|. false: the literal (|x| - typ) / x, which is never
  // positive for negative x and so ignores decelerations.
  bool symmetric_denominator = true;

  void validate() const;
};

// Finite-difference motion statistics of an absolute trajectory of N poses:
//   v[i]        = |P[i+1] - P[i]|                               (N-1 values)
//   phi_rate[i] = |wrap(E[i+1] - E[i])|, E the Euler angles      (N-1 values)
//   a[i]        = (v[i+1] - v[i]) + chi * (phi_rate[i+1] - phi_rate[i])  (N-2 values)
//   j[i]        = a[i+1] - a[i]                                  (N-3 values)
struct MotionSeries {
  std::vector<double> v;
  std::vector<double> phi_rate;
  std::vector<double> a;
  std::vector<double> j;
};

// Throws LengthError for fewer than 2 poses.
MotionSeries motion_series(std::span<const Pose6DoF> poses, double chi = 100.0);

// max(0, (|x| - typ) / |x|) or the literal variant; 0 at x = 0.
double hinge_ratio(double x, double typ, bool symmetric);

struct InertiaLoss {
  double value = 0.0;
  std::vector<Vector6d> grad;  // per pose: (tx, ty, tz, roll, pitch, yaw)
};

// Sum over time steps of |L_acce + L_jerk|; the first acceleration step has no jerk term.
// Throws LengthError for fewer than 4 poses.
InertiaLoss inertia_loss(std::span<const Pose6DoF> poses, const InertiaParams& params);

// ---------------------------------------------------------------------------------------------
// Per-pair photometric and geometric terms
// ---------------------------------------------------------------------------------------------

// Gradient buffers for one (target, source) pair at one scale.
struct PairGradient {
  WarpGradient warp;   // target depth and source-from-target transform
  Image source_depth;  // alignment term only
  Image mask;          // w.r.t. combined mask values

  PairGradient() = default;
  PairGradient(Eigen::Index rows, Eigen::Index cols)
      : warp(rows, cols), source_depth(Image::Zero(rows, cols)), mask(Image::Zero(rows, cols)) {}
};

inline constexpr double kSsimC1 = 1e-4;  // (0.01)^2
inline constexpr double kSsimC2 = 9e-4;  // (0.03)^2

// mean over all pixels of |target - synthesized| * mask * validity. If grad is given,
// grad_scale times the gradient is accumulated into it.
double reconstruction_loss(const Image& target, const WarpResult& warped, const Image& mask,
                           PairGradient* grad = nullptr, double grad_scale = 1.0);

// 3x3 windowed SSIM per pixel (population statistics); windows must lie inside the image with
// all nine pixels valid and unblocked by the hard mask.
Image ssim_map(const Image& x, const Image& y);

// Mean over counted windows of mask(center) * (1 - SSIM) / 2. A window is counted when all nine
// of its pixels are valid and have hard > 0.
double ssim_loss(const Image& target, const WarpResult& warped, const Image& mask,
                 const Image& hard, PairGradient* grad = nullptr, double grad_scale = 1.0);

// Mean over pixels with weight > 0 of the distance between the target point mapped into the
// source frame and the source-depth point at the warped coordinate. weight multiplies validity.
double alignment_3d_loss(const Image& source_depth, const WarpCoords& coords, const Image& weight,
                         PairGradient* grad = nullptr, double grad_scale = 1.0);

// Convenience form: builds the warp from the target depth and source-from-target pose.
double alignment_3d_loss(const Image& target_depth, const Image& source_depth,
                         const Pose6DoF& source_from_target, const CameraIntrinsics& k);

// ---------------------------------------------------------------------------------------------
// Snippet objective
// ---------------------------------------------------------------------------------------------

struct LossWeights {
  double inertia = 1.0;     // w1
  double rec = 1.0;         // w2
  double ssim = 0.2;        // w3
  double align = 0.1;       // w4
  double mask = 0.15;       // w5
  std::vector<int> scales{1, 2, 4, 8};  // downsampling factors (1 = full resolution)

  void validate() const;
};

enum class SourceDirection { previous, next, both };

struct FramePair {
  int target = 0;
  int source = 0;
};

std::vector<FramePair> frame_pairs(int frame_count, SourceDirection direction);

// depth = min + (max - min) * logistic(logit)
struct DepthRange {
  double min = 0.1;
  double max = 100.0;

  Image decode(const Image& logits) const;
  Image derivative(const Image& logits) const;  // d depth / d logit
  double encode(double depth) const;
};

// Optimizable parameters of one snippet.
struct SnippetState {
  std::vector<Image> depth_logits;                   // one per frame
  std::vector<Pose6DoF> poses;                       // poses[i] maps frame i+1 into frame i
  std::vector<ExplainabilityField> explainability;   // one per frame pair
  int iteration = 0;

  int frame_count() const { return int(depth_logits.size()); }
};

// Camera-to-snippet absolute poses: identity for frame 0, then left-to-right composition.
std::vector<Pose6DoF> absolute_poses(std::span<const Pose6DoF> relative);

// Source-from-target transform of an adjacent pair.
Eigen::Isometry3d pair_transform(const std::vector<Pose6DoF>& relative, const FramePair& pair);

// Fixed inputs of the snippet objective.
struct ObjectiveContext {
  std::vector<std::vector<Image>> pyramids;  // [frame][scale index], matching weights.scales
  CameraIntrinsics intrinsics;
  std::vector<FramePair> pairs;
  std::vector<HardEdgeMask> hard_masks;  // one per pair, full resolution
  LossWeights weights;
  InertiaParams inertia;
  DepthRange depth_range;
};

ObjectiveContext make_context(const std::vector<Frame>& frames, const CameraIntrinsics& k,
                              const LossWeights& weights, const InertiaParams& inertia,
                              SourceDirection direction = SourceDirection::both);

// Recomputes the hard-edge masks from the current relative pose estimates.
void refresh_hard_masks(ObjectiveContext& ctx, const SnippetState& state,
                        const DhemParams& params);

struct LossBreakdown {
  std::vector<int> scales;
  // Unweighted term values per scale, summed over frame pairs.
  std::vector<double> rec;
  std::vector<double> ssim;
  std::vector<double> align;
  std::vector<double> mask;
  double inertia = 0.0;  // unweighted, scale independent
  bool inertia_skipped = false;  // fewer than 4 poses
  double total = 0.0;

  std::vector<Image> grad_depth_logits;
  std::vector<Vector6d> grad_poses;
  std::vector<Image> grad_explainability;

  double rec_sum() const;
  // w1 * inertia + sum_s (w2 rec + w3 ssim + w4 align + w5 mask), recomputed from the parts.
  double weighted_sum(const LossWeights& w) const;
};

LossBreakdown total_loss(const ObjectiveContext& ctx, const SnippetState& state,
                         bool with_gradient = true);

// ---------------------------------------------------------------------------------------------
// Finite-difference gradient verification
// ---------------------------------------------------------------------------------------------

enum class LossTerm { inertia, reconstruction, ssim, alignment, mask, total };

std::string to_string(LossTerm term);
LossWeights select_term(const LossWeights& base, LossTerm term);

struct BlockCheck {
  std::string block;  // "depth", "pose" or "explainability"
  std::size_t sampled = 0;
  double max_relative_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  LossTerm term = LossTerm::total;
  std::vector<BlockCheck> blocks;
  bool pass = false;
};

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  std::size_t samples_per_block = 200;
  double corrupt_factor = 1.0;  // != 1 scales the analytic gradient (harness sensitivity test)
};

// Central differences on a seeded random subsample of each parameter block the term depends on.
// Blocks with fewer parameters than samples_per_block are checked exhaustively. Throws
// EvaluationError if the loss is non-finite.
GradCheckReport grad_check(LossTerm term, const ObjectiveContext& ctx, const SnippetState& state,
                           std::uint64_t seed, const GradCheckOptions& options = {});

struct GradCheckProblem {
  ObjectiveContext context;
  SnippetState state;
};

// Random small snippet whose warp coordinates sit at least `margin` pixels from integer grid
// lines at every scale, and whose photometric residuals and inertia statistics stay clear of
// their kinks. Depths are re-drawn pixel by pixel until the conditions hold.
GradCheckProblem make_gradcheck_problem(std::uint64_t seed, int width = 16, int height = 8,
                                        int frames = 6, double margin = 0.05);

// Runs grad_check for every term over as many independent problems (seeds seed, seed+1, ...) as
// needed for each block to reach min_samples checked parameters; blocks are merged by name.
std::vector<GradCheckReport> grad_check_suite(std::uint64_t seed, const GradCheckOptions& options = {},
                                              std::size_t min_samples = 200);

}  // namespace idvo

#endif  // IDVO_OBJECTIVE_HPP
