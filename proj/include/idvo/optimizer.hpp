#ifndef IDVO_OPTIMIZER_HPP
#define IDVO_OPTIMIZER_HPP

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "idvo/objective.hpp"

namespace idvo {

struct AdamParams {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  explicit AdamState(Eigen::Index size = 0)
      : m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}
};

// One bias-corrected Adam update. lr_scale, if non-empty, multiplies the learning rate per
// element. Throws DimensionError on size mismatch and EvaluationError on a non-finite gradient
// (parameters and moments are left untouched in that case).
void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, AdamState& state,
               const AdamParams& adam, const Eigen::VectorXd& lr_scale = Eigen::VectorXd());

struct StaticFilterReport {
  std::vector<int> kept;     // indices into the input sequence
  std::vector<int> dropped;
  std::vector<double> score;  // per input frame; mean abs difference to the last kept frame
};

// Drops frames whose mean absolute intensity difference to the previously kept frame, measured
// on 1/8-resolution copies, is below threshold. The first frame is always kept.
StaticFilterReport static_filter(const std::vector<Frame>& frames, double threshold = 0.01);

struct OptimizerConfig {
  AdamParams adam;
  // Per-block learning-rate multipliers.
  double lr_depth = 1.0;
  double lr_pose = 1.0;
  double lr_mask = 1.0;
  int iters = 300;
  int snippet_len = 5;
  LossWeights weights;
  InertiaParams inertia;
  DhemParams dhem;
  int dhem_refresh = 25;
  SourceDirection direction = SourceDirection::both;
  double static_threshold = 0.01;
  double init_depth = 10.0;   // d0
  double init_step = 0.05;    // delta0, forward translation per frame and gauge norm
  double init_mask_logit = 3.0;
  bool fix_gauge = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Constant depth d0, identical forward steps (0, 0, delta0) and mask logits +3.
SnippetState init_state(int frame_count, int width, int height, const OptimizerConfig& config);

struct TraceRow {
  int iteration = 0;
  double inertia = 0.0;
  double rec = 0.0;    // summed over scales
  double ssim = 0.0;
  double align = 0.0;
  double mask = 0.0;
  double total = 0.0;
};

struct OptTrace {
  std::vector<TraceRow> rows;  // loss before each completed update
  double initial_total = 0.0;
  double final_total = 0.0;
  LossBreakdown final_breakdown;  // values only
  bool converged = false;  // final_total <= initial_total
  bool aborted = false;
  std::string message;
  double wall_seconds = 0.0;
};

struct SnippetResult {
  SnippetState state;
  OptTrace trace;
  std::vector<HardEdgeMask> hard_masks;  // last refresh
};

// Runs config.iters Adam steps on the snippet objective. Aborts (trace.aborted, state from the
// last finite evaluation) if the loss or its gradient turns non-finite.
SnippetResult optimize_snippet(const std::vector<Frame>& frames, const CameraIntrinsics& k,
                               const OptimizerConfig& config);

// Flattening used by the optimizer: depth logits, then pose vectors, then mask logits.
Eigen::VectorXd pack_parameters(const SnippetState& state);
void unpack_parameters(const Eigen::VectorXd& flat, SnippetState& state);
Eigen::VectorXd pack_gradient(const LossBreakdown& b);

// Assembles a camera-to-world trajectory from snippets whose windows share `overlap` relative
// poses (snippet i+1 starts snippet_len - 1 - overlap frames after snippet i). Each snippet's
// translations are rescaled to agree with the previous ones on the shared poses, then shared
// estimates are averaged (translation and wrapped Euler angles) and composed from identity.
std::vector<Pose6DoF> chain_snippets(const std::vector<std::vector<Pose6DoF>>& relative, int overlap);
std::vector<Pose6DoF> chain_snippets(const std::vector<SnippetState>& states, int overlap);

}  // namespace idvo

#endif  // IDVO_OPTIMIZER_HPP
