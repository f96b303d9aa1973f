#ifndef IDVO_MASKING_HPP
#define IDVO_MASKING_HPP

#include <string>

#include "idvo/geometry.hpp"
#include "idvo/image.hpp"

namespace idvo {

struct DhemParams {
  double speed_gain = 0.02;     // band width as a fraction of the dimension, per unit speed
  double steering_gain = 0.5;   // extra side width fraction per radian-per-frame of steering
  double max_fraction = 0.25;   // cap on each band, fraction of its dimension
  bool enabled = true;          // false forces all widths to 0
};

struct EdgeWidths {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;

  bool operator==(const EdgeWidths&) const = default;
};

// Binary border mask: 0 on the border bands, 1 elsewhere.
struct HardEdgeMask {
  Image grid;
  EdgeWidths widths;
};

// Soft per-pixel weights parameterized by logits; values = logistic(logits) in (0, 1).
class ExplainabilityField {
 public:
  ExplainabilityField() = default;
  ExplainabilityField(Eigen::Index rows, Eigen::Index cols, double initial_logit = 3.0);
  explicit ExplainabilityField(Image logits);

  const Image& logits() const { return logits_; }
  Image& logits() { return logits_; }
  Image values() const;

  Eigen::Index rows() const { return logits_.rows(); }
  Eigen::Index cols() const { return logits_.cols(); }

 private:
  Image logits_;
};

struct CombinedMask {
  Image grid;
};

// Heading change between two frames used to widen one side band, positive for a left turn.
// With the camera y axis pointing down, a left turn is a negative rotation about +y.
double steering_rate(const Pose6DoF& relative);

// Band widths grow linearly with speed (scene units per frame); the steering term widens the
// side that content leaves through: right for positive (left-turn) rates, left for negative.
// Throws DomainError for negative speed.
HardEdgeMask build_dhem(double speed, double yaw_rate, const CameraIntrinsics& k,
                        const DhemParams& params);
HardEdgeMask build_dhem(double speed, double yaw_rate, int width, int height,
                        const DhemParams& params);

CombinedMask combine(const HardEdgeMask& hard, const ExplainabilityField& soft);

struct MaskLoss {
  double value = 0.0;
  Image grad_logits;
};

// Binary cross-entropy against an all-ones target: mean of -log(values).
MaskLoss mask_loss(const ExplainabilityField& soft);

// Same loss evaluated on box-downsampled mask values; gradient still w.r.t. full-res logits.
MaskLoss mask_loss(const ExplainabilityField& soft, int factor);

// Pixels where min_pool(support, factor) is 0 contribute nothing; the mean still runs over
// every coarse pixel. The objective passes the hard mask here.
MaskLoss mask_loss(const ExplainabilityField& soft, int factor, const Image& support);

// 8-bit preview: hard masks map to 0/255, soft grids are scaled by 255 and rounded.
void write_mask_png(const std::string& path, const Image& mask);

}  // namespace idvo

#endif  // IDVO_MASKING_HPP
