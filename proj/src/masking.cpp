#include "idvo/masking.hpp"

#include <algorithm>
#include <cmath>

#include "idvo/png_io.hpp"

namespace idvo {

ExplainabilityField::ExplainabilityField(Eigen::Index rows, Eigen::Index cols,
                                         double initial_logit)
    : logits_(Image::Constant(rows, cols, initial_logit)) {}

ExplainabilityField::ExplainabilityField(Image logits) : logits_(std::move(logits)) {}

Image ExplainabilityField::values() const {
  return logits_.unaryExpr([](double x) { return logistic(x); });
}

double steering_rate(const Pose6DoF& relative) {
  // Rotation angle about the camera y axis, read from the rotated optical axis.
  const Eigen::Vector3d forward = relative.rotation().col(2);
  return -std::atan2(forward.x(), forward.z());
}

HardEdgeMask build_dhem(double speed, double yaw_rate, const CameraIntrinsics& k,
                        const DhemParams& params) {
  return build_dhem(speed, yaw_rate, k.width, k.height, params);
}

HardEdgeMask build_dhem(double speed, double yaw_rate, int width, int height,
                        const DhemParams& params) {
  if (!(speed >= 0.0)) throw DomainError("build_dhem: speed must be non-negative");
  if (width <= 0 || height <= 0) throw DimensionError("build_dhem: empty mask");

  HardEdgeMask mask;
  if (params.enabled) {
    const auto band = [&](double fraction, int dim) {
      const double cap = std::floor(params.max_fraction * dim);
      return int(std::clamp(std::round(fraction * dim), 0.0, cap));
    };
    const double base = params.speed_gain * speed;
    mask.widths.top = band(base, height);
    mask.widths.bottom = mask.widths.top;
    mask.widths.left = band(base + params.steering_gain * std::max(0.0, -yaw_rate), width);
    mask.widths.right = band(base + params.steering_gain * std::max(0.0, yaw_rate), width);
  }

  mask.grid = Image::Ones(height, width);
  const EdgeWidths& w = mask.widths;
  mask.grid.topRows(w.top).setZero();
  mask.grid.bottomRows(w.bottom).setZero();
  mask.grid.leftCols(w.left).setZero();
  mask.grid.rightCols(w.right).setZero();
  return mask;
}

CombinedMask combine(const HardEdgeMask& hard, const ExplainabilityField& soft) {
  if (hard.grid.rows() != soft.rows() || hard.grid.cols() != soft.cols()) {
    throw DimensionError("combine: hard and soft masks differ in shape");
  }
  return {hard.grid * soft.values()};
}

MaskLoss mask_loss(const ExplainabilityField& soft) { return mask_loss(soft, 1); }

MaskLoss mask_loss(const ExplainabilityField& soft, int factor) {
  return mask_loss(soft, factor, Image::Ones(soft.values().rows(), soft.values().cols()));
}

MaskLoss mask_loss(const ExplainabilityField& soft, int factor, const Image& support) {
  const Image values = soft.values();
  if (support.rows() != values.rows() || support.cols() != values.cols()) {
    throw DimensionError("mask_loss: support and mask differ in shape");
  }
  const Image coarse = downsample(values, factor);
  const Image weight = min_pool(support, factor);
  const double n = double(coarse.size());
  MaskLoss out;
  // -log(logistic(x)) = log1p(exp(-x)), evaluated stably at full resolution.
  if (factor == 1) {
    out.value = (weight * soft.logits().unaryExpr([](double x) {
                   return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
                 })).sum() /
                n;
    out.grad_logits = weight * (values - 1.0) / n;
    return out;
  }
  out.value = -(weight * coarse.log()).sum() / n;
  const Image g_coarse = -weight / (coarse * n);
  out.grad_logits = downsample_adjoint(g_coarse, factor) * values * (1.0 - values);
  return out;
}

void write_mask_png(const std::string& path, const Image& mask) {
  write_png_gray(path, mask.cwiseMax(0.0).cwiseMin(1.0));
}

}  // namespace idvo
