#ifndef IDVO_IMAGE_HPP
#define IDVO_IMAGE_HPP

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "idvo/errors.hpp"

namespace idvo {

// Dense single-channel grid, rows = image height (v), cols = image width (u).
template <typename Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = ImageT<double>;

inline bool is_valid_scale_factor(int factor) {
  return factor == 1 || factor == 2 || factor == 4 || factor == 8;
}

namespace detail {
inline void check_divisible(Eigen::Index rows, Eigen::Index cols, int factor) {
  if (!is_valid_scale_factor(factor)) {
    throw DimensionError("scale factor must be one of 1, 2, 4, 8; got " + std::to_string(factor));
  }
  if (rows % factor != 0 || cols % factor != 0) {
    throw DimensionError("image " + std::to_string(cols) + "x" + std::to_string(rows) +
                         " is not divisible by factor " + std::to_string(factor));
  }
}
}  // namespace detail

// Non-overlapping box average.
template <typename Derived>
ImageT<typename Derived::Scalar> downsample(const Eigen::ArrayBase<Derived>& img, int factor) {
  using Scalar = typename Derived::Scalar;
  detail::check_divisible(img.rows(), img.cols(), factor);
  if (factor == 1) return img;
  const Eigen::Index rows = img.rows() / factor;
  const Eigen::Index cols = img.cols() / factor;
  const Scalar inv_area = Scalar(1) / Scalar(factor * factor);
  ImageT<Scalar> out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = img.derived().block(r * factor, c * factor, factor, factor).sum() * inv_area;
    }
  }
  return out;
}

// Adjoint of downsample: spreads each coarse value over its factor x factor block, divided by
// the block area. Maps a gradient w.r.t. the coarse grid to a gradient w.r.t. the fine grid.
template <typename Derived>
ImageT<typename Derived::Scalar> downsample_adjoint(const Eigen::ArrayBase<Derived>& coarse,
                                                    int factor) {
  using Scalar = typename Derived::Scalar;
  if (!is_valid_scale_factor(factor)) {
    throw DimensionError("scale factor must be one of 1, 2, 4, 8");
  }
  if (factor == 1) return coarse;
  const Scalar inv_area = Scalar(1) / Scalar(factor * factor);
  ImageT<Scalar> out(coarse.rows() * factor, coarse.cols() * factor);
  for (Eigen::Index r = 0; r < coarse.rows(); ++r) {
    for (Eigen::Index c = 0; c < coarse.cols(); ++c) {
      out.block(r * factor, c * factor, factor, factor).setConstant(coarse(r, c) * inv_area);
    }
  }
  return out;
}

// Non-overlapping minimum. Used for binary masks, where any blocked fine pixel blocks the
// coarse pixel.
template <typename Derived>
ImageT<typename Derived::Scalar> min_pool(const Eigen::ArrayBase<Derived>& img, int factor) {
  using Scalar = typename Derived::Scalar;
  detail::check_divisible(img.rows(), img.cols(), factor);
  if (factor == 1) return img;
  ImageT<Scalar> out(img.rows() / factor, img.cols() / factor);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      out(r, c) = img.derived().block(r * factor, c * factor, factor, factor).minCoeff();
    }
  }
  return out;
}

// Area-weighted resampling to an arbitrary size (box filter with fractional coverage).
Image resize_area(const Image& img, Eigen::Index width, Eigen::Index height);

template <typename Scalar>
Scalar logistic(Scalar x) {
  using std::exp;
  return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-x)) : exp(x) / (Scalar(1) + exp(x));
}

}  // namespace idvo

#endif  // IDVO_IMAGE_HPP
