#include "idvo/image.hpp"

#include <algorithm>
#include <vector>

namespace idvo {

namespace {

struct Tap {
  Eigen::Index index;
  double weight;
};

// Coverage weights of each output cell over the input axis, normalized per output cell.
std::vector<std::vector<Tap>> area_taps(Eigen::Index in_size, Eigen::Index out_size) {
  std::vector<std::vector<Tap>> taps(out_size);
  const double scale = double(in_size) / double(out_size);
  for (Eigen::Index o = 0; o < out_size; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    for (auto i = Eigen::Index(lo); i < in_size && double(i) < hi; ++i) {
      const double w = std::min(hi, double(i + 1)) - std::max(lo, double(i));
      if (w > 0.0) taps[o].push_back({i, w / scale});
    }
  }
  return taps;
}

}  // namespace

Image resize_area(const Image& img, Eigen::Index width, Eigen::Index height) {
  if (width <= 0 || height <= 0 || img.size() == 0) {
    throw DimensionError("resize_area: empty source or target");
  }
  if (width == img.cols() && height == img.rows()) return img;
  const auto col_taps = area_taps(img.cols(), width);
  const auto row_taps = area_taps(img.rows(), height);
  Image horizontal = Image::Zero(img.rows(), width);
  for (Eigen::Index c = 0; c < width; ++c) {
    for (const Tap& t : col_taps[c]) horizontal.col(c) += t.weight * img.col(t.index);
  }
  Image out = Image::Zero(height, width);
  for (Eigen::Index r = 0; r < height; ++r) {
    for (const Tap& t : row_taps[r]) out.row(r) += t.weight * horizontal.row(t.index);
  }
  return out;
}

}  // namespace idvo
