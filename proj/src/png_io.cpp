#include "idvo/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <vector>

namespace idvo {

Image read_png_gray(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw LoadError("cannot read PNG '" + path + "': " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw LoadError("cannot decode PNG '" + path + "': " + msg);
  }
  Image out(image.height, image.width);
  for (png_uint_32 r = 0; r < image.height; ++r) {
    for (png_uint_32 c = 0; c < image.width; ++c) {
      const png_byte* px = &buffer[(std::size_t(r) * image.width + c) * channels];
      double sum = 0.0;
      for (int ch = 0; ch < channels; ++ch) sum += px[ch];
      out(r, c) = sum / (255.0 * channels);
    }
  }
  return out;
}

void write_png_gray(const std::string& path, const Image& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(img.cols());
  image.height = png_uint_32(img.rows());
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(std::size_t(img.size()));
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      const double v = std::clamp(img(r, c), 0.0, 1.0);
      buffer[std::size_t(r * img.cols() + c)] = png_byte(std::lround(v * 255.0));
    }
  }
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw LoadError("cannot write PNG '" + path + "': " + image.message);
  }
}

}  // namespace idvo
