#ifndef IDVO_PNG_IO_HPP
#define IDVO_PNG_IO_HPP

#include <string>

#include "idvo/image.hpp"

namespace idvo {

// Reads an 8-bit PNG as grayscale in [0, 1]. Color images are converted by averaging the
// channels. Throws LoadError on I/O or decode failure.
Image read_png_gray(const std::string& path);

// Writes values in [0, 1] as an 8-bit grayscale PNG (rounded to nearest). Throws LoadError.
void write_png_gray(const std::string& path, const Image& img);

}  // namespace idvo

#endif  // IDVO_PNG_IO_HPP
