#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace crossloc {

// Dense RGB raster. Channel values are real numbers in [0, 1] stored row
// major as height x width x 3.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h);

  double& at(int row, int col, int channel);
  double at(int row, int col, int channel) const;
  std::size_t size() const { return pixels.size(); }
};

// Validates dimensions and channel range. Throws DataError on violation.
void validate_image(const Image& img);

// Bilinear resize to the requested dimensions. Throws ConfigError when the
// target dimensions are not positive.
Image resize_image(const Image& img, int new_width, int new_height);

// Binary PPM (P6, maxval 255) round trip. Channel values are quantized to
// 8 bits on write. read_ppm throws DataError on malformed files.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

}  // namespace crossloc
