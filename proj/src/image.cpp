#include "crossloc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "crossloc/errors.hpp"

namespace crossloc {

Image::Image(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ConfigError("image dimensions must be positive");
  pixels.assign(static_cast<std::size_t>(w) * h * 3, 0.0);
}

double& Image::at(int row, int col, int channel) {
  return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + channel];
}

double Image::at(int row, int col, int channel) const {
  return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + channel];
}

void validate_image(const Image& img) {
  if (img.width <= 0 || img.height <= 0) {
    throw DataError("image has non-positive dimensions");
  }
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw DataError("image pixel buffer size does not match dimensions");
  }
  for (double v : img.pixels) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError("image channel value outside [0, 1]");
    }
  }
}

Image resize_image(const Image& img, int new_width, int new_height) {
  if (new_width <= 0 || new_height <= 0) {
    throw ConfigError("resize target dimensions must be positive");
  }
  if (new_width == img.width && new_height == img.height) return img;
  Image out(new_width, new_height);
  const double sx = static_cast<double>(img.width) / new_width;
  const double sy = static_cast<double>(img.height) / new_height;
  for (int r = 0; r < new_height; ++r) {
    // Sample at the center of each destination pixel.
    double fy = (r + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int c = 0; c < new_width; ++c) {
      double fx = (c + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = img.at(y0, x0, ch) * (1.0 - wx) + img.at(y0, x1, ch) * wx;
        const double bot = img.at(y1, x0, ch) * (1.0 - wx) + img.at(y1, x1, ch) * wx;
        out.at(r, c, ch) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

void write_ppm(const Image& img, const std::string& path) {
  validate_image(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open image file for writing: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    raw[i] = static_cast<unsigned char>(
        std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
  }
  f.write(reinterpret_cast<const char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!f) throw DataError("failed writing image file: " + path);
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_ppm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open image file: " + path);
  if (next_ppm_token(f) != "P6") {
    throw DataError("not a binary PPM (P6) file: " + path);
  }
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_ppm_token(f));
    height = std::stoi(next_ppm_token(f));
    maxval = std::stoi(next_ppm_token(f));
  } catch (const std::exception&) {
    throw DataError("malformed PPM header: " + path);
  }
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw DataError("unsupported PPM dimensions or maxval: " + path);
  }
  Image img(width, height);
  std::vector<unsigned char> raw(img.pixels.size());
  f.read(reinterpret_cast<char*>(raw.data()),
         static_cast<std::streamsize>(raw.size()));
  if (f.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw DataError("truncated PPM pixel data: " + path);
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.pixels[i] = raw[i] / 255.0;
  }
  return img;
}

}  // namespace crossloc
