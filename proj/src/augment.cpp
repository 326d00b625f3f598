#include "crossloc/augment.hpp"

#include <algorithm>
#include <cmath>

#include "crossloc/errors.hpp"

namespace crossloc {

void validate_augment_config(const AugmentConfig& cfg) {
  const double ranges[] = {cfg.brightness_jitter, cfg.contrast_jitter,
                           cfg.saturation_jitter, cfg.hue_shift,
                           cfg.image_rotation_deg, cfg.image_shift_frac,
                           cfg.cloud_translation_m, cfg.cloud_yaw_deg,
                           cfg.cloud_pitch_roll_deg};
  for (double r : ranges) {
    if (!(r >= 0.0)) throw ConfigError("augmentation ranges must be non-negative");
  }
  if (!(cfg.mirror_probability >= 0.0 && cfg.mirror_probability <= 1.0)) {
    throw ConfigError("mirror probability must lie in [0, 1]");
  }
}

namespace {

constexpr double kDegToRad = M_PI / 180.0;

double luma(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

void apply_brightness(Image& img, double factor) {
  for (double& v : img.pixels) v = std::clamp(v * factor, 0.0, 1.0);
}

void apply_contrast(Image& img, double factor) {
  double mean = 0.0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      mean += luma(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2));
    }
  }
  mean /= static_cast<double>(img.width) * img.height;
  for (double& v : img.pixels) {
    v = std::clamp(mean + factor * (v - mean), 0.0, 1.0);
  }
}

void apply_saturation(Image& img, double factor) {
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double g = luma(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2));
      for (int ch = 0; ch < 3; ++ch) {
        img.at(r, c, ch) = std::clamp(g + factor * (img.at(r, c, ch) - g), 0.0, 1.0);
      }
    }
  }
}

// Rotates hue by `shift` cycles through HSV and back.
void apply_hue(Image& img, double shift) {
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col) {
      const double r = img.at(row, col, 0);
      const double g = img.at(row, col, 1);
      const double b = img.at(row, col, 2);
      const double mx = std::max({r, g, b});
      const double mn = std::min({r, g, b});
      const double delta = mx - mn;
      double h = 0.0;
      if (delta > 0.0) {
        if (mx == r) {
          h = std::fmod((g - b) / delta, 6.0);
        } else if (mx == g) {
          h = (b - r) / delta + 2.0;
        } else {
          h = (r - g) / delta + 4.0;
        }
        h /= 6.0;
        if (h < 0.0) h += 1.0;
      }
      const double s = mx > 0.0 ? delta / mx : 0.0;
      const double v = mx;
      h = std::fmod(h + shift + 1.0, 1.0);
      const double hp = h * 6.0;
      const double c = v * s;
      const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
      const double m = v - c;
      double rp = 0.0, gp = 0.0, bp = 0.0;
      switch (static_cast<int>(hp) % 6) {
        case 0: rp = c; gp = x; break;
        case 1: rp = x; gp = c; break;
        case 2: gp = c; bp = x; break;
        case 3: gp = x; bp = c; break;
        case 4: rp = x; bp = c; break;
        default: rp = c; bp = x; break;
      }
      img.at(row, col, 0) = std::clamp(rp + m, 0.0, 1.0);
      img.at(row, col, 1) = std::clamp(gp + m, 0.0, 1.0);
      img.at(row, col, 2) = std::clamp(bp + m, 0.0, 1.0);
    }
  }
}

}  // namespace

namespace {

// Draws happen unconditionally so the RNG stream does not depend on which
// ranges are zero; transforms with an identity parameter are skipped to
// keep the zero-range path bit exact.
void draw_color_jitter(const AugmentConfig& cfg, Rng& rng, AugmentDraws& d) {
  d.brightness = rng.uniform(1.0 - cfg.brightness_jitter, 1.0 + cfg.brightness_jitter);
  d.contrast = rng.uniform(1.0 - cfg.contrast_jitter, 1.0 + cfg.contrast_jitter);
  d.saturation = rng.uniform(1.0 - cfg.saturation_jitter, 1.0 + cfg.saturation_jitter);
  d.hue_shift = rng.uniform(-cfg.hue_shift, cfg.hue_shift);
}

}  // namespace

Image apply_color_jitter(const Image& img, double brightness, double contrast,
                         double saturation, double hue_shift) {
  Image out = img;
  if (brightness != 1.0) apply_brightness(out, brightness);
  if (contrast != 1.0) apply_contrast(out, contrast);
  if (saturation != 1.0) apply_saturation(out, saturation);
  if (hue_shift != 0.0) apply_hue(out, hue_shift);
  return out;
}

Image jitter_image(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  validate_augment_config(cfg);
  AugmentDraws d;
  draw_color_jitter(cfg, rng, d);
  return apply_color_jitter(img, d.brightness, d.contrast, d.saturation,
                            d.hue_shift);
}

Image warp_image(const Image& img, double rotation_deg, double dx_frac,
                 double dy_frac) {
  if (std::abs(rotation_deg) > 45.0) {
    throw ConfigError("warp rotation must lie in [-45, 45] degrees");
  }
  if (std::abs(dx_frac) > 0.5 || std::abs(dy_frac) > 0.5) {
    throw ConfigError("warp shift fractions must lie in [-0.5, 0.5]");
  }
  if (rotation_deg == 0.0 && dx_frac == 0.0 && dy_frac == 0.0) return img;
  Image out(img.width, img.height);
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  const double dx = dx_frac * img.width;
  const double dy = dy_frac * img.height;
  const double theta = rotation_deg * kDegToRad;
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      // Inverse map: undo the translation, then the rotation about center.
      const double ux = c - dx - cx;
      const double uy = r - dy - cy;
      const double sx = ct * ux + st * uy + cx;
      const double sy = -st * ux + ct * uy + cy;
      if (sx < 0.0 || sy < 0.0 || sx > img.width - 1 || sy > img.height - 1) {
        continue;  // outside the source frame, stays black
      }
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double wx = sx - x0;
      const double wy = sy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = img.at(y0, x0, ch) * (1.0 - wx) + img.at(y0, x1, ch) * wx;
        const double bot = img.at(y1, x0, ch) * (1.0 - wx) + img.at(y1, x1, ch) * wx;
        out.at(r, c, ch) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

PointCloud transform_cloud(const PointCloud& pc,
                           const std::array<double, 3>& translation,
                           double yaw, double pitch, double roll) {
  if (translation[0] == 0.0 && translation[1] == 0.0 && translation[2] == 0.0 &&
      yaw == 0.0 && pitch == 0.0 && roll == 0.0) {
    return pc;
  }
  return transform_points(pc, rotation_zyx(yaw, pitch, roll), translation);
}

void mirror_pair(Image& img, PointCloud& pc) {
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width / 2; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        std::swap(img.at(r, c, ch), img.at(r, img.width - 1 - c, ch));
      }
    }
  }
  for (auto& p : pc.points) p[1] = -p[1];
}

AugmentResult augment_pair(const Image& img, const PointCloud& pc,
                           const AugmentConfig& cfg, Rng& rng) {
  validate_augment_config(cfg);
  AugmentResult res;
  res.image = img;
  res.cloud = pc;
  // One draw governs both media; mirroring comes before everything else.
  res.mirrored = rng.bernoulli(cfg.mirror_probability);
  if (res.mirrored) mirror_pair(res.image, res.cloud);
  AugmentDraws& d = res.draws;
  draw_color_jitter(cfg, rng, d);
  res.image = apply_color_jitter(res.image, d.brightness, d.contrast,
                                 d.saturation, d.hue_shift);
  d.rotation_deg = rng.uniform(-cfg.image_rotation_deg, cfg.image_rotation_deg);
  d.shift_x_frac = rng.uniform(-cfg.image_shift_frac, cfg.image_shift_frac);
  d.shift_y_frac = rng.uniform(-cfg.image_shift_frac, cfg.image_shift_frac);
  res.image = warp_image(res.image, d.rotation_deg, d.shift_x_frac, d.shift_y_frac);
  for (double& t : d.cloud_translation_m) {
    t = rng.uniform(-cfg.cloud_translation_m, cfg.cloud_translation_m);
  }
  d.cloud_yaw_deg = rng.uniform(-cfg.cloud_yaw_deg, cfg.cloud_yaw_deg);
  d.cloud_pitch_deg =
      rng.uniform(-cfg.cloud_pitch_roll_deg, cfg.cloud_pitch_roll_deg);
  d.cloud_roll_deg =
      rng.uniform(-cfg.cloud_pitch_roll_deg, cfg.cloud_pitch_roll_deg);
  res.cloud = transform_cloud(res.cloud, d.cloud_translation_m,
                              d.cloud_yaw_deg * kDegToRad,
                              d.cloud_pitch_deg * kDegToRad,
                              d.cloud_roll_deg * kDegToRad);
  return res;
}

}  // namespace crossloc
