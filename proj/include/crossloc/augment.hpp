#pragma once

#include <array>

#include "crossloc/image.hpp"
#include "crossloc/point_cloud.hpp"
#include "crossloc/rng.hpp"

namespace crossloc {

// Sampling ranges for training-time augmentation. Every range is a maximum
// magnitude; draws are uniform in [-range, +range] (factors in
// [1 - range, 1 + range] for the color jitters).
struct AugmentConfig {
  double brightness_jitter = 0.2;
  double contrast_jitter = 0.2;
  double saturation_jitter = 0.2;
  double hue_shift = 0.05;  // fraction of a full hue cycle
  double image_rotation_deg = 5.0;
  double image_shift_frac = 0.10;
  double cloud_translation_m = 1.5;
  double cloud_yaw_deg = 10.0;
  double cloud_pitch_roll_deg = 2.0;
  double mirror_probability = 0.5;
  std::uint64_t seed = 0;
};

// Throws ConfigError when a range is negative or the mirror probability is
// outside [0, 1].
void validate_augment_config(const AugmentConfig& cfg);

// Brightness, contrast, saturation, then hue rotation, each drawn uniformly
// within the config ranges, output clamped to [0, 1]. A zero range leaves
// the corresponding transform out entirely so the identity is bit exact.
Image jitter_image(const Image& img, const AugmentConfig& cfg, Rng& rng);

// The same four color transforms with explicit parameters, applied in the
// fixed order brightness, contrast, saturation, hue. Factors of exactly 1
// and a zero hue shift are bit-exact no-ops.
Image apply_color_jitter(const Image& img, double brightness, double contrast,
                         double saturation, double hue_shift);

// Rotation about the image center followed by a translation in fractions of
// the image size, bilinear sampling, black outside the source frame. The
// warp is skipped when rotation and shift are all zero. Throws ConfigError
// when |rotation| > 45 deg or a shift component exceeds 0.5.
Image warp_image(const Image& img, double rotation_deg, double dx_frac,
                 double dy_frac);

// Rigid body transform p' = R(yaw, pitch, roll) * p + t with composition
// order Rz * Ry * Rx.
PointCloud transform_cloud(const PointCloud& pc,
                           const std::array<double, 3>& translation,
                           double yaw, double pitch, double roll);

// Couples the left-right image flip with the corresponding cloud reflection
// (y -> -y in the vehicle frame). Applying it twice restores the input.
void mirror_pair(Image& img, PointCloud& pc);

// Magnitudes drawn for one augment_pair call, kept for inspection so bound
// properties can be checked without re-deriving the RNG stream.
struct AugmentDraws {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue_shift = 0.0;
  double rotation_deg = 0.0;
  double shift_x_frac = 0.0;
  double shift_y_frac = 0.0;
  std::array<double, 3> cloud_translation_m = {0.0, 0.0, 0.0};
  double cloud_yaw_deg = 0.0;
  double cloud_pitch_deg = 0.0;
  double cloud_roll_deg = 0.0;
};

struct AugmentResult {
  Image image;
  PointCloud cloud;
  bool mirrored = false;
  AugmentDraws draws;
};

// Full per-sample pipeline: one draw decides mirroring of both media, then
// the image jitter and warp and the cloud rigid transform are sampled within
// the config ranges. Draw order is fixed so a seed fully determines the
// result.
AugmentResult augment_pair(const Image& img, const PointCloud& pc,
                           const AugmentConfig& cfg, Rng& rng);

}  // namespace crossloc
