#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crossloc/dataset.hpp"
#include "crossloc/rng.hpp"

namespace crossloc {

// Procedural paired-observation world: P places on a closed loop, each with
// an 8-dim latent that drives both the image texture and the landmark
// layout, so the two media of one place share all their information.
struct SyntheticWorld {
  std::uint64_t seed = 0;
  int places = 0;
  double circumference = 0.0;
  std::vector<std::array<double, 8>> latents;
  std::vector<Pose> positions;  // place pose, x axis along the loop heading
};

// Deterministic world on a loop of circumference 30 * P meters. Adjacent
// places sit one chord (just under 30 m) apart, so distinct places are
// always farther than the 20 m same-place radius. Throws ConfigError for
// P < 8.
SyntheticWorld generate_world(std::uint64_t seed, int places);

// 64 x 48 x 3 procedural texture: per channel a sum of 4 sinusoids whose
// amplitudes, frequencies, and phases are fixed affine functions of the
// place latent. The planar pose jitter (meters) shifts the phases
// proportionally; Gaussian pixel noise sigma = 0.02 * noise_mult is added
// and the result clamped to [0, 1]. Zero noise_mult leaves the generator
// untouched, making the canonical image a pure function of the place.
Image render_image(const SyntheticWorld& world, int place, double jitter_x,
                   double jitter_y, Rng& rng, double noise_mult = 1.0);

// 256 points drawn from isotropic Gaussians (sigma 0.5 m, offsets clipped
// at 3 sigma) around 12 landmarks hashed from the place latent into the
// inner +-23.5 m box with heights in [0, 8] m. The cloud is expressed in
// the frame of the jittered pose (planar offset plus yaw error), mimicking
// a sub-map extracted at the run pose rather than the canonical place pose.
PointCloud sample_cloud(const SyntheticWorld& world, int place, double jitter_x,
                        double jitter_y, double jitter_yaw, Rng& rng,
                        double noise_mult = 1.0);

// Canonical landmark centers of a place, in the place frame.
std::vector<std::array<double, 3>> place_landmarks(const SyntheticWorld& world,
                                                   int place);

// n_runs traversals of the loop, one sample per place, with pose noise
// sigma = 1 m, yaw noise sigma = 0.03 rad, and a per-run condition tag
// cycling through preset noise multipliers. Media are kept in memory with
// relative paths already filled in, ready for export_runs. Throws
// ConfigError for n_runs < 2. Fully deterministic given (world, n_runs).
std::vector<LoadedRun> generate_runs(const SyntheticWorld& world, int n_runs);

// True place index behind a generated sample id (the label oracle).
int place_of_sample(std::uint64_t sample_id);

// Writes one directory per run (manifest.txt plus images/ and clouds/),
// a regions.json with full-coverage train and validation regions, and
// labels.txt mapping sample ids to true place indices.
void export_runs(const std::vector<LoadedRun>& runs,
                 const SyntheticWorld& world, const std::string& out_dir);

}  // namespace crossloc
