#include "crossloc/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "crossloc/errors.hpp"

namespace crossloc {

SyntheticWorld generate_world(std::uint64_t seed, int places) {
  if (places < 8) {
    throw ConfigError("synthetic world needs at least 8 places, got " +
                      std::to_string(places));
  }
  SyntheticWorld world;
  world.seed = seed;
  world.places = places;
  world.circumference = 30.0 * places;
  const double radius = world.circumference / (2.0 * M_PI);
  Rng rng(Rng::derive_seed(seed, 100));
  for (int p = 0; p < places; ++p) {
    std::array<double, 8> z;
    for (double& v : z) v = rng.normal();
    world.latents.push_back(z);
    const double theta = 2.0 * M_PI * p / places;
    world.positions.push_back(make_pose(radius * std::cos(theta),
                                        radius * std::sin(theta), 0.0,
                                        theta + M_PI / 2.0, 0.0, 0.0,
                                        static_cast<std::uint64_t>(p) * 1000000));
  }
  return world;
}

namespace {

constexpr int kImageW = 64;
constexpr int kImageH = 48;
constexpr int kSinusoids = 4;
constexpr int kLandmarks = 12;
constexpr int kCloudPoints = 256;
constexpr double kPixelNoiseSigma = 0.02;
constexpr double kLandmarkBox = 23.5;
constexpr double kLandmarkSigma = 0.5;
constexpr double kJitterPhaseGain = 0.1;

double hash_unit(std::uint64_t key) {
  // Fixed hash to a double in [-1, 1).
  const std::uint64_t h = Rng::derive_seed(0x7ea5ed0dd01ULL, key);
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

// Fixed unit mixing vector for slot (channel, sinusoid, role). These are
// world-independent constants; place identity enters only through the
// latent they get dotted with.
std::array<double, 8> mix_vector(int channel, int j, int role) {
  std::array<double, 8> m;
  double norm2 = 0.0;
  for (int d = 0; d < 8; ++d) {
    m[d] = hash_unit(static_cast<std::uint64_t>(
        ((channel * kSinusoids + j) * 8 + role) * 8 + d + 1));
    norm2 += m[d] * m[d];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : m) v *= inv;
  return m;
}

double dot8(const std::array<double, 8>& a, const std::array<double, 8>& b) {
  double s = 0.0;
  for (int d = 0; d < 8; ++d) s += a[d] * b[d];
  return s;
}

struct Sinusoid {
  double amp, fx, fy, phase;
};

Sinusoid sinusoid_params(const std::array<double, 8>& z, int channel, int j) {
  Sinusoid s;
  s.amp = 0.15 + 0.08 * dot8(mix_vector(channel, j, 0), z);
  s.fx = 3.0 * dot8(mix_vector(channel, j, 1), z);
  s.fy = 3.0 * dot8(mix_vector(channel, j, 2), z);
  s.phase = M_PI * dot8(mix_vector(channel, j, 3), z);
  return s;
}

std::uint64_t latent_hash(const std::array<double, 8>& z) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : z) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace

Image render_image(const SyntheticWorld& world, int place, double jitter_x,
                   double jitter_y, Rng& rng, double noise_mult) {
  if (place < 0 || place >= world.places) {
    throw ConfigError("place index out of range: " + std::to_string(place));
  }
  const std::array<double, 8>& z = world.latents[place];
  Sinusoid waves[3][kSinusoids];
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < kSinusoids; ++j) {
      waves[c][j] = sinusoid_params(z, c, j);
    }
  }
  Image img(kImageW, kImageH);
  for (int y = 0; y < kImageH; ++y) {
    const double v = static_cast<double>(y) / kImageH;
    for (int x = 0; x < kImageW; ++x) {
      const double u = static_cast<double>(x) / kImageW;
      for (int c = 0; c < 3; ++c) {
        double value = 0.5;
        for (int j = 0; j < kSinusoids; ++j) {
          const Sinusoid& s = waves[c][j];
          const double phase =
              2.0 * M_PI * (s.fx * u + s.fy * v) + s.phase +
              kJitterPhaseGain * (s.fx * jitter_x + s.fy * jitter_y);
          value += s.amp * std::sin(phase);
        }
        if (noise_mult != 0.0) {
          value += kPixelNoiseSigma * noise_mult * rng.normal();
        }
        img.at(y, x, c) = std::clamp(value, 0.0, 1.0);
      }
    }
  }
  return img;
}

std::vector<std::array<double, 3>> place_landmarks(const SyntheticWorld& world,
                                                   int place) {
  if (place < 0 || place >= world.places) {
    throw ConfigError("place index out of range: " + std::to_string(place));
  }
  const std::uint64_t h = latent_hash(world.latents[place]);
  Rng rng(h);
  std::vector<std::array<double, 3>> landmarks;
  landmarks.reserve(kLandmarks);
  for (int l = 0; l < kLandmarks; ++l) {
    landmarks.push_back({rng.uniform(-kLandmarkBox, kLandmarkBox),
                         rng.uniform(-kLandmarkBox, kLandmarkBox),
                         rng.uniform(0.0, 8.0)});
  }
  return landmarks;
}

PointCloud sample_cloud(const SyntheticWorld& world, int place, double jitter_x,
                        double jitter_y, double jitter_yaw, Rng& rng,
                        double noise_mult) {
  const auto landmarks = place_landmarks(world, place);
  // The sample frame differs from the place frame by the pose error, so the
  // cloud is what a sub-map extractor at the noisy pose would see.
  const Mat3 to_sample = rotation_zyx(-jitter_yaw, 0.0, 0.0);
  PointCloud pc;
  pc.points.reserve(kCloudPoints);
  for (int i = 0; i < kCloudPoints; ++i) {
    const auto& c = landmarks[rng.uniform_index(kLandmarks)];
    std::array<double, 3> p;
    for (int d = 0; d < 3; ++d) {
      const double off = std::clamp(kLandmarkSigma * rng.normal(),
                                    -3.0 * kLandmarkSigma, 3.0 * kLandmarkSigma);
      p[d] = c[d] + off;
    }
    if (noise_mult != 0.0) {
      for (int d = 0; d < 3; ++d) {
        const double n = std::clamp(0.02 * noise_mult * rng.normal(),
                                    -0.06 * noise_mult, 0.06 * noise_mult);
        p[d] += n;
      }
    }
    p[0] -= jitter_x;
    p[1] -= jitter_y;
    pc.points.push_back(apply_mat3(to_sample, p));
  }
  return pc;
}

namespace {

struct Condition {
  const char* tag;
  double noise_mult;
};

constexpr Condition kConditions[] = {
    {"clear", 1.0}, {"overcast", 1.2}, {"dusk", 1.5}, {"night", 2.0}};

}  // namespace

int place_of_sample(std::uint64_t sample_id) {
  return static_cast<int>(sample_id % 1000000);
}

std::vector<LoadedRun> generate_runs(const SyntheticWorld& world, int n_runs) {
  if (n_runs < 2) {
    throw ConfigError("need at least 2 runs, got " + std::to_string(n_runs));
  }
  std::vector<LoadedRun> runs;
  for (int r = 0; r < n_runs; ++r) {
    Rng rng(Rng::derive_seed(world.seed, 2000 + static_cast<std::uint64_t>(r)));
    const Condition& cond = kConditions[r % 4];
    LoadedRun gen;
    char run_name[16];
    std::snprintf(run_name, sizeof(run_name), "run%02d", r);
    gen.run.run_id = run_name;
    gen.run.condition = cond.tag;
    for (int p = 0; p < world.places; ++p) {
      // Pose noise: 1 m planar sigma, 0.03 rad yaw sigma, clipped at 3 sigma
      // so noisy poses can never alias the 20 m same-place rule.
      const double dx = std::clamp(rng.normal(), -3.0, 3.0);
      const double dy = std::clamp(rng.normal(), -3.0, 3.0);
      const double dyaw = std::clamp(0.03 * rng.normal(), -0.09, 0.09);
      const Pose& canon = world.positions[p];
      Sample meta;
      meta.sample_id = static_cast<std::uint64_t>(r) * 1000000 + p;
      meta.run_id = gen.run.run_id;
      meta.pose = make_pose(canon.x + dx, canon.y + dy, canon.z,
                            canon.yaw + dyaw, 0.0, 0.0, canon.timestamp);
      char media[32];
      std::snprintf(media, sizeof(media), "images/%04d.ppm", p);
      meta.image_path = media;
      std::snprintf(media, sizeof(media), "clouds/%04d.pcl", p);
      meta.submap_path = media;
      LoadedSample sample;
      sample.meta = meta;
      sample.image = render_image(world, p, dx, dy, rng, cond.noise_mult);
      sample.cloud = sample_cloud(world, p, dx, dy, dyaw, rng, cond.noise_mult);
      gen.run.samples.push_back(meta);
      gen.samples.push_back(std::move(sample));
    }
    runs.push_back(std::move(gen));
  }
  return runs;
}

void export_runs(const std::vector<LoadedRun>& runs,
                 const SyntheticWorld& world, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw DataError("cannot create output directory: " + out_dir);
  for (const LoadedRun& gen : runs) {
    const fs::path run_dir = root / gen.run.run_id;
    fs::create_directories(run_dir / "images", ec);
    fs::create_directories(run_dir / "clouds", ec);
    if (ec) throw DataError("cannot create run directory: " + run_dir.string());
    for (const LoadedSample& s : gen.samples) {
      write_ppm(s.image, (run_dir / s.meta.image_path).string());
      write_pcl(s.cloud, (run_dir / s.meta.submap_path).string());
    }
    write_run_manifest(gen.run, (run_dir / "manifest.txt").string());
  }
  // Full-coverage regions: at desk scale every sample participates in both
  // training and validation querying.
  const double radius = world.circumference / (2.0 * M_PI);
  const double bound = radius + 50.0;
  std::vector<Region> regions(2);
  regions[0] = {"train-all", -bound, bound, -bound, bound, "train"};
  regions[1] = {"val-all", -bound, bound, -bound, bound, "validation"};
  write_regions(regions, (root / "regions.json").string());
  std::ofstream lf(root / "labels.txt");
  if (!lf) throw DataError("cannot write labels.txt in " + out_dir);
  for (const LoadedRun& gen : runs) {
    for (const Sample& s : gen.run.samples) {
      lf << s.sample_id << " " << place_of_sample(s.sample_id) << "\n";
    }
  }
}

}  // namespace crossloc
