#include "crossloc/point_cloud.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "crossloc/errors.hpp"
#include "crossloc/rng.hpp"

namespace crossloc {

void validate_cloud(const PointCloud& pc) {
  for (const auto& p : pc.points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      throw DataError("point cloud contains non-finite coordinates");
    }
  }
}

PointCloud transform_points(const PointCloud& pc, const Mat3& rotation,
                            const std::array<double, 3>& translation) {
  PointCloud out;
  out.points.reserve(pc.size());
  for (const auto& p : pc.points) {
    auto q = apply_mat3(rotation, p);
    out.points.push_back(
        {q[0] + translation[0], q[1] + translation[1], q[2] + translation[2]});
  }
  return out;
}

namespace {

constexpr int kRansacIterations = 100;
constexpr double kInlierThreshold = 0.3;
constexpr double kMinNormalZ = 0.9;

// Removes inliers of the best near-horizontal RANSAC plane. Returns the
// input unchanged when no acceptable plane is found or the cloud is too
// small to fit one.
PointCloud remove_ground_plane(const PointCloud& pc) {
  const std::size_t n = pc.size();
  if (n < 3) return pc;
  // A fixed seed keeps sub-map extraction reproducible across runs.
  Rng rng(0x9e3779b97f4a7c15ULL);
  double best_normal[3] = {0, 0, 0};
  double best_d = 0.0;
  std::size_t best_inliers = 0;
  for (int it = 0; it < kRansacIterations; ++it) {
    const std::size_t ia = rng.uniform_index(n);
    const std::size_t ib = rng.uniform_index(n);
    const std::size_t ic = rng.uniform_index(n);
    if (ia == ib || ia == ic || ib == ic) continue;
    const auto& a = pc.points[ia];
    const auto& b = pc.points[ib];
    const auto& c = pc.points[ic];
    const double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const double v[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    double nrm[3] = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                     u[0] * v[1] - u[1] * v[0]};
    const double len = std::sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
    if (len < 1e-12) continue;
    for (double& x : nrm) x /= len;
    if (std::abs(nrm[2]) <= kMinNormalZ) continue;
    const double d = nrm[0] * a[0] + nrm[1] * a[1] + nrm[2] * a[2];
    std::size_t inliers = 0;
    for (const auto& p : pc.points) {
      const double dist = std::abs(nrm[0] * p[0] + nrm[1] * p[1] + nrm[2] * p[2] - d);
      if (dist <= kInlierThreshold) ++inliers;
    }
    if (inliers > best_inliers) {
      best_inliers = inliers;
      best_normal[0] = nrm[0];
      best_normal[1] = nrm[1];
      best_normal[2] = nrm[2];
      best_d = d;
    }
  }
  if (best_inliers == 0) return pc;
  PointCloud out;
  out.points.reserve(n - best_inliers);
  for (const auto& p : pc.points) {
    const double dist = std::abs(best_normal[0] * p[0] + best_normal[1] * p[1] +
                                 best_normal[2] * p[2] - best_d);
    if (dist > kInlierThreshold) out.points.push_back(p);
  }
  return out;
}

}  // namespace

PointCloud extract_submap(const PointCloud& map, const Pose& center,
                          double half_extent_m, bool remove_ground) {
  if (map.empty()) throw DataError("cannot extract sub-map from an empty map");
  if (half_extent_m <= 0.0) {
    throw ConfigError("sub-map half extent must be positive");
  }
  // World to local: undo the translation, then the heading. Only yaw is
  // compensated so the box stays gravity aligned.
  const Mat3 world_to_local = rotation_zyx(-center.yaw, 0.0, 0.0);
  PointCloud cropped;
  for (const auto& p : map.points) {
    const std::array<double, 3> rel = {p[0] - center.x, p[1] - center.y,
                                       p[2] - center.z};
    const auto q = apply_mat3(world_to_local, rel);
    if (std::abs(q[0]) <= half_extent_m && std::abs(q[1]) <= half_extent_m &&
        std::abs(q[2]) <= half_extent_m) {
      cropped.points.push_back(q);
    }
  }
  if (cropped.empty()) {
    throw DataError("sub-map is empty: no map points within range of the pose");
  }
  if (!remove_ground) return cropped;
  PointCloud result = remove_ground_plane(cropped);
  if (result.empty()) {
    throw DataError("sub-map is empty after ground removal");
  }
  return result;
}

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (f.gcount() != 4) throw DataError("truncated cloud file: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_pcl(const PointCloud& pc, const std::string& path) {
  validate_cloud(pc);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open cloud file for writing: " + path);
  f.write("PCL1", 4);
  put_u32(f, static_cast<std::uint32_t>(pc.size()));
  std::vector<float> raw;
  raw.reserve(pc.size() * 3);
  for (const auto& p : pc.points) {
    raw.push_back(static_cast<float>(p[0]));
    raw.push_back(static_cast<float>(p[1]));
    raw.push_back(static_cast<float>(p[2]));
  }
  f.write(reinterpret_cast<const char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!f) throw DataError("failed writing cloud file: " + path);
}

PointCloud read_pcl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open cloud file: " + path);
  char magic[4];
  f.read(magic, 4);
  if (f.gcount() != 4 || std::memcmp(magic, "PCL1", 4) != 0) {
    throw DataError("bad cloud file magic (expected PCL1): " + path);
  }
  const std::uint32_t count = get_u32(f, path);
  std::vector<float> raw(static_cast<std::size_t>(count) * 3);
  f.read(reinterpret_cast<char*>(raw.data()),
         static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float))) {
    throw DataError("truncated cloud file: " + path);
  }
  PointCloud pc;
  pc.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    pc.points.push_back({static_cast<double>(raw[3 * i]),
                         static_cast<double>(raw[3 * i + 1]),
                         static_cast<double>(raw[3 * i + 2])});
  }
  validate_cloud(pc);
  return pc;
}

}  // namespace crossloc
