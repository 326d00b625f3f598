#pragma once

#include <array>
#include <string>
#include <vector>

#include "crossloc/geometry.hpp"

namespace crossloc {

// Unordered 3D point set in meters. Frame semantics are carried by context:
// full maps live in the map frame, sub-maps in the local frame of the sample
// pose (origin at the pose, x along heading).
struct PointCloud {
  std::vector<std::array<double, 3>> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Throws DataError when any coordinate is non-finite.
void validate_cloud(const PointCloud& pc);

// Applies p' = R * p + t to every point.
PointCloud transform_points(const PointCloud& pc, const Mat3& rotation,
                            const std::array<double, 3>& translation);

// Cuts the yaw-aligned box of half side `half_extent_m` centered at `center`
// out of `map` and expresses the surviving points in the local frame of
// `center`. With remove_ground, inliers of the dominant near-horizontal
// RANSAC plane (100 iterations, 0.3 m inlier band, |normal.z| > 0.9) are
// dropped. Throws DataError when the map is empty or the result is empty.
PointCloud extract_submap(const PointCloud& map, const Pose& center,
                          double half_extent_m = 25.0,
                          bool remove_ground = true);

// Flat binary cloud file: magic "PCL1", little-endian uint32 point count,
// then count x 3 little-endian float32 coordinates. read_pcl throws
// DataError on bad magic, truncation, or non-finite coordinates.
void write_pcl(const PointCloud& pc, const std::string& path);
PointCloud read_pcl(const std::string& path);

}  // namespace crossloc
