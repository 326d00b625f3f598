#pragma once

#include <array>
#include <cstdint>

namespace crossloc {

// Vehicle pose in the map frame. Angles are radians normalized to (-pi, pi],
// timestamp is microseconds since the start of the recording.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  std::uint64_t timestamp = 0;
};

// Maps any finite angle to the equivalent value in (-pi, pi].
double normalize_angle(double radians);

// Returns a Pose with all angles normalized. Throws ConfigError when any
// field is non-finite.
Pose make_pose(double x, double y, double z, double yaw, double pitch,
               double roll, std::uint64_t timestamp);

// Planar (x, y) Euclidean distance in meters. Height is ignored so that two
// traversals of the same street at different sensor heights still match.
double place_distance(const Pose& a, const Pose& b);

// True iff place_distance(a, b) is strictly below the threshold.
// Throws ConfigError when threshold is not positive.
bool is_same_place(const Pose& a, const Pose& b, double threshold_m = 20.0);

// Row-major 3x3 rotation matrix composed as R = Rz(yaw) * Ry(pitch) * Rx(roll).
using Mat3 = std::array<double, 9>;
Mat3 rotation_zyx(double yaw, double pitch, double roll);

// Applies a row-major 3x3 matrix to a vector.
std::array<double, 3> apply_mat3(const Mat3& m, const std::array<double, 3>& v);

// Transpose of a row-major 3x3 matrix (the inverse for rotations).
Mat3 transpose3(const Mat3& m);

}  // namespace crossloc
