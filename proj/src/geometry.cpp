#include "crossloc/geometry.hpp"

#include <cmath>

#include "crossloc/errors.hpp"

namespace crossloc {

double normalize_angle(double radians) {
  constexpr double kTwoPi = 2.0 * M_PI;
  double a = std::fmod(radians, kTwoPi);
  if (a <= -M_PI) a += kTwoPi;
  if (a > M_PI) a -= kTwoPi;
  return a;
}

Pose make_pose(double x, double y, double z, double yaw, double pitch,
               double roll, std::uint64_t timestamp) {
  for (double v : {x, y, z, yaw, pitch, roll}) {
    if (!std::isfinite(v)) throw ConfigError("pose fields must be finite");
  }
  Pose p;
  p.x = x;
  p.y = y;
  p.z = z;
  p.yaw = normalize_angle(yaw);
  p.pitch = normalize_angle(pitch);
  p.roll = normalize_angle(roll);
  p.timestamp = timestamp;
  return p;
}

double place_distance(const Pose& a, const Pose& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

bool is_same_place(const Pose& a, const Pose& b, double threshold_m) {
  if (threshold_m <= 0.0) {
    throw ConfigError("same-place threshold must be positive");
  }
  return place_distance(a, b) < threshold_m;
}

Mat3 rotation_zyx(double yaw, double pitch, double roll) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  // R = Rz(yaw) * Ry(pitch) * Rx(roll), row major.
  return Mat3{cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
              sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
              -sp,     cp * sr,                cp * cr};
}

std::array<double, 3> apply_mat3(const Mat3& m, const std::array<double, 3>& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
          m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 transpose3(const Mat3& m) {
  return Mat3{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

}  // namespace crossloc
