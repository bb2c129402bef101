// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace bomi {

using Vec3 = std::array<double, 3>;

inline constexpr int kMaxSensors = 6;
inline constexpr int kMaxClassCount = 9;  // c0 + eight motion classes
inline constexpr int kNeutralClass = 0;
inline constexpr double kDefaultSampleRateHz = 60.0;

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle in degrees into (-180, 180].
inline double wrap_deg(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r <= -180.0) r += 360.0;
  else if (r > 180.0) r -= 360.0;
  return r;
}

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline bool all_finite(const Vec3& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

/// Euler attitude in degrees.
struct Euler {
  double pitch = 0.0;
  double roll = 0.0;
  double yaw = 0.0;

  friend bool operator==(const Euler&, const Euler&) = default;
};

/// One 9-axis reading from one sensor. Units: g, deg/s, normalized gauss.
///
/// `fused` is set only for sources that already carry orientation angles;
/// the fusion stage then passes them through instead of filtering.
struct ImuSample {
  int sensor_id = 1;
  std::int64_t tick = 0;
  Vec3 acc{0.0, 0.0, 1.0};
  Vec3 gyro{0.0, 0.0, 0.0};
  Vec3 mag{1.0, 0.0, 0.0};
  std::optional<Euler> fused;

  friend bool operator==(const ImuSample&, const ImuSample&) = default;
};

/// A class label. 0 is the neutral pose c0.
using MotionLabel = int;

struct SensorInfo {
  int id = 1;
  std::string location;

  friend bool operator==(const SensorInfo&, const SensorInfo&) = default;
};

using SensorLayout = std::vector<SensorInfo>;

inline std::vector<int> sensor_ids(const SensorLayout& layout) {
  std::vector<int> ids;
  ids.reserve(layout.size());
  for (const auto& s : layout) ids.push_back(s.id);
  return ids;
}

}  // namespace bomi
