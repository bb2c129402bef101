// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bomi/bomi.hpp"

namespace bomi::test {

/// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("bomi_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

/// Body-from-world rotation for aerospace ZYX angles, built independently
/// with Eigen: R_world_from_body = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Eigen::Matrix3d world_from_body(double pitch_deg, double roll_deg, double yaw_deg) {
  const double k = M_PI / 180.0;
  return (Eigen::AngleAxisd(yaw_deg * k, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(pitch_deg * k, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll_deg * k, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

inline Vec3 to_vec3(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

/// Gravity and north as seen by a sensor at the given attitude.
inline Vec3 oracle_gravity(double pitch, double roll, double yaw) {
  return to_vec3(world_from_body(pitch, roll, yaw).transpose() * Eigen::Vector3d(0, 0, 1));
}
inline Vec3 oracle_north(double pitch, double roll, double yaw) {
  const double dip = 60.0 * M_PI / 180.0;
  return to_vec3(world_from_body(pitch, roll, yaw).transpose() * Eigen::Vector3d(std::cos(dip), 0, -std::sin(dip)));
}

inline ImuSample static_sample(int sensor, std::int64_t tick, double pitch, double roll, double yaw) {
  ImuSample s;
  s.sensor_id = sensor;
  s.tick = tick;
  s.acc = oracle_gravity(pitch, roll, yaw);
  s.mag = oracle_north(pitch, roll, yaw);
  return s;
}

/// Smallest signed difference between two angles in degrees.
inline double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d < -180.0) d += 360.0;
  return d;
}

/// Builds a single-sensor stream of constant calibrated frames.
inline FrameStream constant_stream(std::size_t n, const std::vector<int>& ids, Euler angles, Vec3 gyro = {0, 0, 0},
                                   MotionLabel label = 0) {
  FrameStream s;
  s.sensor_ids = ids;
  for (std::size_t t = 0; t < n; ++t) {
    s.ticks.push_back(static_cast<std::int64_t>(t));
    s.labels.push_back(label);
    for (std::size_t k = 0; k < ids.size(); ++k) s.data.push_back({angles, gyro});
  }
  return s;
}

/// Small 9-class, 3-sensor session with short runs for fast tests.
inline SynthConfig quick_config(std::uint64_t seed = 42) {
  SynthConfig c;
  c.seed = seed;
  c.run_seconds = 2.0;
  c.neutral_seconds = 2.0;
  c.lead_seconds = 2.0;
  return c;
}

}  // namespace bomi::test
