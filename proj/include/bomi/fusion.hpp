// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "bomi/error.hpp"
#include "bomi/types.hpp"

namespace bomi {

// Attitude conventions (aerospace ZYX): body = Rx(roll)^T Ry(pitch)^T Rz(yaw)^T world.
// The accelerometer reads +1 g along +z when level; magnetic north is world +x.

struct Tilt {
  double pitch = 0.0;
  double roll = 0.0;
};

/// Pitch and roll (degrees) from the gravity vector.
inline Tilt accel_angles(const Vec3& acc) {
  if (!(norm(acc) > 0.0) || !all_finite(acc)) throw AttitudeError("accelerometer vector is zero or non-finite");
  const double pitch = std::atan2(-acc[0], std::sqrt(acc[1] * acc[1] + acc[2] * acc[2]));
  const double roll = std::atan2(acc[1], acc[2]);
  return {rad_to_deg(pitch), rad_to_deg(roll)};
}

/// Tilt-compensated heading in degrees.
inline double mag_yaw(const Vec3& mag, double pitch_deg, double roll_deg) {
  const double n = norm(mag);
  if (!(n > 0.0) || !all_finite(mag)) throw HeadingError("magnetometer vector is zero or non-finite");
  const double mx = mag[0] / n, my = mag[1] / n, mz = mag[2] / n;
  const double cp = std::cos(deg_to_rad(pitch_deg)), sp = std::sin(deg_to_rad(pitch_deg));
  const double cr = std::cos(deg_to_rad(roll_deg)), sr = std::sin(deg_to_rad(roll_deg));
  // Undo roll, then pitch.
  const double y1 = cr * my - sr * mz;
  const double z1 = sr * my + cr * mz;
  const double x_level = cp * mx + sp * z1;
  const double y_level = y1;
  return rad_to_deg(std::atan2(-y_level, x_level));
}

/// Rotates a world-frame vector into the body frame of the given attitude.
inline Vec3 world_to_body(const Euler& att, const Vec3& w) {
  const double cp = std::cos(deg_to_rad(att.pitch)), sp = std::sin(deg_to_rad(att.pitch));
  const double cr = std::cos(deg_to_rad(att.roll)), sr = std::sin(deg_to_rad(att.roll));
  const double cy = std::cos(deg_to_rad(att.yaw)), sy = std::sin(deg_to_rad(att.yaw));
  // Rz^T
  const double x1 = cy * w[0] + sy * w[1];
  const double y1 = -sy * w[0] + cy * w[1];
  const double z1 = w[2];
  // Ry^T
  const double x2 = cp * x1 - sp * z1;
  const double y2 = y1;
  const double z2 = sp * x1 + cp * z1;
  // Rx^T
  return {x2, cr * y2 + sr * z2, -sr * y2 + cr * z2};
}

enum FrameFlag : std::uint32_t {
  kFlagNone = 0,
  kFlagAccelInvalid = 1u << 0,  // pitch/roll held on gyro integration
  kFlagMagInvalid = 1u << 1,    // yaw held on gyro integration
  kFlagGimbalGuard = 1u << 2,   // |pitch| above guard, yaw held on gyro integration
  kFlagGap = 1u << 3,           // repeated frame for a missing sample
  kFlagPrefused = 1u << 4,      // angles taken from the source
};

struct OrientationFrame {
  int sensor_id = 1;
  std::int64_t tick = 0;
  double pitch = 0.0;
  double roll = 0.0;
  double yaw = 0.0;
  std::uint32_t flags = kFlagNone;

  Euler angles() const { return {pitch, roll, yaw}; }
};

struct FusionConfig {
  double alpha = 0.98;
  int calib_ticks = 60;
  double pitch_gimbal_guard_deg = 85.0;
  double sample_rate_hz = kDefaultSampleRateHz;
};

struct FilterState {
  Euler angles;
  double alpha = 0.98;
  double dt = 1.0 / kDefaultSampleRateHz;
  double pitch_gimbal_guard_deg = 85.0;
  bool initialized = false;

  static FilterState from_config(const FusionConfig& cfg) {
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw ValidationError("fusion.alpha must lie in [0,1]");
    if (!(cfg.sample_rate_hz > 0.0)) throw ValidationError("sample rate must be positive");
    FilterState s;
    s.alpha = cfg.alpha;
    s.dt = 1.0 / cfg.sample_rate_hz;
    s.pitch_gimbal_guard_deg = cfg.pitch_gimbal_guard_deg;
    return s;
  }
};

namespace detail {

inline double blend_wrapped(double predicted, double measured, double alpha) {
  return wrap_deg(predicted + (1.0 - alpha) * wrap_deg(measured - predicted));
}

inline double clamp_pitch(double p) { return std::clamp(p, -90.0, 90.0); }

}  // namespace detail

/// One first-order complementary filter update.
///
/// Each angle is blended as alpha * (prev + rate * dt) + (1 - alpha) * measured,
/// taking the shortest path on the circle. Roll pairs with gyro x, pitch with
/// gyro y and yaw with gyro z. The first call bootstraps from the measurement.
inline OrientationFrame complementary_step(FilterState& state, const ImuSample& sample) {
  OrientationFrame out;
  out.sensor_id = sample.sensor_id;
  out.tick = sample.tick;

  if (sample.fused) {
    state.angles = *sample.fused;
    state.initialized = true;
    out.pitch = sample.fused->pitch;
    out.roll = sample.fused->roll;
    out.yaw = sample.fused->yaw;
    out.flags = kFlagPrefused;
    return out;
  }

  const Euler prev = state.angles;
  Euler predicted{prev.pitch + sample.gyro[1] * state.dt, prev.roll + sample.gyro[0] * state.dt,
                  prev.yaw + sample.gyro[2] * state.dt};

  std::optional<Tilt> tilt;
  if (norm(sample.acc) > 0.0 && all_finite(sample.acc)) tilt = accel_angles(sample.acc);
  else out.flags |= kFlagAccelInvalid;

  // Heading needs a tilt estimate; fall back to the prediction if the accel is unusable.
  const double tilt_pitch = tilt ? tilt->pitch : predicted.pitch;
  const double tilt_roll = tilt ? tilt->roll : predicted.roll;
  std::optional<double> heading;
  if (std::abs(tilt_pitch) > state.pitch_gimbal_guard_deg) {
    out.flags |= kFlagGimbalGuard;
  } else if (norm(sample.mag) > 0.0 && all_finite(sample.mag)) {
    heading = mag_yaw(sample.mag, tilt_pitch, tilt_roll);
  } else {
    out.flags |= kFlagMagInvalid;
  }

  if (!state.initialized) {
    state.angles = {tilt ? tilt->pitch : 0.0, tilt ? tilt->roll : 0.0, heading.value_or(0.0)};
    state.initialized = true;
  } else {
    const double a = state.alpha;
    Euler next;
    next.pitch = tilt ? detail::blend_wrapped(predicted.pitch, tilt->pitch, a) : wrap_deg(predicted.pitch);
    next.roll = tilt ? detail::blend_wrapped(predicted.roll, tilt->roll, a) : wrap_deg(predicted.roll);
    next.yaw = heading ? detail::blend_wrapped(predicted.yaw, *heading, a) : wrap_deg(predicted.yaw);
    next.pitch = detail::clamp_pitch(next.pitch);
    state.angles = next;
  }

  out.pitch = state.angles.pitch;
  out.roll = state.angles.roll;
  out.yaw = state.angles.yaw;
  return out;
}

/// Runs a fresh filter over one sensor's sample stream.
inline std::vector<OrientationFrame> fuse_stream(std::span<const ImuSample> samples, const FusionConfig& cfg) {
  FilterState state = FilterState::from_config(cfg);
  std::vector<OrientationFrame> frames;
  frames.reserve(samples.size());
  for (const auto& s : samples) frames.push_back(complementary_step(state, s));
  return frames;
}

/// Per-sensor neutral pose, subtracted from subsequent frames.
using NeutralOffset = std::map<int, Euler>;

namespace detail {

inline double circular_mean_deg(std::span<const double> angles) {
  double s = 0.0, c = 0.0;
  for (double a : angles) {
    s += std::sin(deg_to_rad(a));
    c += std::cos(deg_to_rad(a));
  }
  return wrap_deg(rad_to_deg(std::atan2(s, c)));
}

}  // namespace detail

/// Neutral pose of one sensor: per-angle circular mean over the first `k` frames.
inline Euler calibrate_neutral(std::span<const OrientationFrame> frames, std::size_t k) {
  if (k == 0) throw CalibrationError("calibration needs at least one frame");
  if (frames.size() < k) {
    throw CalibrationError("need " + std::to_string(k) + " frames, got " + std::to_string(frames.size()));
  }
  std::vector<double> p, r, y;
  p.reserve(k);
  r.reserve(k);
  y.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    p.push_back(frames[i].pitch);
    r.push_back(frames[i].roll);
    y.push_back(frames[i].yaw);
  }
  return {detail::circular_mean_deg(p), detail::circular_mean_deg(r), detail::circular_mean_deg(y)};
}

inline OrientationFrame apply_offset(OrientationFrame frame, const Euler& offset) {
  frame.pitch = detail::clamp_pitch(wrap_deg(frame.pitch - offset.pitch));
  frame.roll = wrap_deg(frame.roll - offset.roll);
  frame.yaw = wrap_deg(frame.yaw - offset.yaw);
  return frame;
}

}  // namespace bomi
