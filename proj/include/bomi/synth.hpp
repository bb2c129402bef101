// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bomi/dataset.hpp"
#include "bomi/fusion.hpp"

namespace bomi {

/// Parameters of a synthetic recording.
///
/// Ground truth is a piecewise-constant relative pose per class with raised
/// cosine transitions centred on each label change. Raw accelerometer and
/// magnetometer vectors are generated from the (noisy) absolute attitude;
/// gyro channels carry the backward-difference Euler rates of the clean
/// trajectory, so a noiseless stream is reproduced exactly by the filter.
struct SynthConfig {
  int class_count = 9;  // including c0
  int sensor_count = 3;
  double noise_deg = 0.5;
  double spasm_deg = 0.0;
  std::set<int> spasm_classes{1};
  /// Shortest and longest spasm burst (seconds).
  double spasm_min_seconds = 0.3;
  double spasm_max_seconds = 1.0;
  std::uint64_t seed = 42;

  int sequences = 3;
  double sample_rate_hz = kDefaultSampleRateHz;
  double run_seconds = 5.0;
  double neutral_seconds = 5.0;
  double lead_seconds = 5.0;  // neutral lead-in used for calibration
  double transition_seconds = 0.5;
  int repetitions = 3;

  /// Per-repetition amplitude factors, cycled over rep1..rep3.
  std::vector<double> rep_amplitudes{1.0};
  /// Global scale on every class target (users with a reduced range).
  double amplitude_scale = 1.0;
  /// Shift of every class target along a fixed per-class direction (degrees).
  double target_drift_deg = 0.0;
  /// Sensor mounting rotation (ZYX Euler, degrees) applied in the sensor frame.
  Euler mount_offset_deg{};
  /// Seed of the per-class drift directions; fixed per synthetic subject.
  std::uint64_t subject_seed = 1;
};

namespace synth_detail {

struct ClassTarget {
  int slot = 0;  // layout position that carries the motion
  Euler pose;
};

/// Default motion dictionary: head pitch/roll/yaw pairs, then two shoulder lifts.
inline ClassTarget class_target(int cls, int sensor_count) {
  switch (cls) {
    case 1: return {0, {12.0, 0.0, 0.0}};
    case 2: return {0, {-12.0, 0.0, 0.0}};
    case 3: return {0, {0.0, 12.0, 0.0}};
    case 4: return {0, {0.0, -12.0, 0.0}};
    case 5: return {0, {0.0, 0.0, 15.0}};
    case 6: return {0, {0.0, 0.0, -15.0}};
    case 7:
      if (sensor_count >= 2) return {1, {0.0, 9.0, 0.0}};
      return {0, {9.0, 9.0, 0.0}};
    case 8:
      if (sensor_count >= 3) return {2, {0.0, -9.0, 0.0}};
      if (sensor_count == 2) return {1, {9.0, 0.0, 0.0}};
      return {0, {-9.0, -9.0, 0.0}};
    default: return {0, {}};
  }
}

inline Euler mounting_pose(int slot) {
  static const Euler table[kMaxSensors] = {{3.0, -2.0, 15.0}, {-4.0, 5.0, 100.0}, {2.0, -6.0, -80.0},
                                           {1.0, 1.0, 45.0},  {-2.0, 3.0, -135.0}, {4.0, -1.0, 170.0}};
  return table[slot % kMaxSensors];
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 rotation_zyx(const Euler& e) {
  const double cp = std::cos(deg_to_rad(e.pitch)), sp = std::sin(deg_to_rad(e.pitch));
  const double cr = std::cos(deg_to_rad(e.roll)), sr = std::sin(deg_to_rad(e.roll));
  const double cy = std::cos(deg_to_rad(e.yaw)), sy = std::sin(deg_to_rad(e.yaw));
  return {{{cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr},
           {sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr},
           {-sp, cp * sr, cp * cr}}};
}

inline Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Euler euler_zyx(const Mat3& r) {
  return {rad_to_deg(std::asin(std::clamp(-r[2][0], -1.0, 1.0))), rad_to_deg(std::atan2(r[2][1], r[2][2])),
          rad_to_deg(std::atan2(r[1][0], r[0][0]))};
}

inline Euler add(const Euler& a, const Euler& b) { return {a.pitch + b.pitch, a.roll + b.roll, a.yaw + b.yaw}; }
inline Euler scale(const Euler& a, double k) { return {a.pitch * k, a.roll * k, a.yaw * k}; }
inline Euler lerp(const Euler& a, const Euler& b, double p) {
  return {a.pitch + p * (b.pitch - a.pitch), a.roll + p * (b.roll - a.roll), a.yaw + p * (b.yaw - a.yaw)};
}

struct Segment {
  MotionLabel label = 0;
  double amplitude = 1.0;
  std::size_t start = 0;
  std::size_t length = 0;
};

inline std::size_t seconds_to_ticks(double s, double rate) { return static_cast<std::size_t>(std::llround(s * rate)); }

/// Relative pose per slot of every class, including drift.
inline std::vector<std::vector<Euler>> class_poses(const SynthConfig& cfg) {
  std::vector<std::vector<Euler>> poses(static_cast<std::size_t>(cfg.class_count),
                                        std::vector<Euler>(static_cast<std::size_t>(cfg.sensor_count)));
  std::mt19937_64 dir_rng(cfg.subject_seed * 7919u + 17u);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int c = 1; c < cfg.class_count; ++c) {
    const auto t = class_target(c, cfg.sensor_count);
    Euler pose = scale(t.pose, cfg.amplitude_scale);
    // Drift direction is drawn for every class regardless of magnitude so
    // that the directions do not depend on target_drift_deg.
    Euler dir{gauss(dir_rng), gauss(dir_rng), gauss(dir_rng)};
    const double n = std::sqrt(dir.pitch * dir.pitch + dir.roll * dir.roll + dir.yaw * dir.yaw);
    if (n > 0.0) pose = add(pose, scale(dir, cfg.target_drift_deg / n));
    poses[static_cast<std::size_t>(c)][static_cast<std::size_t>(t.slot)] = pose;
  }
  return poses;
}

/// Renders one sequence from its label schedule.
inline Sequence render(const SynthConfig& cfg, const std::vector<Segment>& segments, std::mt19937_64& rng) {
  const auto poses = class_poses(cfg);
  const std::size_t sensors = static_cast<std::size_t>(cfg.sensor_count);
  const std::size_t total = segments.empty() ? 0 : segments.back().start + segments.back().length;
  const double dt = 1.0 / cfg.sample_rate_hz;
  const double trans = std::max(1.0, cfg.transition_seconds * cfg.sample_rate_hz);

  auto target_of = [&](const Segment& seg, std::size_t slot) {
    return scale(poses[static_cast<std::size_t>(seg.label)][slot], seg.amplitude);
  };
  auto progress = [&](double k, double boundary) {
    const double u = std::clamp((k - boundary + trans / 2.0 + 0.5) / trans, 0.0, 1.0);
    return 0.5 - 0.5 * std::cos(std::numbers::pi * u);
  };

  // Clean relative trajectory per slot.
  std::vector<std::vector<Euler>> truth(sensors, std::vector<Euler>(total));
  std::vector<MotionLabel> labels(total);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    for (std::size_t k = seg.start; k < seg.start + seg.length; ++k) {
      labels[k] = seg.label;
      for (std::size_t s = 0; s < sensors; ++s) {
        Euler pose = target_of(seg, s);
        const double kk = static_cast<double>(k);
        if (i > 0 && kk < static_cast<double>(seg.start) + trans / 2.0) {
          pose = lerp(target_of(segments[i - 1], s), pose, progress(kk, static_cast<double>(seg.start)));
        } else if (i + 1 < segments.size() &&
                   kk >= static_cast<double>(segments[i + 1].start) - trans / 2.0) {
          pose = lerp(pose, target_of(segments[i + 1], s), progress(kk, static_cast<double>(segments[i + 1].start)));
        }
        truth[s][k] = pose;
      }
    }
  }

  // Spasm bursts: non-overlapping half-sine excursions inside spasm-class runs,
  // on the sensor that carries the motion. Each angle stays within spasm_deg.
  if (cfg.spasm_deg > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& seg : segments) {
      if (seg.label == kNeutralClass || !cfg.spasm_classes.count(seg.label)) continue;
      const auto slot = static_cast<std::size_t>(class_target(seg.label, cfg.sensor_count).slot);
      const double rate = cfg.sample_rate_hz;
      std::size_t k = seg.start + static_cast<std::size_t>((0.1 + 0.4 * unit(rng)) * rate);
      while (true) {
        const auto dur = std::max<std::size_t>(
            2, static_cast<std::size_t>((cfg.spasm_min_seconds + (cfg.spasm_max_seconds - cfg.spasm_min_seconds) * unit(rng)) * rate));
        if (k + dur >= seg.start + seg.length) break;
        const Euler amp{cfg.spasm_deg * (2.0 * unit(rng) - 1.0), cfg.spasm_deg * (2.0 * unit(rng) - 1.0),
                        cfg.spasm_deg * (2.0 * unit(rng) - 1.0)};
        for (std::size_t j = 0; j < dur; ++j) {
          const double w = std::sin(std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(dur));
          truth[slot][k + j] = add(truth[slot][k + j], scale(amp, w));
        }
        k += dur + static_cast<std::size_t>((0.1 + 0.5 * unit(rng)) * rate);
      }
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  const Vec3 gravity{0.0, 0.0, 1.0};
  const double dip = deg_to_rad(60.0);
  const Vec3 north{std::cos(dip), 0.0, -std::sin(dip)};
  const auto& mo = cfg.mount_offset_deg;
  const bool mounted = mo.pitch != 0.0 || mo.roll != 0.0 || mo.yaw != 0.0;
  const Mat3 mount = rotation_zyx(mo);

  Sequence seq;
  seq.labels = labels;
  seq.samples.assign(sensors, {});
  for (std::size_t s = 0; s < sensors; ++s) {
    const Euler base = mounting_pose(static_cast<int>(s));
    auto& stream = seq.samples[s];
    stream.reserve(total);
    Euler prev_abs{};
    for (std::size_t k = 0; k < total; ++k) {
      Euler abs = add(base, truth[s][k]);
      if (mounted) abs = euler_zyx(mul(rotation_zyx(abs), mount));
      Euler measured = abs;
      if (cfg.noise_deg > 0.0) {
        measured = add(abs, Euler{cfg.noise_deg * noise(rng), cfg.noise_deg * noise(rng), cfg.noise_deg * noise(rng)});
      }
      ImuSample smp;
      smp.sensor_id = static_cast<int>(s) + 1;
      smp.tick = static_cast<std::int64_t>(k);
      smp.acc = world_to_body(measured, gravity);
      smp.mag = world_to_body(measured, north);
      if (k > 0) {
        smp.gyro = {wrap_deg(abs.roll - prev_abs.roll) / dt, wrap_deg(abs.pitch - prev_abs.pitch) / dt,
                    wrap_deg(abs.yaw - prev_abs.yaw) / dt};
      }
      if (cfg.noise_deg > 0.0) {
        for (auto& g : smp.gyro) g += cfg.noise_deg * noise(rng);
      }
      stream.push_back(smp);
      prev_abs = abs;
    }
  }
  return seq;
}

inline SensorLayout default_layout(int sensor_count) {
  static const char* const names[kMaxSensors] = {"head", "right_shoulder", "left_shoulder", "sensor4", "sensor5", "sensor6"};
  SensorLayout layout;
  for (int s = 0; s < sensor_count; ++s) layout.push_back({s + 1, names[s]});
  return layout;
}

inline void check(const SynthConfig& cfg) {
  if (cfg.class_count < 2 || cfg.class_count > kMaxClassCount) {
    throw RangeError("class count must lie in [2,9] (c0 plus at most 8 motion classes)");
  }
  if (cfg.sensor_count < 1 || cfg.sensor_count > kMaxSensors) throw RangeError("sensor count must lie in [1,6]");
  if (!(cfg.noise_deg >= 0.0) || !(cfg.spasm_deg >= 0.0)) throw RangeError("noise and spasm must be non-negative");
  if (cfg.sequences < 1) throw RangeError("need at least one sequence");
  if (cfg.rep_amplitudes.empty()) throw RangeError("rep_amplitudes must not be empty");
  if (!(cfg.sample_rate_hz > 0.0)) throw RangeError("sample rate must be positive");
}

}  // namespace synth_detail

/// Protocol schedule: neutral lead-in, then each class repeated with a
/// neutral rest after every repetition.
inline std::vector<synth_detail::Segment> protocol_schedule(const SynthConfig& cfg) {
  using synth_detail::seconds_to_ticks;
  std::vector<synth_detail::Segment> segs;
  std::size_t t = 0;
  auto push = [&](MotionLabel label, double amp, std::size_t len) {
    segs.push_back({label, amp, t, len});
    t += len;
  };
  push(kNeutralClass, 1.0, seconds_to_ticks(cfg.lead_seconds, cfg.sample_rate_hz));
  for (int c = 1; c < cfg.class_count; ++c) {
    for (int r = 0; r < cfg.repetitions; ++r) {
      const double amp = cfg.rep_amplitudes[static_cast<std::size_t>(r) % cfg.rep_amplitudes.size()];
      push(c, amp, seconds_to_ticks(cfg.run_seconds, cfg.sample_rate_hz));
      push(kNeutralClass, 1.0, seconds_to_ticks(cfg.neutral_seconds, cfg.sample_rate_hz));
    }
  }
  return segs;
}

/// Declared tick count of one protocol sequence.
inline std::size_t ticks_per_sequence(const SynthConfig& cfg) {
  const auto segs = protocol_schedule(cfg);
  return segs.empty() ? 0 : segs.back().start + segs.back().length;
}

/// Class -> sensor id carrying that motion in the synthetic dictionary.
inline std::map<int, int> synth_class_sensor_map(int class_count, int sensor_count) {
  std::map<int, int> m;
  for (int c = 1; c < class_count; ++c) m[c] = synth_detail::class_target(c, sensor_count).slot + 1;
  return m;
}

inline SessionRecording synth_session(const SynthConfig& cfg) {
  synth_detail::check(cfg);
  std::mt19937_64 rng(cfg.seed);
  SessionRecording rec;
  rec.sample_rate_hz = cfg.sample_rate_hz;
  rec.class_count = cfg.class_count;
  rec.sensor_layout = synth_detail::default_layout(cfg.sensor_count);
  const auto schedule = protocol_schedule(cfg);
  for (int q = 0; q < cfg.sequences; ++q) rec.sequences.push_back(synth_detail::render(cfg, schedule, rng));
  validate_recording(rec);
  const auto issues = check_protocol_shape(rec.sequences.front(), cfg.sample_rate_hz, cfg.class_count, 0.2,
                                           cfg.run_seconds, cfg.repetitions, cfg.neutral_seconds);
  if (!issues.empty()) {
    throw ValidationError("synthetic sequence violates the protocol: " + issues.front());
  }
  return rec;
}

/// One sequence of `motions` randomly drawn classes, each held `run_seconds`,
/// after a neutral lead-in. Consecutive motions differ.
inline Sequence synth_random_sequence(const SynthConfig& cfg, int motions, std::mt19937_64& rng) {
  using synth_detail::seconds_to_ticks;
  synth_detail::check(cfg);
  std::uniform_int_distribution<int> pick(0, cfg.class_count - 1);
  std::vector<synth_detail::Segment> segs;
  std::size_t t = 0;
  const auto lead = seconds_to_ticks(cfg.lead_seconds, cfg.sample_rate_hz);
  const auto run = seconds_to_ticks(cfg.run_seconds, cfg.sample_rate_hz);
  segs.push_back({kNeutralClass, 1.0, t, lead});
  t += lead;
  MotionLabel prev = kNeutralClass;
  for (int m = 0; m < motions; ++m) {
    MotionLabel c = pick(rng);
    while (c == prev) c = pick(rng);
    segs.push_back({c, 1.0, t, run});
    t += run;
    prev = c;
  }
  return synth_detail::render(cfg, segs, rng);
}

/// A day of the multi-day protocol: two protocol training sequences and a
/// 27-motion random test sequence.
inline SessionRecording synth_day_session(SynthConfig cfg, int motions = 27) {
  cfg.sequences = 2;
  SessionRecording rec = synth_session(cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  rec.sequences.push_back(synth_random_sequence(cfg, motions, rng));
  validate_recording(rec);
  return rec;
}

}  // namespace bomi
