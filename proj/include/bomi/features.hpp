// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bomi/error.hpp"
#include "bomi/fusion.hpp"
#include "bomi/types.hpp"

namespace bomi {

inline constexpr MotionLabel kMixedLabel = -1;
inline constexpr std::size_t kDefaultWindow = 8;
inline constexpr std::size_t kDefaultOverlap = 7;
inline constexpr std::size_t kSubWindow = 4;

/// Calibrated angles plus gyro rates of one sensor at one tick.
struct ChannelFrame {
  Euler angles;
  Vec3 gyro{0.0, 0.0, 0.0};

  friend bool operator==(const ChannelFrame&, const ChannelFrame&) = default;
};

/// Tick-major multi-sensor stream, ready for windowing.
struct FrameStream {
  std::vector<int> sensor_ids;
  std::vector<std::int64_t> ticks;
  std::vector<MotionLabel> labels;
  std::vector<ChannelFrame> data;  // ticks.size() * sensor_ids.size()

  std::size_t length() const { return ticks.size(); }
  std::size_t sensor_count() const { return sensor_ids.size(); }
  const ChannelFrame& at(std::size_t t, std::size_t s) const { return data[t * sensor_ids.size() + s]; }
};

struct Window {
  std::int64_t start_tick = 0;
  std::size_t length = 0;
  std::vector<int> sensor_ids;
  std::vector<ChannelFrame> data;  // tick-major
  MotionLabel label = kMixedLabel;

  bool mixed() const { return label == kMixedLabel; }
  const ChannelFrame& at(std::size_t t, std::size_t s) const { return data[t * sensor_ids.size() + s]; }
};

inline std::size_t window_stride(std::size_t size, std::size_t overlap) {
  if (size == 0) throw ShapeError("window size must be positive");
  if (overlap >= size) throw ShapeError("overlap must be smaller than the window size");
  return size - overlap;
}

inline std::size_t window_count(std::size_t n, std::size_t size = kDefaultWindow, std::size_t overlap = kDefaultOverlap) {
  const auto stride = window_stride(size, overlap);
  return n < size ? 0 : (n - size) / stride + 1;
}

/// Window ending at tick index `last` (inclusive). Label is the shared label
/// of every tick, or kMixedLabel.
inline Window window_ending_at(const FrameStream& stream, std::size_t last, std::size_t size) {
  Window w;
  const std::size_t first = last + 1 - size;
  const std::size_t s = stream.sensor_count();
  w.start_tick = stream.ticks[first];
  w.length = size;
  w.sensor_ids = stream.sensor_ids;
  w.data.assign(stream.data.begin() + static_cast<std::ptrdiff_t>(first * s),
                stream.data.begin() + static_cast<std::ptrdiff_t>((last + 1) * s));
  w.label = stream.labels[last];
  for (std::size_t t = first; t < last; ++t) {
    if (stream.labels[t] != w.label) {
      w.label = kMixedLabel;
      break;
    }
  }
  return w;
}

/// Sliding windows over the stream; window i starts at tick index i * stride.
inline std::vector<Window> make_windows(const FrameStream& stream, std::size_t size = kDefaultWindow,
                                        std::size_t overlap = kDefaultOverlap) {
  const auto stride = window_stride(size, overlap);
  std::vector<Window> out;
  const auto n = window_count(stream.length(), size, overlap);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(window_ending_at(stream, i * stride + size - 1, size));
  return out;
}

enum class FeatureKind { FV1, FV2, FV3 };

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::FV1: return "fv1";
    case FeatureKind::FV2: return "fv2";
    case FeatureKind::FV3: return "fv3";
  }
  return "?";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "fv1" || s == "FV1") return FeatureKind::FV1;
  if (s == "fv2" || s == "FV2") return FeatureKind::FV2;
  if (s == "fv3" || s == "FV3") return FeatureKind::FV3;
  throw ConfigError("unknown feature kind '" + s + "' (expected fv1, fv2 or fv3)");
}

/// Angle channels per sample: all three angles of the first sensor, pitch and roll of the rest.
inline std::size_t angle_channels(std::size_t sensors) { return sensors == 0 ? 0 : 3 + 2 * (sensors - 1); }
inline std::size_t fv2_channels(std::size_t sensors) { return angle_channels(sensors) + 3 * sensors; }

inline std::size_t feature_dim(FeatureKind kind, std::size_t sensors, std::size_t window = kDefaultWindow) {
  switch (kind) {
    case FeatureKind::FV1: return window * angle_channels(sensors);
    case FeatureKind::FV2: return window * fv2_channels(sensors);
    case FeatureKind::FV3: return 2 * 4 * fv2_channels(sensors);
  }
  return 0;
}

/// Which sensors feed a feature vector, in order, and how it is laid out.
struct FeatureLayout {
  FeatureKind kind = FeatureKind::FV3;
  std::vector<int> sensor_ids;
  std::size_t window = kDefaultWindow;
  std::size_t overlap = kDefaultOverlap;

  std::size_t dim() const { return feature_dim(kind, sensor_ids.size(), window); }

  /// Per-sample channel names in FV2 order; FV1 uses the angle prefix.
  std::vector<std::string> sample_channels() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < sensor_ids.size(); ++i) {
      const auto p = "s" + std::to_string(sensor_ids[i]) + ".";
      names.push_back(p + "pitch");
      names.push_back(p + "roll");
      if (i == 0) names.push_back(p + "yaw");
    }
    for (int id : sensor_ids) {
      const auto p = "s" + std::to_string(id) + ".";
      for (const char* g : {"gyro_x", "gyro_y", "gyro_z"}) names.push_back(p + g);
    }
    return names;
  }

  /// Name of every feature, in vector order.
  std::vector<std::string> feature_names() const {
    auto ch = sample_channels();
    if (kind == FeatureKind::FV1) ch.resize(angle_channels(sensor_ids.size()));
    std::vector<std::string> out;
    if (kind == FeatureKind::FV3) {
      for (const auto& c : ch)
        for (const char* sw : {"sw1", "sw2"})
          for (const char* st : {"min", "max", "mean", "abssum"}) out.push_back(c + "." + sw + "." + st);
    } else {
      for (std::size_t t = 0; t < window; ++t)
        for (const auto& c : ch) out.push_back("t" + std::to_string(t) + "." + c);
    }
    return out;
  }
};

using FeatureVector = std::vector<double>;

namespace detail {

/// Column of each layout sensor inside the window.
inline std::vector<std::size_t> resolve_sensors(const Window& w, const FeatureLayout& layout) {
  if (layout.sensor_ids.empty()) throw LayoutError("feature layout has no sensors");
  std::vector<std::size_t> cols;
  cols.reserve(layout.sensor_ids.size());
  for (int id : layout.sensor_ids) {
    const auto it = std::find(w.sensor_ids.begin(), w.sensor_ids.end(), id);
    if (it == w.sensor_ids.end()) throw LayoutError("window lacks sensor " + std::to_string(id));
    cols.push_back(static_cast<std::size_t>(it - w.sensor_ids.begin()));
  }
  return cols;
}

inline void append_sample(const Window& w, std::size_t t, const std::vector<std::size_t>& cols, bool with_gyro,
                          std::vector<double>& out) {
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto& f = w.at(t, cols[i]);
    out.push_back(f.angles.pitch);
    out.push_back(f.angles.roll);
    if (i == 0) out.push_back(f.angles.yaw);
  }
  if (!with_gyro) return;
  for (const auto c : cols) {
    const auto& g = w.at(t, c).gyro;
    out.insert(out.end(), g.begin(), g.end());
  }
}

inline FeatureVector flatten(const Window& w, const FeatureLayout& layout, bool with_gyro) {
  const auto cols = resolve_sensors(w, layout);
  FeatureVector out;
  out.reserve(w.length * (with_gyro ? fv2_channels(cols.size()) : angle_channels(cols.size())));
  for (std::size_t t = 0; t < w.length; ++t) append_sample(w, t, cols, with_gyro, out);
  return out;
}

}  // namespace detail

/// Angles of every tick, concatenated sample by sample.
inline FeatureVector fv1(const Window& w, const FeatureLayout& layout) { return detail::flatten(w, layout, false); }

/// FV1 channels plus the three gyro rates of every sensor, sample by sample.
inline FeatureVector fv2(const Window& w, const FeatureLayout& layout) { return detail::flatten(w, layout, true); }

/// Sub-window statistics of the FV2 channels. For each channel, for each
/// half of the window: min, max, mean, sum of absolute values.
inline FeatureVector fv3(const Window& w, const FeatureLayout& layout) {
  if (w.length != 2 * kSubWindow) {
    throw ShapeError("fv3 needs a window of " + std::to_string(2 * kSubWindow) + " samples, got " + std::to_string(w.length));
  }
  const auto cols = detail::resolve_sensors(w, layout);
  const std::size_t channels = fv2_channels(cols.size());
  std::vector<double> samples;  // tick-major
  samples.reserve(w.length * channels);
  for (std::size_t t = 0; t < w.length; ++t) detail::append_sample(w, t, cols, true, samples);

  FeatureVector out;
  out.reserve(8 * channels);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t sw = 0; sw < 2; ++sw) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      double sum = 0.0, abs_sum = 0.0;
      for (std::size_t t = sw * kSubWindow; t < (sw + 1) * kSubWindow; ++t) {
        const double x = samples[t * channels + c];
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        sum += x;
        abs_sum += std::abs(x);
      }
      out.push_back(lo);
      out.push_back(hi);
      out.push_back(sum / static_cast<double>(kSubWindow));
      out.push_back(abs_sum);
    }
  }
  return out;
}

inline FeatureVector extract_features(const Window& w, const FeatureLayout& layout) {
  switch (layout.kind) {
    case FeatureKind::FV1: return fv1(w, layout);
    case FeatureKind::FV2: return fv2(w, layout);
    case FeatureKind::FV3: return fv3(w, layout);
  }
  return {};
}

/// Motion amplitude: Euclidean norm of the calibrated angles.
inline double gamma_amp(const Euler& e) { return std::sqrt(e.pitch * e.pitch + e.roll * e.roll + e.yaw * e.yaw); }
inline double gamma_amp(const OrientationFrame& f) { return gamma_amp(f.angles()); }

/// Mean per-tick amplitude of one sensor over the window.
inline double window_gamma(const Window& w, int sensor_id) {
  const auto it = std::find(w.sensor_ids.begin(), w.sensor_ids.end(), sensor_id);
  if (it == w.sensor_ids.end()) throw LayoutError("window lacks sensor " + std::to_string(sensor_id));
  const auto col = static_cast<std::size_t>(it - w.sensor_ids.begin());
  double sum = 0.0;
  for (std::size_t t = 0; t < w.length; ++t) sum += gamma_amp(w.at(t, col).angles);
  return sum / static_cast<double>(w.length);
}

enum class AmplitudeMode { MinMax, Percentile };

struct ClassRange {
  double min = 0.0;
  double max = 0.0;
  int sensor_id = 1;
};

/// Trained amplitude range per non-neutral class.
struct AmplitudeRange {
  AmplitudeMode mode = AmplitudeMode::MinMax;
  std::map<int, ClassRange> classes;
};

/// Class -> sensor used for the amplitude indicator. Unlisted classes use `fallback`.
struct ClassSensorMap {
  std::map<int, int> sensor_for_class;
  int fallback = 1;

  int sensor(int cls) const {
    const auto it = sensor_for_class.find(cls);
    return it == sensor_for_class.end() ? fallback : it->second;
  }
};

/// Linear-interpolated percentile of unsorted data, p in [0,1].
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Learns per-class ranges from per-window amplitudes.
///
/// `gammas[j]` holds the window amplitudes of class j measured on
/// `sensors.sensor(j)`. Every class in `required` must have samples.
inline AmplitudeRange learn_ranges_from_values(const std::map<int, std::vector<double>>& gammas,
                                               const std::vector<int>& required, const ClassSensorMap& sensors,
                                               AmplitudeMode mode = AmplitudeMode::MinMax, double lo_pct = 0.05,
                                               double hi_pct = 0.95) {
  AmplitudeRange ranges;
  ranges.mode = mode;
  for (int cls : required) {
    if (cls == kNeutralClass) continue;
    const auto it = gammas.find(cls);
    if (it == gammas.end() || it->second.empty()) {
      throw CoverageError("class " + std::to_string(cls) + " has no training windows");
    }
    ClassRange r;
    r.sensor_id = sensors.sensor(cls);
    if (mode == AmplitudeMode::MinMax) {
      const auto [lo, hi] = std::minmax_element(it->second.begin(), it->second.end());
      r.min = *lo;
      r.max = *hi;
    } else {
      r.min = percentile(it->second, lo_pct);
      r.max = percentile(it->second, hi_pct);
    }
    if (!(r.max > r.min)) throw DegenerateRangeError("class " + std::to_string(cls) + " has gamma_max == gamma_min");
    ranges.classes[cls] = r;
  }
  return ranges;
}

inline AmplitudeRange learn_ranges(std::span<const Window> windows, const std::vector<int>& classes,
                                   const ClassSensorMap& sensors, AmplitudeMode mode = AmplitudeMode::MinMax) {
  std::map<int, std::vector<double>> gammas;
  for (const auto& w : windows) {
    if (w.mixed() || w.label == kNeutralClass) continue;
    gammas[w.label].push_back(window_gamma(w, sensors.sensor(w.label)));
  }
  return learn_ranges_from_values(gammas, classes, sensors, mode);
}

/// Proportional output for class `cls`, clipped to [0,1].
inline double prop_output(double gamma, int cls, const AmplitudeRange& ranges) {
  const auto it = ranges.classes.find(cls);
  if (it == ranges.classes.end()) throw CoverageError("no amplitude range for class " + std::to_string(cls));
  const auto& r = it->second;
  if (!(r.max > r.min)) throw DegenerateRangeError("class " + std::to_string(cls) + " has a degenerate range");
  return std::clamp(std::abs(gamma - r.min) / (r.max - r.min), 0.0, 1.0);
}

}  // namespace bomi
