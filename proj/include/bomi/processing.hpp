// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "bomi/dataset.hpp"
#include "bomi/features.hpp"
#include "bomi/fusion.hpp"
#include "bomi/lda.hpp"

namespace bomi {

/// Neutral pose of every sensor from the first `calib_ticks` ticks of a sequence.
inline NeutralOffset calibrate_sequence(const Sequence& seq, const SensorLayout& layout, const FusionConfig& cfg) {
  if (cfg.calib_ticks < 1) throw CalibrationError("fusion.calib_ticks must be at least 1");
  const auto k = static_cast<std::size_t>(cfg.calib_ticks);
  if (seq.length() < k) {
    throw CalibrationError("sequence has " + std::to_string(seq.length()) + " ticks, calibration needs " + std::to_string(k));
  }
  NeutralOffset offset;
  for (std::size_t s = 0; s < layout.size(); ++s) {
    const auto frames = fuse_stream(std::span<const ImuSample>(seq.samples[s].data(), k), cfg);
    offset[layout[s].id] = calibrate_neutral(frames, k);
  }
  return offset;
}

/// Fuses a whole sequence and subtracts the neutral pose.
inline FrameStream fuse_sequence(const Sequence& seq, const SensorLayout& layout, const FusionConfig& cfg) {
  const auto offset = calibrate_sequence(seq, layout, cfg);
  FrameStream out;
  out.sensor_ids = sensor_ids(layout);
  out.labels = seq.labels;
  const std::size_t n = seq.length();
  const std::size_t sensors = layout.size();
  out.ticks.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.ticks.push_back(seq.samples[0][t].tick);
  out.data.resize(n * sensors);
  for (std::size_t s = 0; s < sensors; ++s) {
    const auto frames = fuse_stream(seq.samples[s], cfg);
    const auto& off = offset.at(layout[s].id);
    for (std::size_t t = 0; t < n; ++t) {
      auto& cf = out.data[t * sensors + s];
      cf.angles = apply_offset(frames[t], off).angles();
      cf.gyro = seq.samples[s][t].gyro;
    }
  }
  return out;
}

/// Feature rows of labelled windows, with provenance.
struct WindowSet {
  FeatureMatrix features;
  std::vector<MotionLabel> labels;
  std::vector<int> sequence_index;     // 1-based sequence each window came from
  std::vector<std::int64_t> end_tick;  // tick of the window's last sample
  std::vector<double> gamma;           // window amplitude on the class's mapped sensor
  std::size_t mixed_excluded = 0;

  std::size_t size() const { return labels.size(); }

  void append(const WindowSet& o) {
    features.insert(features.end(), o.features.begin(), o.features.end());
    labels.insert(labels.end(), o.labels.begin(), o.labels.end());
    sequence_index.insert(sequence_index.end(), o.sequence_index.begin(), o.sequence_index.end());
    end_tick.insert(end_tick.end(), o.end_tick.begin(), o.end_tick.end());
    gamma.insert(gamma.end(), o.gamma.begin(), o.gamma.end());
    mixed_excluded += o.mixed_excluded;
  }
};

/// Windows of one fused stream. Mixed windows are dropped and counted.
inline WindowSet collect_windows(const FrameStream& stream, const FeatureLayout& layout, const ClassSensorMap& sensors,
                                 int sequence_index) {
  WindowSet out;
  const auto stride = window_stride(layout.window, layout.overlap);
  const auto n = window_count(stream.length(), layout.window, layout.overlap);
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = window_ending_at(stream, i * stride + layout.window - 1, layout.window);
    if (w.mixed()) {
      ++out.mixed_excluded;
      continue;
    }
    out.features.push_back(extract_features(w, layout));
    out.labels.push_back(w.label);
    out.sequence_index.push_back(sequence_index);
    out.end_tick.push_back(w.start_tick + static_cast<std::int64_t>(w.length) - 1);
    out.gamma.push_back(w.label == kNeutralClass ? 0.0 : window_gamma(w, sensors.sensor(w.label)));
  }
  return out;
}

struct TrainOptions {
  FeatureKind kind = FeatureKind::FV3;
  std::size_t window = kDefaultWindow;
  std::size_t overlap = kDefaultOverlap;
  FitOptions fit;
  FusionConfig fusion;
  ClassSensorMap class_sensors;
  AmplitudeMode amplitude_mode = AmplitudeMode::MinMax;
};

inline FeatureLayout make_layout(const SensorLayout& sensors, const TrainOptions& opt) {
  return {opt.kind, sensor_ids(sensors), opt.window, opt.overlap};
}

inline WindowSet windows_for(const SessionRecording& rec, const std::vector<IndexedSequence>& seqs,
                             const FeatureLayout& layout, const ClassSensorMap& sensors, FusionConfig fusion) {
  fusion.sample_rate_hz = rec.sample_rate_hz;
  WindowSet all;
  for (const auto& s : seqs) {
    all.append(collect_windows(fuse_sequence(*s.sequence, rec.sensor_layout, fusion), layout, sensors, s.index));
  }
  return all;
}

/// Fits the classifier and the amplitude ranges on a window set.
inline LdaModel train_on_windows(const WindowSet& train, const FeatureLayout& layout, const TrainOptions& opt) {
  if (train.size() == 0) throw DataError("no labelled training windows");
  for (const auto& [cls, id] : opt.class_sensors.sensor_for_class) {
    if (std::find(layout.sensor_ids.begin(), layout.sensor_ids.end(), id) == layout.sensor_ids.end()) {
      throw LayoutError("class " + std::to_string(cls) + " mapped to absent sensor " + std::to_string(id));
    }
  }
  LdaModel m = fit_lda(train.features, train.labels, opt.fit);
  std::map<int, std::vector<double>> gammas;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.labels[i] != kNeutralClass) gammas[train.labels[i]].push_back(train.gamma[i]);
  }
  m.amplitude = learn_ranges_from_values(gammas, m.classes, opt.class_sensors, opt.amplitude_mode);
  m.layout = layout;
  m.class_sensors = opt.class_sensors;
  m.fusion = opt.fusion;
  return m;
}

/// Trains on the selected sequences, checking that every declared class is present.
inline LdaModel train_model(const SessionRecording& rec, const std::vector<IndexedSequence>& train_seqs,
                            const TrainOptions& opt) {
  const auto layout = make_layout(rec.sensor_layout, opt);
  auto fusion = opt.fusion;
  fusion.sample_rate_hz = rec.sample_rate_hz;
  const auto windows = windows_for(rec, train_seqs, layout, opt.class_sensors, fusion);
  std::set<int> seen(windows.labels.begin(), windows.labels.end());
  for (int c = 0; c < rec.class_count; ++c) {
    if (!seen.count(c)) throw CoverageError("class " + std::to_string(c) + " has no training windows");
  }
  auto o = opt;
  o.fusion = fusion;
  LdaModel m = train_on_windows(windows, layout, o);
  m.metadata["sample_rate_hz"] = std::to_string(rec.sample_rate_hz);
  std::string seqs;
  for (const auto& s : train_seqs) seqs += (seqs.empty() ? "" : ",") + std::to_string(s.index);
  m.metadata["train_sequences"] = seqs;
  std::string ids;
  for (const auto& s : rec.sensor_layout) ids += (ids.empty() ? "" : ",") + std::to_string(s.id) + ":" + s.location;
  m.metadata["sensor_layout"] = ids;
  return m;
}

/// Throws LayoutError unless the recording provides every model sensor.
inline void check_layout(const LdaModel& m, const SessionRecording& rec) {
  const auto ids = sensor_ids(rec.sensor_layout);
  if (ids != m.layout.sensor_ids) {
    std::string want, have;
    for (int i : m.layout.sensor_ids) want += std::to_string(i) + " ";
    for (int i : ids) have += std::to_string(i) + " ";
    throw LayoutError("recording sensors [" + have + "] do not match model sensors [" + want + "]");
  }
}

}  // namespace bomi
