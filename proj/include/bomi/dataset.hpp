// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "bomi/error.hpp"
#include "bomi/types.hpp"

namespace bomi {

/// One labelled pass of the protocol. `samples[s]` is the stream of the
/// s-th sensor of the owning recording's layout; all streams and `labels`
/// have the same length.
struct Sequence {
  std::vector<std::vector<ImuSample>> samples;
  std::vector<MotionLabel> labels;

  std::size_t length() const { return labels.size(); }
  std::size_t sensor_count() const { return samples.size(); }

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct SessionRecording {
  double sample_rate_hz = kDefaultSampleRateHz;
  int class_count = 0;
  SensorLayout sensor_layout;
  std::vector<Sequence> sequences;

  friend bool operator==(const SessionRecording&, const SessionRecording&) = default;
};

/// Structural validation. Throws on the first violation.
inline void validate_recording(const SessionRecording& rec) {
  if (!(rec.sample_rate_hz > 0.0)) throw ValidationError("sample_rate_hz must be positive");
  if (rec.class_count < 1 || rec.class_count > kMaxClassCount) {
    throw ValidationError("class_count must lie in [1," + std::to_string(kMaxClassCount) + "]");
  }
  if (rec.sensor_layout.empty()) throw ValidationError("sensor layout is empty");
  if (rec.sensor_layout.size() > static_cast<std::size_t>(kMaxSensors)) {
    throw ValidationError("at most " + std::to_string(kMaxSensors) + " sensors are supported");
  }
  std::set<int> ids;
  for (const auto& s : rec.sensor_layout) {
    if (s.id < 1 || s.id > kMaxSensors) throw ValidationError("sensor id out of [1,6]: " + std::to_string(s.id));
    if (!ids.insert(s.id).second) throw ValidationError("duplicate sensor id " + std::to_string(s.id));
  }
  if (rec.sequences.empty()) throw ValidationError("recording has no sequences");

  for (std::size_t q = 0; q < rec.sequences.size(); ++q) {
    const auto& seq = rec.sequences[q];
    const std::string where = "sequence " + std::to_string(q + 1);
    if (seq.samples.size() != rec.sensor_layout.size()) {
      throw AlignmentError(where + ": expected " + std::to_string(rec.sensor_layout.size()) + " sensor streams");
    }
    for (const auto label : seq.labels) {
      if (label < 0 || label >= rec.class_count) {
        throw SchemaError(where + ": label " + std::to_string(label) + " outside class count " +
                          std::to_string(rec.class_count));
      }
    }
    for (std::size_t s = 0; s < seq.samples.size(); ++s) {
      const auto& stream = seq.samples[s];
      if (stream.size() != seq.labels.size()) {
        throw AlignmentError(where + ": sensor " + std::to_string(rec.sensor_layout[s].id) + " has " +
                             std::to_string(stream.size()) + " samples for " +
                             std::to_string(seq.labels.size()) + " ticks");
      }
      for (std::size_t t = 0; t < stream.size(); ++t) {
        const auto& smp = stream[t];
        if (smp.sensor_id != rec.sensor_layout[s].id) throw AlignmentError(where + ": sensor id mismatch in stream");
        if (smp.tick != seq.samples[0][t].tick) throw AlignmentError(where + ": ticks not aligned across sensors");
        if (t > 0 && smp.tick <= stream[t - 1].tick) throw AlignmentError(where + ": ticks not increasing");
        if (!all_finite(smp.acc) || !all_finite(smp.gyro) || !all_finite(smp.mag)) {
          throw ValidationError(where + ": non-finite sample at tick " + std::to_string(smp.tick));
        }
      }
    }
  }
}

/// 1-based sequence indices.
struct SplitSpec {
  std::vector<int> train_sequences{1, 2};
  std::vector<int> test_sequences{3};
};

struct IndexedSequence {
  int index = 0;  // 1-based position in the recording
  const Sequence* sequence = nullptr;
};

struct SessionSplit {
  std::vector<IndexedSequence> train;
  std::vector<IndexedSequence> test;
};

/// The returned views borrow from `rec`.
inline SessionSplit split_session(const SessionRecording& rec, const SplitSpec& spec = {}) {
  std::set<int> train(spec.train_sequences.begin(), spec.train_sequences.end());
  std::set<int> test(spec.test_sequences.begin(), spec.test_sequences.end());
  if (train.size() != spec.train_sequences.size() || test.size() != spec.test_sequences.size()) {
    throw SplitError("duplicate sequence index");
  }
  for (int i : train) {
    if (test.count(i)) throw SplitError("sequence " + std::to_string(i) + " is in both train and test");
  }
  const int n = static_cast<int>(rec.sequences.size());
  SessionSplit out;
  for (int i : spec.train_sequences) {
    if (i < 1 || i > n) throw SplitError("train sequence index " + std::to_string(i) + " out of range");
    out.train.push_back({i, &rec.sequences[static_cast<std::size_t>(i - 1)]});
  }
  for (int i : spec.test_sequences) {
    if (i < 1 || i > n) throw SplitError("test sequence index " + std::to_string(i) + " out of range");
    out.test.push_back({i, &rec.sequences[static_cast<std::size_t>(i - 1)]});
  }
  return out;
}

struct LabelRun {
  MotionLabel label = 0;
  std::size_t start = 0;
  std::size_t length = 0;
};

inline std::vector<LabelRun> label_runs(const std::vector<MotionLabel>& labels) {
  std::vector<LabelRun> runs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (runs.empty() || runs.back().label != labels[i]) runs.push_back({labels[i], i, 0});
    ++runs.back().length;
  }
  return runs;
}

/// Checks a sequence against the recording protocol: neutral-separated
/// 5 s class runs, each motion class repeated three times. Returns the
/// list of deviations; `tolerance` is the allowed relative duration error.
inline std::vector<std::string> check_protocol_shape(const Sequence& seq, double sample_rate_hz, int class_count,
                                                     double tolerance = 0.2, double run_seconds = 5.0,
                                                     int repetitions = 3, double neutral_seconds = 5.0) {
  std::vector<std::string> issues;
  const auto runs = label_runs(seq.labels);
  const double expected_run = run_seconds * sample_rate_hz;
  const double expected_rest = neutral_seconds * sample_rate_hz;
  std::vector<int> counts(static_cast<std::size_t>(std::max(class_count, 1)), 0);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    if (r.label != kNeutralClass) {
      if (r.label < class_count) ++counts[static_cast<std::size_t>(r.label)];
      if (i + 1 < runs.size() && runs[i + 1].label != kNeutralClass) {
        issues.push_back("class run at tick " + std::to_string(r.start) + " not followed by neutral");
      }
    }
    const bool edge = (i == 0 || i + 1 == runs.size());
    const double expected = r.label == kNeutralClass ? expected_rest : expected_run;
    if (!edge && std::abs(static_cast<double>(r.length) - expected) > tolerance * expected) {
      issues.push_back("run of class " + std::to_string(r.label) + " at tick " + std::to_string(r.start) +
                       " lasts " + std::to_string(r.length) + " ticks");
    }
  }
  for (int c = 1; c < class_count; ++c) {
    if (counts[static_cast<std::size_t>(c)] != repetitions) {
      issues.push_back("class " + std::to_string(c) + " appears " + std::to_string(counts[static_cast<std::size_t>(c)]) +
                       " times");
    }
  }
  return issues;
}

}  // namespace bomi
