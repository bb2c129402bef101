// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bomi/config.hpp"
#include "bomi/dataset.hpp"
#include "bomi/features.hpp"
#include "bomi/fusion.hpp"
#include "bomi/lda.hpp"
#include "bomi/processing.hpp"
#include "bomi/ring_buffer.hpp"

namespace bomi {

enum class DeviceCommand { Neutral, F, B, R, L, Rr, Lr, B1, B2 };

inline std::string to_string(DeviceCommand c) {
  switch (c) {
    case DeviceCommand::Neutral: return "NEUTRAL";
    case DeviceCommand::F: return "F";
    case DeviceCommand::B: return "B";
    case DeviceCommand::R: return "R";
    case DeviceCommand::L: return "L";
    case DeviceCommand::Rr: return "Rr";
    case DeviceCommand::Lr: return "Lr";
    case DeviceCommand::B1: return "B1";
    case DeviceCommand::B2: return "B2";
  }
  return "?";
}

inline DeviceCommand device_command_from_string(const std::string& s) {
  for (auto c : {DeviceCommand::Neutral, DeviceCommand::F, DeviceCommand::B, DeviceCommand::R, DeviceCommand::L,
                 DeviceCommand::Rr, DeviceCommand::Lr, DeviceCommand::B1, DeviceCommand::B2}) {
    if (to_string(c) == s) return c;
  }
  throw MappingError("unknown device command '" + s + "'");
}

inline bool is_button(DeviceCommand c) { return c == DeviceCommand::B1 || c == DeviceCommand::B2; }

inline constexpr double kDefaultMaxSpeed = 20.0;  // cm/s

/// Class -> joystick function table.
struct CommandMapping {
  std::map<int, DeviceCommand> table;
  double v_max = kDefaultMaxSpeed;

  /// c0 -> NEUTRAL, c1..c8 -> F, B, R, L, Rr, Lr, B1, B2.
  static CommandMapping joystick(int class_count = kMaxClassCount) {
    static const DeviceCommand order[] = {DeviceCommand::Neutral, DeviceCommand::F,  DeviceCommand::B,
                                          DeviceCommand::R,       DeviceCommand::L,  DeviceCommand::Rr,
                                          DeviceCommand::Lr,      DeviceCommand::B1, DeviceCommand::B2};
    CommandMapping m;
    for (int c = 0; c < std::min(class_count, kMaxClassCount); ++c) m.table[c] = order[c];
    return m;
  }

  /// Keys `class.<n> = <command>` and `v_max`, layered over the joystick table.
  static CommandMapping from_config(const KeyValueConfig& cfg, int class_count = kMaxClassCount) {
    CommandMapping m = joystick(class_count);
    m.v_max = cfg.get_double("v_max", m.v_max);
    for (const auto& [key, value] : cfg.values()) {
      if (key.rfind("class.", 0) != 0) continue;
      const auto cls = parse_int(key.substr(6));
      if (!cls) throw ConfigError("bad mapping key " + key);
      m.table[static_cast<int>(*cls)] = device_command_from_string(value);
    }
    m.validate();
    return m;
  }

  void validate() const {
    if (!(v_max > 0.0)) throw MappingError("v_max must be positive");
    for (const auto& [cls, cmd] : table) {
      if ((cls == kNeutralClass) != (cmd == DeviceCommand::Neutral)) {
        throw MappingError("NEUTRAL must be mapped exactly from c0");
      }
    }
  }

  /// Throws unless every model class has an entry.
  void check_covers(const std::vector<int>& classes) const {
    for (int c : classes) {
      if (!table.count(c)) throw MappingError("class " + std::to_string(c) + " has no command");
    }
  }
};

struct CommandOutput {
  std::int64_t tick = 0;
  double timestamp_ms = 0.0;
  MotionLabel predicted = kNeutralClass;
  double nu = 0.0;
  DeviceCommand command = DeviceCommand::Neutral;
  double velocity = 0.0;
  double latency_ms = 0.0;
  bool triggered = false;  // button press event (first window of a button run)
  bool gap = false;
};

/// Stateful class -> command translation. Axes are level-triggered with
/// speed nu * v_max; buttons fire once per entry into their class and
/// carry no speed.
class CommandMapper {
public:
  explicit CommandMapper(CommandMapping mapping) : mapping_(std::move(mapping)) { mapping_.validate(); }

  CommandOutput map(MotionLabel cls, double nu) {
    const auto it = mapping_.table.find(cls);
    if (it == mapping_.table.end()) throw MappingError("class " + std::to_string(cls) + " is not mapped");
    CommandOutput out;
    out.predicted = cls;
    out.command = it->second;
    out.nu = cls == kNeutralClass ? 0.0 : std::clamp(nu, 0.0, 1.0);
    if (is_button(out.command)) {
      out.triggered = !previous_ || *previous_ != cls;
    } else if (out.command != DeviceCommand::Neutral) {
      out.velocity = out.nu * mapping_.v_max;
    }
    previous_ = cls;
    return out;
  }

  void reset() { previous_.reset(); }
  const CommandMapping& mapping() const { return mapping_; }

private:
  CommandMapping mapping_;
  std::optional<MotionLabel> previous_;
};

/// One-shot helper over a fresh mapper.
inline CommandOutput map_command(MotionLabel cls, double nu, const CommandMapping& mapping) {
  CommandMapper m(mapping);
  return m.map(cls, nu);
}

struct SmoothingPolicy {
  std::size_t majority_k = 0;  // 0 = none

  static SmoothingPolicy none() { return {}; }
  static SmoothingPolicy majority(std::size_t k) {
    if (k < 1) throw ConfigError("majority smoothing needs k >= 1");
    return {k};
  }
};

/// Mode of the last k predictions; ties keep the previous output.
class Smoother {
public:
  explicit Smoother(SmoothingPolicy policy) : policy_(policy), history_(std::max<std::size_t>(policy.majority_k, 1)) {}

  MotionLabel push(MotionLabel raw) {
    if (policy_.majority_k == 0) return raw;
    history_.push(raw);
    std::map<MotionLabel, std::size_t> counts;
    for (std::size_t i = 0; i < history_.size(); ++i) ++counts[history_[i]];
    std::size_t best = 0;
    std::vector<MotionLabel> leaders;
    for (const auto& [label, n] : counts) {
      if (n > best) {
        best = n;
        leaders = {label};
      } else if (n == best) {
        leaders.push_back(label);
      }
    }
    MotionLabel out = leaders.front();
    if (leaders.size() > 1) out = last_ ? *last_ : raw;
    last_ = out;
    return out;
  }

private:
  SmoothingPolicy policy_;
  RingBuffer<MotionLabel> history_;
  std::optional<MotionLabel> last_;
};

inline std::vector<MotionLabel> smooth(const SmoothingPolicy& policy, const std::vector<MotionLabel>& stream) {
  Smoother s(policy);
  std::vector<MotionLabel> out;
  out.reserve(stream.size());
  for (auto c : stream) out.push_back(s.push(c));
  return out;
}

/// All sensors' samples for one tick, in model layout order. A missing
/// entry is a lost sample.
struct TickInput {
  std::int64_t tick = 0;
  std::vector<std::optional<ImuSample>> samples;
};

struct PipelineConfig {
  SmoothingPolicy smoothing;
  std::size_t max_gap_fill = 60;  // longest run of missing ticks that is back-filled
};

/// Single-threaded streaming classifier: fusion, windowing, features, LDA,
/// command mapping. Emits one output per window stride once the window is full.
class StreamPipeline {
public:
  StreamPipeline(const LdaModel& model, CommandMapping mapping, NeutralOffset offset, PipelineConfig cfg = {})
      : model_(&model),
        mapper_(std::move(mapping)),
        offset_(std::move(offset)),
        cfg_(cfg),
        smoother_(cfg.smoothing),
        frames_(model.layout.window),
        stride_(window_stride(model.layout.window, model.layout.overlap)) {
    mapper_.mapping().check_covers(model.classes);
    for (int id : model.layout.sensor_ids) {
      if (!offset_.count(id)) throw CalibrationError("no neutral offset for sensor " + std::to_string(id));
      filters_.push_back(FilterState::from_config(model.fusion));
    }
    last_.resize(model.layout.sensor_ids.size());
  }

  std::optional<CommandOutput> stream_step(const TickInput& in) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& ids = model_->layout.sensor_ids;
    if (in.samples.size() != ids.size()) {
      throw LayoutError("tick carries " + std::to_string(in.samples.size()) + " sensors, model expects " +
                        std::to_string(ids.size()));
    }
    bool gap = false;
    if (expected_tick_ && in.tick > *expected_tick_ && have_frame_) {
      const auto missing = std::min<std::int64_t>(in.tick - *expected_tick_, static_cast<std::int64_t>(cfg_.max_gap_fill));
      for (std::int64_t k = 0; k < missing; ++k) push_frame(last_);
      gap = true;
    }
    std::vector<ChannelFrame> current(ids.size());
    for (std::size_t s = 0; s < ids.size(); ++s) {
      const auto& smp = in.samples[s];
      if (!smp) {
        if (!have_frame_) throw DataError("first tick is missing sensor " + std::to_string(ids[s]));
        current[s] = last_[s];
        gap = true;
        continue;
      }
      if (smp->sensor_id != ids[s]) throw LayoutError("sample order does not match model layout");
      const auto frame = apply_offset(complementary_step(filters_[s], *smp), offset_.at(ids[s]));
      current[s] = {frame.angles(), smp->gyro};
    }
    last_ = current;
    have_frame_ = true;
    expected_tick_ = in.tick + 1;
    last_ticks_.push(in.tick);
    push_frame(current);
    if (!frames_.full()) return std::nullopt;
    if ((since_full_++) % stride_ != 0) return std::nullopt;

    const Window w = current_window();
    const auto features = extract_features(w, model_->layout);
    const MotionLabel raw = predict(*model_, features);
    const MotionLabel cls = smoother_.push(raw);
    double nu = 0.0;
    if (cls != kNeutralClass && model_->amplitude.classes.count(cls)) {
      nu = prop_output(window_gamma(w, model_->amplitude.classes.at(cls).sensor_id), cls, model_->amplitude);
    }
    CommandOutput out = mapper_.map(cls, nu);
    out.tick = in.tick;
    out.timestamp_ms = static_cast<double>(in.tick) * 1000.0 / model_->fusion.sample_rate_hz;
    out.gap = gap;
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

  /// Most recent full window (valid once an output has been produced).
  Window current_window() const {
    Window w;
    w.length = frames_.size();
    w.sensor_ids = model_->layout.sensor_ids;
    w.start_tick = last_ticks_.empty() ? 0 : last_ticks_.back() - static_cast<std::int64_t>(w.length) + 1;
    for (std::size_t t = 0; t < frames_.size(); ++t) w.data.insert(w.data.end(), frames_[t].begin(), frames_[t].end());
    return w;
  }

private:
  void push_frame(const std::vector<ChannelFrame>& f) { frames_.push(f); }

  const LdaModel* model_;
  CommandMapper mapper_;
  NeutralOffset offset_;
  PipelineConfig cfg_;
  Smoother smoother_;
  std::vector<FilterState> filters_;
  RingBuffer<std::vector<ChannelFrame>> frames_;
  RingBuffer<std::int64_t> last_ticks_{1};
  std::vector<ChannelFrame> last_;
  std::size_t stride_;
  std::size_t since_full_ = 0;
  bool have_frame_ = false;
  std::optional<std::int64_t> expected_tick_;
};

/// Longest run of consecutive disagreements. Reference entries equal to
/// kMixedLabel are skipped without breaking or extending a run.
inline std::size_t max_consecutive_errors(const std::vector<MotionLabel>& predicted,
                                          const std::vector<MotionLabel>& reference) {
  if (predicted.size() != reference.size()) throw DimensionError("prediction and reference streams differ in length");
  std::size_t best = 0, run = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (reference[i] == kMixedLabel) continue;
    if (predicted[i] != reference[i]) best = std::max(best, ++run);
    else run = 0;
  }
  return best;
}

struct StreamStats {
  std::size_t windows = 0;
  std::size_t scored_windows = 0;  // non-mixed reference
  std::size_t correct = 0;
  std::vector<double> latencies_ms;
  std::size_t max_consecutive_misclassifications = 0;
  double window_period_ms = 1000.0 / kDefaultSampleRateHz;
  std::size_t late_ticks = 0;  // paced mode: processing finished after the next tick was due
  double wall_clock_s = 0.0;

  double accuracy() const { return scored_windows ? 100.0 * static_cast<double>(correct) / static_cast<double>(scored_windows) : 0.0; }
  double max_run_ms() const { return static_cast<double>(max_consecutive_misclassifications) * window_period_ms; }
  double mean_latency_ms() const {
    return latencies_ms.empty() ? 0.0
                                : std::accumulate(latencies_ms.begin(), latencies_ms.end(), 0.0) /
                                      static_cast<double>(latencies_ms.size());
  }
  double latency_percentile_ms(double p) const { return latencies_ms.empty() ? 0.0 : percentile(latencies_ms, p); }
};

/// Receives every command in stream order.
class CommandSink {
public:
  virtual ~CommandSink() = default;
  virtual void consume(const CommandOutput& out) = 0;
};

/// CSV `tick,timestamp_ms,class,nu,command,velocity,latency_ms`.
class CommandLogWriter : public CommandSink {
public:
  explicit CommandLogWriter(const std::string& path) : out_(path) {
    if (!out_) throw IoError("cannot write " + path);
    out_ << "tick,timestamp_ms,class,nu,command,velocity,latency_ms\n";
  }
  void consume(const CommandOutput& o) override {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%lld,%.3f,%d,%.6f,%s,%.6f,%.6f\n", static_cast<long long>(o.tick), o.timestamp_ms,
                  o.predicted, o.nu, to_string(o.command).c_str(), o.velocity, o.latency_ms);
    out_ << buf;
  }

private:
  std::ofstream out_;
};

/// Virtual end-effector: integrates axis commands into a 3-D position (cm).
/// F/B move along -y/+y, R/L along -x/+x, Rr/Lr along +z/-z.
class VirtualArm : public CommandSink {
public:
  explicit VirtualArm(double step_seconds) : dt_(step_seconds) {}

  void consume(const CommandOutput& o) override {
    const double d = o.velocity * dt_;
    switch (o.command) {
      case DeviceCommand::F: position_[1] -= d; break;
      case DeviceCommand::B: position_[1] += d; break;
      case DeviceCommand::R: position_[0] -= d; break;
      case DeviceCommand::L: position_[0] += d; break;
      case DeviceCommand::Rr: position_[2] += d; break;
      case DeviceCommand::Lr: position_[2] -= d; break;
      case DeviceCommand::B1: if (o.triggered) ++button_presses_[0]; break;
      case DeviceCommand::B2: if (o.triggered) ++button_presses_[1]; break;
      case DeviceCommand::Neutral: break;
    }
    trace_.push_back({o.tick, position_});
  }

  const Vec3& position() const { return position_; }
  std::array<std::size_t, 2> button_presses() const { return button_presses_; }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "tick,x_cm,y_cm,z_cm\n";
    for (const auto& [tick, p] : trace_) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%lld,%.6f,%.6f,%.6f\n", static_cast<long long>(tick), p[0], p[1], p[2]);
      out << buf;
    }
  }

private:
  double dt_;
  Vec3 position_{0.0, 0.0, 0.0};
  std::array<std::size_t, 2> button_presses_{0, 0};
  std::vector<std::pair<std::int64_t, Vec3>> trace_;
};

struct ReplayOptions {
  double pace_hz = 0.0;  // 0 = as fast as possible
  PipelineConfig pipeline;
  std::vector<CommandSink*> sinks;
  std::size_t queue_capacity = 64;
};

struct ReplayResult {
  std::vector<CommandOutput> outputs;
  std::vector<MotionLabel> reference;  // window label per output, kMixedLabel for transitions
  StreamStats stats;

  std::vector<MotionLabel> predictions() const {
    std::vector<MotionLabel> p;
    p.reserve(outputs.size());
    for (const auto& o : outputs) p.push_back(o.predicted);
    return p;
  }
};

/// Streams one sequence through a fresh pipeline. A producer thread feeds
/// ticks through a bounded lossless queue, optionally paced in real time.
inline ReplayResult replay(const SessionRecording& rec, int sequence_index, const LdaModel& model,
                           const CommandMapping& mapping, const ReplayOptions& opt = {}) {
  check_layout(model, rec);
  if (sequence_index < 1 || sequence_index > static_cast<int>(rec.sequences.size())) {
    throw SplitError("sequence index " + std::to_string(sequence_index) + " out of range");
  }
  const auto& seq = rec.sequences[static_cast<std::size_t>(sequence_index - 1)];
  FusionConfig fusion = model.fusion;
  fusion.sample_rate_hz = rec.sample_rate_hz;
  LdaModel local = model;
  local.fusion = fusion;
  StreamPipeline pipe(local, mapping, calibrate_sequence(seq, rec.sensor_layout, fusion), opt.pipeline);

  BoundedQueue<TickInput> queue(opt.queue_capacity);
  const auto start = std::chrono::steady_clock::now();
  std::thread producer([&] {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      if (opt.pace_hz > 0.0) {
        std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                  std::chrono::duration<double>(static_cast<double>(t) / opt.pace_hz)));
      }
      TickInput in;
      in.tick = seq.samples[0][t].tick;
      for (std::size_t s = 0; s < seq.sensor_count(); ++s) in.samples.emplace_back(seq.samples[s][t]);
      try {
        queue.push(std::move(in));
      } catch (const std::logic_error&) {
        return;  // consumer gave up and closed the queue
      }
    }
    queue.close();
  });

  ReplayResult result;
  const std::size_t window = model.layout.window;
  std::size_t index = 0;
  try {
    while (auto in = queue.pop()) {
      const auto out = pipe.stream_step(*in);
      if (out) {
        for (auto* sink : opt.sinks) sink->consume(*out);
        result.outputs.push_back(*out);
        MotionLabel ref = seq.labels[index];
        for (std::size_t k = index + 1 - window; k < index; ++k) {
          if (seq.labels[k] != ref) {
            ref = kMixedLabel;
            break;
          }
        }
        result.reference.push_back(ref);
        result.stats.latencies_ms.push_back(out->latency_ms);
        if (opt.pace_hz > 0.0) {
          const auto due = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                       std::chrono::duration<double>(static_cast<double>(index + 1) / opt.pace_hz));
          if (std::chrono::steady_clock::now() > due) ++result.stats.late_ticks;
        }
      }
      ++index;
    }
  } catch (...) {
    queue.close();
    producer.join();
    throw;
  }
  producer.join();
  result.stats.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  auto& st = result.stats;
  st.windows = result.outputs.size();
  st.window_period_ms = 1000.0 * static_cast<double>(window_stride(model.layout.window, model.layout.overlap)) /
                        rec.sample_rate_hz;
  const auto pred = result.predictions();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (result.reference[i] == kMixedLabel) continue;
    ++st.scored_windows;
    if (pred[i] == result.reference[i]) ++st.correct;
  }
  st.max_consecutive_misclassifications = max_consecutive_errors(pred, result.reference);
  return result;
}

}  // namespace bomi
