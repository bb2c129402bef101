// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

namespace bomi {
namespace {

using test::TempDir;

struct Fixture {
  SessionRecording rec;
  LdaModel model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.rec = synth_session(test::quick_config(21));
    TrainOptions opt;
    opt.class_sensors.sensor_for_class = synth_class_sensor_map(x.rec.class_count, 3);
    x.model = train_model(x.rec, split_session(x.rec).train, opt);
    return x;
  }();
  return f;
}

/// Offline sliding-window predictions over every window, mixed included.
std::vector<MotionLabel> offline_predictions(const SessionRecording& rec, int seq, const LdaModel& m) {
  const auto stream = fuse_sequence(rec.sequences[static_cast<std::size_t>(seq - 1)], rec.sensor_layout, m.fusion);
  std::vector<MotionLabel> out;
  for (const auto& w : make_windows(stream, m.layout.window, m.layout.overlap)) {
    out.push_back(predict(m, extract_features(w, m.layout)));
  }
  return out;
}

TickInput tick_of(const Sequence& seq, std::size_t t) {
  TickInput in;
  in.tick = seq.samples[0][t].tick;
  for (std::size_t s = 0; s < seq.sensor_count(); ++s) in.samples.emplace_back(seq.samples[s][t]);
  return in;
}

TEST(Mapping, HalfSpeedForwardAtTwentyMax) {
  const auto out = map_command(1, 0.5, CommandMapping::joystick());
  EXPECT_EQ(out.command, DeviceCommand::F);
  EXPECT_DOUBLE_EQ(out.velocity, 10.0);
}

TEST(Mapping, NeutralHasNoSpeed) {
  for (double nu : {0.0, 0.3, 1.0, 7.0}) {
    const auto out = map_command(0, nu, CommandMapping::joystick());
    EXPECT_EQ(out.command, DeviceCommand::Neutral);
    EXPECT_EQ(out.velocity, 0.0);
    EXPECT_EQ(out.nu, 0.0);
  }
}

TEST(Mapping, JoystickOrderAndVelocityBounds) {
  const DeviceCommand expect[] = {DeviceCommand::Neutral, DeviceCommand::F,  DeviceCommand::B,
                                  DeviceCommand::R,       DeviceCommand::L,  DeviceCommand::Rr,
                                  DeviceCommand::Lr,      DeviceCommand::B1, DeviceCommand::B2};
  const auto m = CommandMapping::joystick();
  for (int c = 0; c < 9; ++c) {
    EXPECT_EQ(m.table.at(c), expect[c]);
    for (double nu : {-1.0, 0.0, 0.25, 1.0, 3.0}) {
      const auto out = map_command(c, nu, m);
      EXPECT_GE(out.velocity, 0.0);
      EXPECT_LE(out.velocity, m.v_max);
      EXPECT_EQ(out.command == DeviceCommand::Neutral, c == 0);
    }
  }
}

TEST(Mapping, ButtonHeldForThirtyWindowsFiresOnce) {
  CommandMapper mapper(CommandMapping::joystick());
  int events = 0;
  for (int i = 0; i < 30; ++i) {
    const auto out = mapper.map(7, 0.8);
    EXPECT_EQ(out.command, DeviceCommand::B1);
    EXPECT_EQ(out.velocity, 0.0);
    events += out.triggered;
  }
  EXPECT_EQ(events, 1);
}

TEST(Mapping, ButtonEventsNeverExceedRuns) {
  CommandMapper mapper(CommandMapping::joystick());
  const std::vector<int> stream{0, 7, 7, 0, 7, 8, 8, 7, 7, 7, 1, 8};
  int events = 0;
  for (int c : stream) events += mapper.map(c, 0.5).triggered;
  EXPECT_EQ(events, 5);
}

TEST(Mapping, UnmappedClassAndBadTables) {
  auto m = CommandMapping::joystick(4);
  EXPECT_THROW(map_command(5, 0.1, m), MappingError);
  EXPECT_THROW(m.check_covers({0, 1, 5}), MappingError);
  m.table[2] = DeviceCommand::Neutral;
  EXPECT_THROW(m.validate(), MappingError);
  auto v = CommandMapping::joystick();
  v.v_max = 0;
  EXPECT_THROW(v.validate(), MappingError);
}

TEST(Mapping, FromConfigOverridesTable) {
  const auto cfg = KeyValueConfig::from_string("v_max = 12\nclass.1 = B\nclass.2 = F\n");
  const auto m = CommandMapping::from_config(cfg);
  EXPECT_EQ(m.v_max, 12.0);
  EXPECT_EQ(m.table.at(1), DeviceCommand::B);
  EXPECT_EQ(m.table.at(3), DeviceCommand::R);
  EXPECT_THROW(CommandMapping::from_config(KeyValueConfig::from_string("class.3 = UP\n")), MappingError);
  EXPECT_THROW(CommandMapping::from_config(KeyValueConfig::from_string("class.3 = NEUTRAL\n")), MappingError);
}

TEST(Smoothing, NoneIsIdentity) {
  const std::vector<int> s{0, 1, 1, 3, 0, 2};
  EXPECT_EQ(smooth(SmoothingPolicy::none(), s), s);
}

TEST(Smoothing, MajorityOfThree) {
  const auto out = smooth(SmoothingPolicy::majority(3), {1, 1, 0, 1});
  EXPECT_EQ(out.back(), 1);
  EXPECT_EQ(smooth(SmoothingPolicy::majority(3), {1, 0, 0, 2, 2}), (std::vector<int>{1, 1, 0, 0, 2}));
}

TEST(Smoothing, AllNeutralStaysNeutral) {
  const std::vector<int> zeros(40, 0);
  for (std::size_t k : {1u, 2u, 5u, 9u}) EXPECT_EQ(smooth(SmoothingPolicy::majority(k), zeros), zeros);
}

TEST(Smoothing, TieKeepsPreviousOutput) {
  // k = 2: history {1, 2} ties, so the previous output 1 is kept.
  EXPECT_EQ(smooth(SmoothingPolicy::majority(2), {1, 2, 2}), (std::vector<int>{1, 1, 2}));
  EXPECT_THROW(SmoothingPolicy::majority(0), ConfigError);
}

TEST(Stream, FirstSevenTicksProduceNothing) {
  const auto& f = fixture();
  const auto& seq = f.rec.sequences[2];
  StreamPipeline pipe(f.model, CommandMapping::joystick(), calibrate_sequence(seq, f.rec.sensor_layout, f.model.fusion));
  for (std::size_t t = 0; t < 7; ++t) EXPECT_FALSE(pipe.stream_step(tick_of(seq, t)).has_value()) << t;
  for (std::size_t t = 7; t < 100; ++t) {
    const auto out = pipe.stream_step(tick_of(seq, t));
    ASSERT_TRUE(out.has_value()) << t;
    EXPECT_EQ(out->tick, static_cast<std::int64_t>(t));
    EXPECT_GE(out->latency_ms, 0.0);
  }
}

TEST(Stream, NeutralStreamGivesNeutralCommands) {
  const auto& f = fixture();
  // Sensors held still at their mounting poses.
  Sequence seq;
  seq.samples.resize(3);
  for (std::size_t t = 0; t < 200; ++t) {
    for (int s = 0; s < 3; ++s) {
      const auto base = synth_detail::mounting_pose(s);
      seq.samples[static_cast<std::size_t>(s)].push_back(
          test::static_sample(s + 1, static_cast<std::int64_t>(t), base.pitch, base.roll, base.yaw));
    }
    seq.labels.push_back(0);
  }
  StreamPipeline pipe(f.model, CommandMapping::joystick(), calibrate_sequence(seq, f.rec.sensor_layout, f.model.fusion));
  std::size_t outputs = 0;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    if (const auto out = pipe.stream_step(tick_of(seq, t))) {
      ++outputs;
      EXPECT_EQ(out->predicted, 0);
      EXPECT_EQ(out->command, DeviceCommand::Neutral);
      EXPECT_EQ(out->nu, 0.0);
    }
  }
  EXPECT_EQ(outputs, 193u);
}

TEST(Stream, ReplayEqualsOfflinePredictions) {
  const auto& f = fixture();
  for (int seq = 1; seq <= 3; ++seq) {
    const auto r = replay(f.rec, seq, f.model, CommandMapping::joystick());
    EXPECT_EQ(r.predictions(), offline_predictions(f.rec, seq, f.model)) << "sequence " << seq;
    EXPECT_EQ(r.stats.windows, window_count(f.rec.sequences[0].length()));
  }
}

TEST(Stream, ReplayReferenceAndAccuracyMatchOfflineEvaluator) {
  const auto& f = fixture();
  const auto r = replay(f.rec, 3, f.model, CommandMapping::joystick());
  const auto w = windows_for(f.rec, split_session(f.rec).test, f.model.layout, f.model.class_sensors, f.model.fusion);
  EXPECT_EQ(r.stats.scored_windows, w.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < w.size(); ++i) correct += predict(f.model, w.features[i]) == w.labels[i];
  EXPECT_EQ(r.stats.correct, correct);
  EXPECT_GT(r.stats.accuracy(), 95.0);
}

TEST(Stream, PacedAndFastModesAgree) {
  const auto& f = fixture();
  auto rec = f.rec;
  // A short sequence keeps the paced run brief.
  auto& seq = rec.sequences[0];
  const std::size_t n = 240;
  seq.labels.resize(n);
  for (auto& s : seq.samples) s.resize(n);
  ReplayOptions paced;
  paced.pace_hz = 240.0;
  const auto a = replay(rec, 1, f.model, CommandMapping::joystick(), paced);
  const auto b = replay(rec, 1, f.model, CommandMapping::joystick());
  EXPECT_EQ(a.predictions(), b.predictions());
  EXPECT_EQ(a.stats.correct, b.stats.correct);
  EXPECT_EQ(a.stats.max_consecutive_misclassifications, b.stats.max_consecutive_misclassifications);
  EXPECT_GE(a.stats.wall_clock_s, (n - 1) / 240.0 - 1e-3);
}

TEST(Stream, LayoutMismatchRejected) {
  const auto& f = fixture();
  auto rec = f.rec;
  rec.sensor_layout[2].id = 5;
  for (auto& seq : rec.sequences)
    for (auto& s : seq.samples[2]) s.sensor_id = 5;
  EXPECT_THROW(replay(rec, 3, f.model, CommandMapping::joystick()), LayoutError);
  EXPECT_THROW(replay(f.rec, 4, f.model, CommandMapping::joystick()), SplitError);
}

TEST(Stream, MissingTickRepeatsLastFrameAndFlags) {
  const auto& f = fixture();
  const auto& seq = f.rec.sequences[2];
  StreamPipeline pipe(f.model, CommandMapping::joystick(), calibrate_sequence(seq, f.rec.sensor_layout, f.model.fusion));
  for (std::size_t t = 0; t < 20; ++t) ASSERT_FALSE(t >= 7 && pipe.stream_step(tick_of(seq, t))->gap);
  const auto before = pipe.current_window();
  // Ticks 20 and 21 are lost.
  const auto out = pipe.stream_step(tick_of(seq, 22));
  ASSERT_TRUE(out.has_value());
  EXPECT_TRUE(out->gap);
  const auto w = pipe.current_window();
  const std::size_t S = 3;
  for (std::size_t s = 0; s < S; ++s) {
    EXPECT_EQ(w.at(5, s), before.at(7, s));
    EXPECT_EQ(w.at(6, s), before.at(7, s));
  }
  EXPECT_FALSE(pipe.stream_step(tick_of(seq, 23))->gap);
}

TEST(Stream, MissingSampleReusesSensorFrame) {
  const auto& f = fixture();
  const auto& seq = f.rec.sequences[2];
  StreamPipeline pipe(f.model, CommandMapping::joystick(), calibrate_sequence(seq, f.rec.sensor_layout, f.model.fusion));
  for (std::size_t t = 0; t < 10; ++t) pipe.stream_step(tick_of(seq, t));
  const auto before = pipe.current_window();
  auto in = tick_of(seq, 10);
  in.samples[1].reset();
  const auto out = pipe.stream_step(in);
  ASSERT_TRUE(out.has_value());
  EXPECT_TRUE(out->gap);
  EXPECT_EQ(pipe.current_window().at(7, 1), before.at(7, 1));
}

TEST(Stream, FirstTickWithoutSampleIsDataError) {
  const auto& f = fixture();
  const auto& seq = f.rec.sequences[2];
  StreamPipeline pipe(f.model, CommandMapping::joystick(), calibrate_sequence(seq, f.rec.sensor_layout, f.model.fusion));
  auto in = tick_of(seq, 0);
  in.samples[0].reset();
  EXPECT_THROW(pipe.stream_step(in), DataError);
}

TEST(Stats, MaxRunOfHandBuiltLog) {
  // Wrong-label runs of 3, 18 and 5 windows separated by correct windows.
  std::vector<int> ref, pred;
  for (int run : {3, 18, 5}) {
    for (int i = 0; i < run; ++i) ref.push_back(1), pred.push_back(0);
    for (int i = 0; i < 10; ++i) ref.push_back(1), pred.push_back(1);
  }
  StreamStats st;
  st.max_consecutive_misclassifications = max_consecutive_errors(pred, ref);
  EXPECT_EQ(st.max_consecutive_misclassifications, 18u);
  EXPECT_NEAR(st.max_run_ms(), 300.0, 1e-9);
}

TEST(Stats, MixedReferenceIsSkipped) {
  const std::vector<int> pred{0, 0, 0, 0, 0};
  const std::vector<int> ref{1, kMixedLabel, 1, 0, 1};
  EXPECT_EQ(max_consecutive_errors(pred, ref), 2u);
  EXPECT_THROW(max_consecutive_errors(pred, {1}), DimensionError);
}

TEST(Sinks, CommandLogCsvHasHeaderAndOneRowPerOutput) {
  const auto& f = fixture();
  TempDir dir;
  ReplayResult r;
  {
    CommandLogWriter log(dir.file("log.csv"));
    ReplayOptions opt;
    opt.sinks = {&log};
    r = replay(f.rec, 3, f.model, CommandMapping::joystick(), opt);
  }
  std::ifstream in(dir.file("log.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tick,timestamp_ms,class,nu,command,velocity,latency_ms");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (rows == 0) {
      std::istringstream fields(line);
      std::string tick;
      std::getline(fields, tick, ',');
      EXPECT_EQ(tick, "7");
    }
    ++rows;
  }
  EXPECT_EQ(rows, r.outputs.size());
}

TEST(Sinks, VirtualArmIntegratesAxes) {
  VirtualArm arm(0.5);
  auto out = [](DeviceCommand c, double v, bool trig = false) {
    CommandOutput o;
    o.command = c;
    o.velocity = v;
    o.triggered = trig;
    return o;
  };
  arm.consume(out(DeviceCommand::F, 10));   // y -5
  arm.consume(out(DeviceCommand::L, 4));    // x +2
  arm.consume(out(DeviceCommand::Rr, 2));   // z +1
  arm.consume(out(DeviceCommand::B, 2));    // y +1
  arm.consume(out(DeviceCommand::R, 2));    // x -1
  arm.consume(out(DeviceCommand::Lr, 6));   // z -3
  arm.consume(out(DeviceCommand::B1, 0, true));
  arm.consume(out(DeviceCommand::B1, 0, false));
  arm.consume(out(DeviceCommand::B2, 0, true));
  EXPECT_DOUBLE_EQ(arm.position()[0], 1.0);
  EXPECT_DOUBLE_EQ(arm.position()[1], -4.0);
  EXPECT_DOUBLE_EQ(arm.position()[2], -2.0);
  EXPECT_EQ(arm.button_presses()[0], 1u);
  EXPECT_EQ(arm.button_presses()[1], 1u);
}

TEST(Queue, LosslessOrderedHandoff) {
  BoundedQueue<int> q(3);
  std::thread producer([&] {
    for (int i = 0; i < 1000; ++i) q.push(i);
    q.close();
  });
  int expect = 0;
  while (auto v = q.pop()) ASSERT_EQ(*v, expect++);
  producer.join();
  EXPECT_EQ(expect, 1000);
}

TEST(Ring, OverwritesOldest) {
  RingBuffer<int> r(3);
  for (int i = 0; i < 5; ++i) r.push(i);
  EXPECT_TRUE(r.full());
  EXPECT_EQ(r[0], 2);
  EXPECT_EQ(r.back(), 4);
}

}  // namespace
}  // namespace bomi
