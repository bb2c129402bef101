// SPDX-License-Identifier: Apache-2.0
// Command-line front end: synth, calibrate, train, eval, replay, experiments.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bomi/bomi.hpp"

namespace {

using namespace bomi;
namespace fs = std::filesystem;

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

/// Flag-to-config-key bindings. A value given on the command line wins;
/// otherwise the config file entry is used; otherwise the default stays.
class Layered {
public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& target, const std::string& key, const std::string& help) {
    auto* opt = app->add_option(flag, target, help + " [config: " + key + "]")->capture_default_str();
    bind(opt, key, [&target, key](const std::string& v) { target = convert<T>(key, v); });
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& target, const std::string& key, const std::string& help) {
    auto* opt = app->add_flag(flag, target, help + " [config: " + key + "]");
    bind(opt, key, [&target, key](const std::string& v) {
      if (v == "true" || v == "1") target = true;
      else if (v == "false" || v == "0") target = false;
      else throw ConfigError(key + ": expected true or false");
    });
    return opt;
  }

  void apply(const KeyValueConfig& cfg) const {
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) continue;
      if (const auto v = cfg.get(b.key)) b.set(*v);
    }
  }

private:
  struct Binding {
    CLI::Option* option;
    std::string key;
    std::function<void(const std::string&)> set;
  };

  template <typename T>
  static T convert(const std::string& key, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_floating_point_v<T>) {
      const auto d = parse_double(v);
      if (!d) throw ConfigError(key + ": not a number: " + v);
      return static_cast<T>(*d);
    } else {
      const auto i = parse_int(v);
      if (!i) throw ConfigError(key + ": not an integer: " + v);
      return static_cast<T>(*i);
    }
  }

  void bind(CLI::Option* opt, const std::string& key, std::function<void(const std::string&)> set) {
    bindings_.push_back({opt, key, std::move(set)});
  }

  std::vector<Binding> bindings_;
};

std::vector<int> parse_index_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(',', start);
    const auto piece = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
    const auto v = parse_int(piece);
    if (!v) throw ConfigError(what + ": bad index '" + piece + "'");
    out.push_back(static_cast<int>(*v));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

std::vector<double> parse_number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(',', start);
    const auto piece = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
    const auto v = parse_double(piece);
    if (!v) throw ConfigError(what + ": bad number '" + piece + "'");
    out.push_back(*v);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

struct CommonArgs {
  std::string config_path;
  std::string import_mapping;
};

struct FusionArgs {
  double alpha = 0.98;
  int calib_ticks = 60;
  double guard = 85.0;

  void add(Layered& l, CLI::App* app) {
    l.add(app, "--alpha", alpha, "fusion.alpha", "Complementary filter gyro weight");
    l.add(app, "--calib-ticks", calib_ticks, "fusion.calib_ticks", "Neutral calibration length in ticks");
    l.add(app, "--gimbal-guard", guard, "fusion.pitch_gimbal_guard_deg", "Pitch beyond which yaw is gyro-only (deg)");
  }
  FusionConfig config() const {
    FusionConfig c;
    c.alpha = alpha;
    c.calib_ticks = calib_ticks;
    c.pitch_gimbal_guard_deg = guard;
    return c;
  }
};

SessionRecording load_input(const std::string& path, const CommonArgs& common) {
  if (common.import_mapping.empty()) return load_recording(path);
  const auto mapping = ImportMapping::from_config(KeyValueConfig::load(common.import_mapping));
  return load_recording(path, format_from_path(path), mapping);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// -- synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string dataset_dir;
  int classes = 9;
  int sensors = 3;
  std::uint64_t seed = 42;
  double noise = 0.5;
  double spasm = 0.0;
  std::string spasm_classes = "1";
  int sequences = 3;
  std::string amplitudes = "1";
  double amplitude_scale = 1.0;
  double drift = 0.0;
  double mount_pitch = 0.0;
  double mount_roll = 0.0;
  double mount_yaw = 0.0;
  int random_motions = 0;
};

int run_synth(const SynthArgs& a) {
  if (!a.dataset_dir.empty()) {
    write_synthetic_dataset(a.dataset_dir, a.seed);
    std::cout << "wrote synthetic dataset tree to " << a.dataset_dir << "\n";
    return 0;
  }
  if (a.out.empty()) throw ConfigError("synth needs --out or --dataset");
  SynthConfig c;
  c.class_count = a.classes;
  c.sensor_count = a.sensors;
  c.seed = a.seed;
  c.noise_deg = a.noise;
  c.spasm_deg = a.spasm;
  c.spasm_classes.clear();
  for (int k : parse_index_list(a.spasm_classes, "--spasm-classes")) c.spasm_classes.insert(k);
  c.sequences = a.sequences;
  c.rep_amplitudes = parse_number_list(a.amplitudes, "--amplitudes");
  c.amplitude_scale = a.amplitude_scale;
  c.target_drift_deg = a.drift;
  c.mount_offset_deg = {a.mount_pitch, a.mount_roll, a.mount_yaw};
  const auto rec = a.random_motions > 0 ? synth_day_session(c, a.random_motions) : synth_session(c);
  save_recording(rec, a.out);
  std::size_t ticks = 0;
  for (const auto& s : rec.sequences) ticks += s.length();
  std::cout << "wrote " << a.out << ": " << rec.sequences.size() << " sequences, " << ticks << " ticks, "
            << rec.sensor_layout.size() << " sensors, " << rec.class_count << " classes\n";
  return 0;
}

// -- calibrate -----------------------------------------------------------------

struct CalibrateArgs {
  std::string recording;
  std::string out;
  int sequence = 1;
  FusionArgs fusion;
};

int run_calibrate(const CalibrateArgs& a, const CommonArgs& common) {
  const auto rec = load_input(a.recording, common);
  if (a.sequence < 1 || a.sequence > static_cast<int>(rec.sequences.size())) {
    throw SplitError("sequence " + std::to_string(a.sequence) + " out of range");
  }
  auto fc = a.fusion.config();
  fc.sample_rate_hz = rec.sample_rate_hz;
  const auto offset = calibrate_sequence(rec.sequences[static_cast<std::size_t>(a.sequence - 1)], rec.sensor_layout, fc);
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, e] : offset) {
    j[std::to_string(id)] = {{"pitch", e.pitch}, {"roll", e.roll}, {"yaw", e.yaw}};
    std::printf("sensor %d neutral: pitch %.3f roll %.3f yaw %.3f deg\n", id, e.pitch, e.roll, e.yaw);
  }
  if (!a.out.empty()) write_json(a.out, {{"calib_ticks", fc.calib_ticks}, {"sequence", a.sequence}, {"offsets", j}});
  return 0;
}

// -- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string recording;
  std::string out;
  std::string fv = "fv3";
  std::string train_seqs = "1,2";
  double shrinkage = kDefaultShrinkage;
  bool uniform_priors = false;
  std::string amplitude = "minmax";
  bool holdout_seq2 = false;
  FusionArgs fusion;
};

int run_train(const TrainArgs& a, const CommonArgs& common) {
  const auto rec = load_input(a.recording, common);
  TrainOptions opt;
  opt.kind = feature_kind_from_string(a.fv);
  opt.fit.shrinkage = a.shrinkage;
  opt.fit.uniform_priors = a.uniform_priors;
  if (a.amplitude == "minmax") opt.amplitude_mode = AmplitudeMode::MinMax;
  else if (a.amplitude == "percentile") opt.amplitude_mode = AmplitudeMode::Percentile;
  else throw ConfigError("--amplitude must be minmax or percentile");
  opt.fusion = a.fusion.config();
  opt = options_for(rec, opt);

  SplitSpec spec;
  spec.train_sequences = parse_index_list(a.train_seqs, "--train-seqs");
  spec.test_sequences.clear();
  if (a.holdout_seq2) {
    spec.train_sequences = {1};
    spec.test_sequences = {2};
  }
  const auto split = split_session(rec, spec);
  const auto model = train_model(rec, split.train, opt);
  save_model(model, a.out);

  std::printf("model written to %s\n", a.out.c_str());
  std::printf("feature %s, dim %zu, window %zu, overlap %zu, shrinkage %g\n", to_string(model.layout.kind).c_str(),
              model.dim(), model.layout.window, model.layout.overlap, model.shrinkage);
  std::printf("classes:");
  for (std::size_t j = 0; j < model.classes.size(); ++j) std::printf(" c%d=%zu", model.classes[j], model.class_counts[j]);
  std::printf("\ncovariance condition estimate %.3e\n", linalg::condition_estimate(model.cov_factor));
  if (a.holdout_seq2) {
    const auto r = evaluate(model, rec, split.test);
    std::printf("validation accuracy on sequence 2: %.2f%%\n", r.accuracy);
  }
  return 0;
}

// -- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string recording;
  std::string test_seqs = "3";
  std::string out;
};

int run_eval(const EvalArgs& a, const CommonArgs& common) {
  const auto model = load_model(a.model);
  const auto rec = load_input(a.recording, common);
  check_layout(model, rec);
  SplitSpec spec;
  spec.train_sequences.clear();
  spec.test_sequences = parse_index_list(a.test_seqs, "--test-seqs");
  const auto split = split_session(rec, spec);
  const auto r = evaluate(model, rec, split.test);
  std::printf("accuracy %.2f%% over %zu windows (%zu mixed windows excluded)\n", r.accuracy, r.windows, r.mixed_excluded);
  std::printf("errors %zu, predicting c0 %.1f%%, longest error run %zu windows\n", r.structure.errors,
              100.0 * r.structure.neutral_fraction, r.structure.max_run);
  for (int c : r.confusion.labels) {
    if (r.confusion.row_total(r.confusion.index(c))) std::printf("  c%d %.2f%%\n", c, r.confusion.diagonal_percent(c));
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_json(fs::path(a.out) / "eval.json", to_json(r));
    write_confusion_csv(r.confusion, fs::path(a.out) / "confusion.csv");
  }
  return 0;
}

// -- replay --------------------------------------------------------------------

struct ReplayArgs {
  std::string model;
  std::string recording;
  int sequence = 3;
  double pace = 60.0;
  std::string log;
  std::string stats;
  std::string arm;
  std::string commands;
  int smooth = 0;
};

int run_replay(const ReplayArgs& a, const CommonArgs& common, const KeyValueConfig& cfg) {
  const auto model = load_model(a.model);
  const auto rec = load_input(a.recording, common);
  CommandMapping mapping = CommandMapping::from_config(cfg, rec.class_count);
  if (!a.commands.empty()) mapping = CommandMapping::from_config(KeyValueConfig::load(a.commands), rec.class_count);
  if (a.smooth < 0) throw ConfigError("--smooth must be >= 0");

  ReplayOptions opt;
  opt.pace_hz = a.pace;
  if (a.smooth > 0) opt.pipeline.smoothing = SmoothingPolicy::majority(static_cast<std::size_t>(a.smooth));
  std::unique_ptr<CommandLogWriter> logger;
  if (!a.log.empty()) {
    logger = std::make_unique<CommandLogWriter>(a.log);
    opt.sinks.push_back(logger.get());
  }
  VirtualArm arm(1.0 / rec.sample_rate_hz);
  opt.sinks.push_back(&arm);

  const auto r = replay(rec, a.sequence, model, mapping, opt);
  const auto& st = r.stats;
  std::printf("windows %zu, accuracy %.2f%% over %zu labelled windows\n", st.windows, st.accuracy(), st.scored_windows);
  std::printf("max consecutive misclassifications %zu windows (%.1f ms)\n", st.max_consecutive_misclassifications,
              st.max_run_ms());
  std::printf("latency mean %.4f ms, p99 %.4f ms; late ticks %zu; wall clock %.2f s\n", st.mean_latency_ms(),
              st.latency_percentile_ms(0.99), st.late_ticks, st.wall_clock_s);
  const auto pos = arm.position();
  std::printf("virtual arm final position (%.2f, %.2f, %.2f) cm, button presses B1 %zu B2 %zu\n", pos[0], pos[1], pos[2],
              arm.button_presses()[0], arm.button_presses()[1]);
  if (!a.arm.empty()) arm.write_csv(a.arm);
  if (!a.stats.empty()) {
    write_json(a.stats, {{"windows", st.windows},
                         {"scored_windows", st.scored_windows},
                         {"accuracy", st.accuracy()},
                         {"max_run", st.max_consecutive_misclassifications},
                         {"max_run_ms", st.max_run_ms()},
                         {"window_period_ms", st.window_period_ms},
                         {"latency_mean_ms", st.mean_latency_ms()},
                         {"latency_p99_ms", st.latency_percentile_ms(0.99)},
                         {"late_ticks", st.late_ticks},
                         {"pace_hz", a.pace},
                         {"wall_clock_s", st.wall_clock_s}});
  }
  return 0;
}

// -- experiments ---------------------------------------------------------------

struct ExperimentArgs {
  std::string data;
  std::string out = "reports";
  double shrinkage = kDefaultShrinkage;
  FusionArgs fusion;
};

int run_experiments(const ExperimentArgs& a) {
  ExperimentOptions opt;
  opt.train.fit.shrinkage = a.shrinkage;
  opt.train.fusion = a.fusion.config();
  const auto start = std::chrono::steady_clock::now();
  const auto rep = run_all(a.data, a.out, opt);
  if (rep.fv) std::cout << fv_table(*rep.fv);
  if (rep.amplitude) std::cout << amplitude_table(*rep.amplitude);
  if (rep.multiday) std::cout << multiday_table(*rep.multiday);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  std::printf("reports written to %s in %.1f s\n", a.out.c_str(),
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return 0;
}

int exit_code(const Error& e) { return e.category() == ErrorCategory::Numerical ? kExitNumerical : kExitInput; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Body-machine interface toolkit: IMU fusion, LDA motion classification, replay"};
  app.require_subcommand(1);
  CommonArgs common;
  app.add_option("--config", common.config_path, "Flat key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--import-mapping", common.import_mapping, "Column mapping for foreign CSV layouts")
      ->check(CLI::ExistingFile);
  Layered layered;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic recording");
  s->add_option("--out", synth.out, "Output recording (.json or .csv)");
  s->add_option("--dataset", synth.dataset_dir, "Write a full synthetic dataset tree to this directory instead");
  layered.add(s, "--classes", synth.classes, "synth.classes", "Class count including c0 (2..9)");
  layered.add(s, "--sensors", synth.sensors, "synth.sensors", "Sensor count (1..6)");
  layered.add(s, "--seed", synth.seed, "synth.seed", "Random seed");
  layered.add(s, "--noise", synth.noise, "synth.noise_deg", "Angle noise standard deviation (deg)");
  layered.add(s, "--spasm", synth.spasm, "synth.spasm_deg", "Peak spasm excursion (deg)");
  layered.add(s, "--spasm-classes", synth.spasm_classes, "synth.spasm_classes", "Comma-separated classes with spasm");
  layered.add(s, "--sequences", synth.sequences, "synth.sequences", "Protocol sequences per session");
  layered.add(s, "--amplitudes", synth.amplitudes, "synth.rep_amplitudes", "Per-repetition amplitude factors");
  layered.add(s, "--amplitude-scale", synth.amplitude_scale, "synth.amplitude_scale", "Scale on every class target");
  layered.add(s, "--drift", synth.drift, "synth.target_drift_deg", "Class target drift (deg)");
  layered.add(s, "--mount-pitch", synth.mount_pitch, "synth.mount_pitch_deg", "Sensor mounting pitch offset (deg)");
  layered.add(s, "--mount-roll", synth.mount_roll, "synth.mount_roll_deg", "Sensor mounting roll offset (deg)");
  layered.add(s, "--mount-yaw", synth.mount_yaw, "synth.mount_yaw_deg", "Sensor mounting yaw offset (deg)");
  layered.add(s, "--random-motions", synth.random_motions, "synth.random_motions",
              "Two protocol sequences plus a random test sequence of this many motions");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Estimate the neutral pose of every sensor");
  c->add_option("--recording", cal.recording, "Input recording")->required();
  c->add_option("--sequence", cal.sequence, "1-based sequence")->capture_default_str();
  c->add_option("--out", cal.out, "Write offsets as JSON");
  cal.fusion.add(layered, c);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train an LDA model");
  t->add_option("--recording", train.recording, "Input recording")->required();
  t->add_option("--out", train.out, "Output model file")->required();
  layered.add(t, "--fv", train.fv, "feature.kind", "Feature vector: fv1, fv2 or fv3");
  layered.add(t, "--train-seqs", train.train_seqs, "split.train", "Comma-separated 1-based training sequences");
  layered.add(t, "--shrinkage", train.shrinkage, "lda.shrinkage", "Covariance shrinkage in [0,1]");
  layered.add_flag(t, "--uniform-priors", train.uniform_priors, "lda.uniform_priors", "Use equal class priors");
  layered.add(t, "--amplitude", train.amplitude, "amplitude.mode", "Amplitude range estimator: minmax or percentile");
  t->add_flag("--holdout-seq2", train.holdout_seq2, "Train on sequence 1 only and report validation on sequence 2");
  train.fusion.add(layered, t);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a model on test sequences");
  e->add_option("--model", ev.model, "Model file")->required();
  e->add_option("--recording", ev.recording, "Input recording")->required();
  layered.add(e, "--test-seqs", ev.test_seqs, "split.test", "Comma-separated 1-based test sequences");
  e->add_option("--out", ev.out, "Report directory");

  ReplayArgs rp;
  auto* r = app.add_subcommand("replay", "Stream a recorded sequence through the real-time pipeline");
  r->add_option("--model", rp.model, "Model file")->required();
  r->add_option("--recording", rp.recording, "Input recording")->required();
  layered.add(r, "--sequence", rp.sequence, "replay.sequence", "1-based sequence to replay");
  layered.add(r, "--pace", rp.pace, "replay.pace_hz", "Pacing rate in Hz, 0 = as fast as possible");
  r->add_option("--log", rp.log, "Command log CSV");
  r->add_option("--stats", rp.stats, "Stream statistics JSON");
  r->add_option("--arm", rp.arm, "Virtual arm trajectory CSV");
  r->add_option("--commands", rp.commands, "Command mapping file (class.N = CMD, v_max)");
  layered.add(r, "--smooth", rp.smooth, "smoothing.k", "Majority smoothing over the last k windows, 0 = none");

  ExperimentArgs ex;
  auto* x = app.add_subcommand("experiments", "Reproduce the evaluation studies");
  x->require_subcommand(1);
  auto* ra = x->add_subcommand("run-all", "Run every study found under a dataset tree");
  ra->add_option("--data", ex.data, "Dataset root")->required();
  ra->add_option("--out", ex.out, "Report directory")->capture_default_str();
  layered.add(ra, "--shrinkage", ex.shrinkage, "lda.shrinkage", "Covariance shrinkage in [0,1]");
  ex.fusion.add(layered, ra);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitInput;
  }

  try {
    KeyValueConfig cfg;
    if (!common.config_path.empty()) cfg = KeyValueConfig::load(common.config_path);
    layered.apply(cfg);
    if (s->parsed()) return run_synth(synth);
    if (c->parsed()) return run_calibrate(cal, common);
    if (t->parsed()) return run_train(train, common);
    if (e->parsed()) return run_eval(ev, common);
    if (r->parsed()) return run_replay(rp, common, cfg);
    if (ra->parsed()) return run_experiments(ex);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code(err);
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
