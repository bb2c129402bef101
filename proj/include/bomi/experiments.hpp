// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bomi/dataset.hpp"
#include "bomi/dataset_io.hpp"
#include "bomi/lda.hpp"
#include "bomi/processing.hpp"
#include "bomi/synth.hpp"

namespace bomi {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<int> labels;
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(std::vector<int> classes = {})
      : labels(std::move(classes)), counts(labels.size(), std::vector<std::size_t>(labels.size(), 0)) {}

  std::size_t index(int cls) const {
    const auto it = std::find(labels.begin(), labels.end(), cls);
    if (it == labels.end()) throw MappingError("class " + std::to_string(cls) + " is not in the confusion matrix");
    return static_cast<std::size_t>(it - labels.begin());
  }

  void add(int truth, int predicted) { ++counts[index(truth)][index(predicted)]; }

  std::size_t total() const {
    std::size_t s = 0;
    for (const auto& r : counts)
      for (auto v : r) s += v;
    return s;
  }
  std::size_t trace() const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) s += counts[i][i];
    return s;
  }
  std::size_t row_total(std::size_t r) const {
    std::size_t s = 0;
    for (auto v : counts[r]) s += v;
    return s;
  }

  double accuracy() const { return total() ? 100.0 * static_cast<double>(trace()) / static_cast<double>(total()) : 0.0; }

  /// Row-normalised percentages. Empty rows stay all zero.
  std::vector<std::vector<double>> percentages() const {
    std::vector<std::vector<double>> p(counts.size(), std::vector<double>(counts.size(), 0.0));
    for (std::size_t r = 0; r < counts.size(); ++r) {
      const auto n = row_total(r);
      if (n == 0) continue;
      for (std::size_t c = 0; c < counts.size(); ++c) p[r][c] = 100.0 * static_cast<double>(counts[r][c]) / static_cast<double>(n);
    }
    return p;
  }

  double diagonal_percent(int cls) const {
    const auto i = index(cls);
    const auto n = row_total(i);
    return n ? 100.0 * static_cast<double>(counts[i][i]) / static_cast<double>(n) : 0.0;
  }
};

struct ConfusedPair {
  int truth = 0;
  int predicted = 0;
  std::size_t count = 0;
  double row_percent = 0.0;
};

struct MisclassificationStructure {
  std::size_t errors = 0;
  double neutral_fraction = 0.0;  // share of errors predicting c0
  std::size_t max_run = 0;
  std::vector<ConfusedPair> top_pairs;  // most frequent first
};

/// Error structure of aligned prediction and label streams (in stream order).
inline MisclassificationStructure misclassification_structure(const std::vector<MotionLabel>& predicted,
                                                              const std::vector<MotionLabel>& labels,
                                                              std::size_t top = 5) {
  if (predicted.size() != labels.size()) throw DimensionError("prediction and label streams differ in length");
  MisclassificationStructure s;
  std::map<std::pair<int, int>, std::size_t> pairs;
  std::map<int, std::size_t> row;
  std::size_t to_neutral = 0, run = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kMixedLabel) continue;
    ++row[labels[i]];
    if (predicted[i] == labels[i]) {
      run = 0;
      continue;
    }
    ++s.errors;
    if (predicted[i] == kNeutralClass) ++to_neutral;
    ++pairs[{labels[i], predicted[i]}];
    s.max_run = std::max(s.max_run, ++run);
  }
  s.neutral_fraction = s.errors ? static_cast<double>(to_neutral) / static_cast<double>(s.errors) : 0.0;
  for (const auto& [key, n] : pairs) {
    s.top_pairs.push_back({key.first, key.second, n, 100.0 * static_cast<double>(n) / static_cast<double>(row[key.first])});
  }
  std::stable_sort(s.top_pairs.begin(), s.top_pairs.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  if (s.top_pairs.size() > top) s.top_pairs.resize(top);
  return s;
}

struct EvalResult {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::size_t windows = 0;
  std::size_t mixed_excluded = 0;
  std::vector<MotionLabel> predictions;
  std::vector<MotionLabel> labels;
  std::vector<int> sequence_index;
  MisclassificationStructure structure;
};

inline EvalResult evaluate_predictions(const std::vector<MotionLabel>& predicted, const std::vector<MotionLabel>& labels,
                                       std::vector<int> classes) {
  if (predicted.size() != labels.size()) throw DimensionError("prediction and label streams differ in length");
  if (labels.empty()) throw DataError("empty test set");
  for (auto c : labels) classes.push_back(c);
  for (auto c : predicted) classes.push_back(c);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  EvalResult r;
  r.confusion = ConfusionMatrix(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) r.confusion.add(labels[i], predicted[i]);
  r.accuracy = r.confusion.accuracy();
  r.windows = labels.size();
  r.predictions = predicted;
  r.labels = labels;
  r.structure = misclassification_structure(predicted, labels);
  return r;
}

inline EvalResult evaluate(const LdaModel& model, const WindowSet& test) {
  if (test.size() == 0) throw DataError("empty test set");
  std::vector<MotionLabel> pred;
  pred.reserve(test.size());
  for (const auto& f : test.features) pred.push_back(predict(model, f));
  auto r = evaluate_predictions(pred, test.labels, model.classes);
  r.mixed_excluded = test.mixed_excluded;
  r.sequence_index = test.sequence_index;
  return r;
}

/// Windows of the given sequences prepared the way `model` was trained.
inline WindowSet model_windows(const LdaModel& model, const SessionRecording& rec, const std::vector<IndexedSequence>& seqs) {
  check_layout(model, rec);
  return windows_for(rec, seqs, model.layout, model.class_sensors, model.fusion);
}

inline EvalResult evaluate(const LdaModel& model, const SessionRecording& rec, const std::vector<IndexedSequence>& seqs) {
  return evaluate(model, model_windows(model, rec, seqs));
}

/// Class -> sensor id used for amplitude, following the default motion
/// dictionary position by position over the recording's layout.
inline ClassSensorMap default_class_sensors(const SessionRecording& rec) {
  ClassSensorMap m;
  const auto ids = sensor_ids(rec.sensor_layout);
  m.fallback = ids.front();
  for (const auto& [cls, slot] : synth_class_sensor_map(rec.class_count, static_cast<int>(ids.size()))) {
    m.sensor_for_class[cls] = ids[static_cast<std::size_t>(slot - 1)];
  }
  return m;
}

struct ExperimentOptions {
  TrainOptions train;
  SplitSpec split;
  std::vector<FeatureKind> kinds{FeatureKind::FV1, FeatureKind::FV2, FeatureKind::FV3};
  bool parallel = true;
};

inline TrainOptions options_for(const SessionRecording& rec, TrainOptions base) {
  if (base.class_sensors.sensor_for_class.empty()) base.class_sensors = default_class_sensors(rec);
  return base;
}

struct FvResult {
  FeatureKind kind = FeatureKind::FV3;
  std::size_t dim = 0;
  std::size_t train_windows = 0;
  EvalResult eval;
};

struct ParticipantReport {
  std::string name;
  int class_count = 0;
  std::size_t sensor_count = 0;
  std::vector<FvResult> results;

  const FvResult& result(FeatureKind k) const {
    for (const auto& r : results)
      if (r.kind == k) return r;
    throw ConfigError("feature kind " + to_string(k) + " was not evaluated");
  }
};

/// Trains on the train split and tests on the test split for each feature kind.
inline ParticipantReport run_participant(const SessionRecording& rec, const std::string& name, const ExperimentOptions& opt) {
  const auto split = split_session(rec, opt.split);
  ParticipantReport p;
  p.name = name;
  p.class_count = rec.class_count;
  p.sensor_count = rec.sensor_layout.size();
  for (auto kind : opt.kinds) {
    auto t = options_for(rec, opt.train);
    t.kind = kind;
    const auto model = train_model(rec, split.train, t);
    FvResult r;
    r.kind = kind;
    r.dim = model.dim();
    for (auto c : model.class_counts) r.train_windows += c;
    r.eval = evaluate(model, rec, split.test);
    p.results.push_back(std::move(r));
  }
  return p;
}

struct FvComparisonReport {
  std::vector<ParticipantReport> participants;
  std::vector<std::string> warnings;
};

inline std::string participant_name(int i) { return "P" + std::to_string(i); }

/// `root/P<i>/session.json` for i = 1..5 (CSV `session.csv` is also accepted).
inline std::optional<std::filesystem::path> participant_file(const std::filesystem::path& root, int i) {
  for (const char* f : {"session.json", "session.csv"}) {
    const auto p = root / participant_name(i) / f;
    if (std::filesystem::exists(p)) return p;
  }
  return std::nullopt;
}

inline FvComparisonReport run_fv_comparison(const std::filesystem::path& root, const ExperimentOptions& opt = {},
                                            int participants = 5) {
  FvComparisonReport rep;
  std::vector<std::pair<std::string, std::future<ParticipantReport>>> jobs;
  for (int i = 1; i <= participants; ++i) {
    const auto file = participant_file(root, i);
    if (!file) {
      rep.warnings.push_back("participant " + participant_name(i) + " not found under " + root.string() + ", skipped");
      continue;
    }
    const auto path = file->string();
    const auto name = participant_name(i);
    jobs.emplace_back(name, std::async(opt.parallel ? std::launch::async : std::launch::deferred,
                                       [path, name, opt] { return run_participant(load_recording(path), name, opt); }));
  }
  for (auto& [name, job] : jobs) rep.participants.push_back(job.get());
  return rep;
}

struct AmplitudeReport {
  EvalResult sae_on_mae;  // both models tested on the amplitude-varying sequence
  EvalResult mae_on_mae;
  EvalResult sae_on_sae;  // both models tested on the single-amplitude sequence
  EvalResult mae_on_sae;
};

/// SAE- and MAE-trained models on each session's test split.
inline AmplitudeReport run_amplitude_experiment(const SessionRecording& sae, const SessionRecording& mae,
                                                const ExperimentOptions& opt = {}) {
  auto ts = options_for(sae, opt.train);
  auto tm = options_for(mae, opt.train);
  const auto ss = split_session(sae, opt.split);
  const auto sm = split_session(mae, opt.split);
  const auto sae_model = train_model(sae, ss.train, ts);
  const auto mae_model = train_model(mae, sm.train, tm);
  AmplitudeReport r;
  r.sae_on_mae = evaluate(sae_model, mae, sm.test);
  r.mae_on_mae = evaluate(mae_model, mae, sm.test);
  r.sae_on_sae = evaluate(sae_model, sae, ss.test);
  r.mae_on_sae = evaluate(mae_model, sae, ss.test);
  return r;
}

inline AmplitudeReport run_amplitude_experiment(const std::filesystem::path& dir, const ExperimentOptions& opt = {}) {
  for (const char* f : {"sae.json", "mae.json"}) {
    if (!std::filesystem::exists(dir / f)) throw IoError("missing session " + (dir / f).string());
  }
  return run_amplitude_experiment(load_recording((dir / "sae.json").string()), load_recording((dir / "mae.json").string()),
                                  opt);
}

struct DayResult {
  int day = 0;
  EvalResult day1_model;
  EvalResult own_model;
};

struct MultidayReport {
  std::vector<DayResult> days;
};

/// Each day: train on sequences 1-2, test on sequence 3 (the random-motion recording).
inline MultidayReport run_multiday(const std::vector<SessionRecording>& days, const ExperimentOptions& opt = {}) {
  if (days.empty()) throw IoError("no day sessions");
  const SplitSpec split{{1, 2}, {3}};
  std::vector<LdaModel> models;
  for (const auto& d : days) models.push_back(train_model(d, split_session(d, split).train, options_for(d, opt.train)));
  MultidayReport rep;
  for (std::size_t i = 0; i < days.size(); ++i) {
    const auto test = split_session(days[i], split).test;
    DayResult r;
    r.day = static_cast<int>(i) + 1;
    r.day1_model = evaluate(models.front(), days[i], test);
    r.own_model = evaluate(models[i], days[i], test);
    rep.days.push_back(std::move(r));
  }
  return rep;
}

inline MultidayReport run_multiday(const std::filesystem::path& dir, int day_count = 5, const ExperimentOptions& opt = {}) {
  std::vector<SessionRecording> days;
  for (int d = 1; d <= day_count; ++d) {
    const auto p = dir / ("day" + std::to_string(d) + ".json");
    if (!std::filesystem::exists(p)) throw IoError("missing day session " + p.string());
    days.push_back(load_recording(p.string()));
  }
  return run_multiday(days, opt);
}

// -- report output -------------------------------------------------------------

inline nlohmann::json to_json(const ConfusionMatrix& m) {
  return {{"labels", m.labels}, {"counts", m.counts}, {"percent", m.percentages()}};
}

inline nlohmann::json to_json(const MisclassificationStructure& s) {
  auto pairs = nlohmann::json::array();
  for (const auto& p : s.top_pairs) {
    pairs.push_back({{"true", p.truth}, {"predicted", p.predicted}, {"count", p.count}, {"row_percent", p.row_percent}});
  }
  return {{"errors", s.errors}, {"neutral_fraction", s.neutral_fraction}, {"max_run", s.max_run}, {"top_pairs", pairs}};
}

inline nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (int c : r.confusion.labels) {
    if (r.confusion.row_total(r.confusion.index(c))) per_class[std::to_string(c)] = r.confusion.diagonal_percent(c);
  }
  return {{"accuracy", r.accuracy},       {"windows", r.windows},
          {"mixed_excluded", r.mixed_excluded}, {"per_class_accuracy", per_class},
          {"confusion", to_json(r.confusion)}, {"misclassification", to_json(r.structure)}};
}

inline nlohmann::json to_json(const FvComparisonReport& rep) {
  auto ps = nlohmann::json::array();
  for (const auto& p : rep.participants) {
    nlohmann::json fv = nlohmann::json::object();
    for (const auto& r : p.results) {
      auto e = to_json(r.eval);
      e["dim"] = r.dim;
      e["train_windows"] = r.train_windows;
      fv[to_string(r.kind)] = e;
    }
    ps.push_back({{"name", p.name}, {"class_count", p.class_count}, {"sensor_count", p.sensor_count}, {"results", fv}});
  }
  return {{"participants", ps}, {"warnings", rep.warnings}};
}

inline nlohmann::json to_json(const AmplitudeReport& r) {
  return {{"sae_on_mae", to_json(r.sae_on_mae)},
          {"mae_on_mae", to_json(r.mae_on_mae)},
          {"sae_on_sae", to_json(r.sae_on_sae)},
          {"mae_on_sae", to_json(r.mae_on_sae)}};
}

inline nlohmann::json to_json(const MultidayReport& r) {
  auto days = nlohmann::json::array();
  for (const auto& d : r.days) {
    days.push_back({{"day", d.day}, {"day1_model", to_json(d.day1_model)}, {"own_model", to_json(d.own_model)}});
  }
  return {{"days", days}};
}

inline std::string format_fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fv_table(const FvComparisonReport& rep) {
  std::ostringstream out;
  out << "participant  FV1      FV2      FV3\n";
  for (const auto& p : rep.participants) {
    char line[128];
    auto acc = [&](FeatureKind k) {
      for (const auto& r : p.results)
        if (r.kind == k) return format_fixed(r.eval.accuracy);
      return std::string("-");
    };
    std::snprintf(line, sizeof line, "%-12s %-8s %-8s %-8s\n", p.name.c_str(), acc(FeatureKind::FV1).c_str(),
                  acc(FeatureKind::FV2).c_str(), acc(FeatureKind::FV3).c_str());
    out << line;
  }
  for (const auto& w : rep.warnings) out << "warning: " << w << "\n";
  return out.str();
}

inline std::string amplitude_table(const AmplitudeReport& r) {
  std::ostringstream out;
  out << "test set            SAE model  MAE model\n";
  out << "multi-amplitude     " << format_fixed(r.sae_on_mae.accuracy) << "      " << format_fixed(r.mae_on_mae.accuracy) << "\n";
  out << "single-amplitude    " << format_fixed(r.sae_on_sae.accuracy) << "      " << format_fixed(r.mae_on_sae.accuracy) << "\n";
  out << "SAE errors predicting c0: " << format_fixed(100.0 * r.sae_on_mae.structure.neutral_fraction, 1) << "%\n";
  return out.str();
}

inline std::string multiday_table(const MultidayReport& r) {
  std::ostringstream out;
  out << "day  day-1 model  own model\n";
  for (const auto& d : r.days) {
    char line[96];
    std::snprintf(line, sizeof line, "%-4d %-12s %s\n", d.day, format_fixed(d.day1_model.accuracy).c_str(),
                  format_fixed(d.own_model.accuracy).c_str());
    out << line;
  }
  return out.str();
}

/// Counts plus a percentage block, one row per true class.
inline void write_confusion_csv(const ConfusionMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "true\\predicted";
  for (int c : m.labels) out << ",c" << c;
  out << "\n";
  for (std::size_t r = 0; r < m.labels.size(); ++r) {
    out << "c" << m.labels[r];
    for (auto v : m.counts[r]) out << "," << v;
    out << "\n";
  }
  out << "\npercent";
  for (int c : m.labels) out << ",c" << c;
  out << "\n";
  const auto p = m.percentages();
  for (std::size_t r = 0; r < m.labels.size(); ++r) {
    out << "c" << m.labels[r];
    for (auto v : p[r]) out << "," << format_fixed(v);
    out << "\n";
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

struct RunAllReport {
  std::optional<FvComparisonReport> fv;
  std::optional<AmplitudeReport> amplitude;
  std::optional<MultidayReport> multiday;
  std::vector<std::string> warnings;
};

/// Dataset tree:
///   root/P1..P5/session.json   three-sequence protocol sessions
///   root/amplitude/{sae,mae}.json
///   root/multiday/day1..day5.json
/// Absent parts are skipped with a warning.
inline RunAllReport run_all(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                            const ExperimentOptions& opt = {}) {
  if (!std::filesystem::is_directory(root)) throw IoError("dataset directory " + root.string() + " does not exist");
  std::filesystem::create_directories(out_dir);
  RunAllReport rep;
  nlohmann::json all = nlohmann::json::object();
  std::string text;

  auto fv = run_fv_comparison(root, opt);
  rep.warnings.insert(rep.warnings.end(), fv.warnings.begin(), fv.warnings.end());
  if (!fv.participants.empty()) {
    all["fv_comparison"] = to_json(fv);
    text += "Feature vector comparison (window accuracy, %)\n" + fv_table(fv) + "\n";
    for (const auto& p : fv.participants)
      for (const auto& r : p.results)
        write_confusion_csv(r.eval.confusion, out_dir / ("confusion_" + p.name + "_" + to_string(r.kind) + ".csv"));
    rep.fv = std::move(fv);
  }

  const auto amp_dir = root / "amplitude";
  if (std::filesystem::exists(amp_dir / "sae.json") && std::filesystem::exists(amp_dir / "mae.json")) {
    auto a = run_amplitude_experiment(amp_dir, opt);
    all["amplitude"] = to_json(a);
    text += "Amplitude study\n" + amplitude_table(a) + "\n";
    write_confusion_csv(a.sae_on_mae.confusion, out_dir / "confusion_amplitude_SAE.csv");
    write_confusion_csv(a.mae_on_mae.confusion, out_dir / "confusion_amplitude_MAE.csv");
    rep.amplitude = std::move(a);
  } else {
    rep.warnings.push_back("amplitude sessions not found under " + amp_dir.string() + ", skipped");
  }

  const auto day_dir = root / "multiday";
  if (std::filesystem::exists(day_dir / "day1.json")) {
    int n = 0;
    while (std::filesystem::exists(day_dir / ("day" + std::to_string(n + 1) + ".json"))) ++n;
    auto m = run_multiday(day_dir, n, opt);
    all["multiday"] = to_json(m);
    text += "Multi-day study (window accuracy, %)\n" + multiday_table(m) + "\n";
    rep.multiday = std::move(m);
  } else {
    rep.warnings.push_back("day sessions not found under " + day_dir.string() + ", skipped");
  }

  all["warnings"] = rep.warnings;
  for (const auto& w : rep.warnings) text += "warning: " + w + "\n";
  write_text(out_dir / "report.json", all.dump(2) + "\n");
  write_text(out_dir / "report.txt", text);
  return rep;
}

// -- synthetic dataset tree ----------------------------------------------------

/// Participant profiles for the synthetic tree. P1-P3: 9 classes, 3 sensors.
/// P4: c0..c5 on 2 sensors with spasm on c1. P5: c0..c5 on 2 sensors at half range.
inline SynthConfig synthetic_participant(int i, std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed + static_cast<std::uint64_t>(i) * 1000;
  c.subject_seed = static_cast<std::uint64_t>(i);
  switch (i) {
    case 4:
      c.class_count = 6;
      c.sensor_count = 2;
      c.spasm_deg = 10.0;
      c.spasm_classes = {1};
      break;
    case 5:
      c.class_count = 6;
      c.sensor_count = 2;
      c.amplitude_scale = 0.5;
      c.noise_deg = 1.0;
      break;
    default:
      break;
  }
  return c;
}

inline SynthConfig synthetic_amplitude(bool multi, std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed + (multi ? 7001 : 7002);
  c.subject_seed = 6;
  if (multi) c.rep_amplitudes = {0.4, 1.0, 1.6};
  return c;
}

/// Day d (1-based) shifts every calibrated motion target by
/// `offset_per_day * (d - 1)` degrees along a fixed per-class direction.
/// A rigid mounting rotation alone is removed by the daily neutral
/// calibration, so the offset is applied to the motion targets.
inline SynthConfig synthetic_day(int d, std::uint64_t seed, double offset_per_day = 2.0) {
  SynthConfig c;
  c.seed = seed + 9000 + static_cast<std::uint64_t>(d);
  c.subject_seed = 7;
  c.target_drift_deg = offset_per_day * (d - 1);
  return c;
}

inline void write_synthetic_dataset(const std::filesystem::path& root, std::uint64_t seed = 42, int days = 5) {
  for (int i = 1; i <= 5; ++i) {
    std::filesystem::create_directories(root / participant_name(i));
    save_recording(synth_session(synthetic_participant(i, seed)), (root / participant_name(i) / "session.json").string());
  }
  std::filesystem::create_directories(root / "amplitude");
  save_recording(synth_session(synthetic_amplitude(false, seed)), (root / "amplitude" / "sae.json").string());
  save_recording(synth_session(synthetic_amplitude(true, seed)), (root / "amplitude" / "mae.json").string());
  std::filesystem::create_directories(root / "multiday");
  for (int d = 1; d <= days; ++d) {
    save_recording(synth_day_session(synthetic_day(d, seed)), (root / "multiday" / ("day" + std::to_string(d) + ".json")).string());
  }
}

}  // namespace bomi
