// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bomi/error.hpp"
#include "bomi/features.hpp"
#include "bomi/fusion.hpp"
#include "bomi/linalg.hpp"

namespace bomi {

inline constexpr int kModelVersion = 1;
inline constexpr double kDefaultShrinkage = 1e-3;

struct FitOptions {
  double shrinkage = kDefaultShrinkage;
  bool uniform_priors = false;
};

/// Linear discriminant model with a shared, shrunk covariance.
///
/// Scores are delta_j(x) = x^T S^-1 mu_j - mu_j^T S^-1 mu_j / 2 + log pi_j,
/// evaluated from weights cached at fit/load time.
struct LdaModel {
  std::vector<int> classes;  // ascending
  std::vector<std::size_t> class_counts;
  std::vector<std::vector<double>> means;
  linalg::Matrix cov_factor;  // lower Cholesky factor of the shrunk covariance
  double shrinkage = kDefaultShrinkage;
  std::vector<double> log_priors;
  bool uniform_priors = false;

  FeatureLayout layout;
  AmplitudeRange amplitude;
  ClassSensorMap class_sensors;
  FusionConfig fusion;
  std::map<std::string, std::string> metadata;

  // Derived.
  std::vector<std::vector<double>> weights;
  std::vector<double> biases;

  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  std::size_t class_index(int cls) const {
    const auto it = std::find(classes.begin(), classes.end(), cls);
    if (it == classes.end()) throw MappingError("class " + std::to_string(cls) + " is not in the model");
    return static_cast<std::size_t>(it - classes.begin());
  }

  /// Recomputes the cached discriminant weights from means, factor and priors.
  void prepare() {
    weights.clear();
    biases.clear();
    for (std::size_t j = 0; j < means.size(); ++j) {
      auto w = linalg::cholesky_solve(cov_factor, means[j]);
      biases.push_back(-0.5 * linalg::dot(means[j], w) + log_priors[j]);
      weights.push_back(std::move(w));
    }
  }
};

using FeatureMatrix = std::vector<FeatureVector>;

inline LdaModel fit_lda(const FeatureMatrix& x, std::span<const int> y, const FitOptions& opt = {}) {
  if (x.size() != y.size()) throw DimensionError("feature rows and labels differ in count");
  if (x.empty()) throw DataError("no training examples");
  if (!(opt.shrinkage >= 0.0 && opt.shrinkage <= 1.0)) throw DataError("shrinkage must lie in [0,1]");
  const std::size_t d = x.front().size();
  if (d == 0) throw DimensionError("zero-dimensional features");
  for (const auto& row : x) {
    if (row.size() != d) throw DimensionError("feature rows have different dimensions");
  }

  std::map<int, std::size_t> index;
  for (int label : y) index.emplace(label, 0);
  if (index.size() < 2) throw DataError("need at least two classes");
  LdaModel m;
  for (auto& [label, idx] : index) {
    idx = m.classes.size();
    m.classes.push_back(label);
  }
  const std::size_t k = m.classes.size();
  m.class_counts.assign(k, 0);
  m.means.assign(k, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto j = index[y[i]];
    ++m.class_counts[j];
    auto& mu = m.means[j];
    for (std::size_t c = 0; c < d; ++c) mu[c] += x[i][c];
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (m.class_counts[j] < 2) {
      throw DataError("class " + std::to_string(m.classes[j]) + " has fewer than two examples");
    }
    for (auto& v : m.means[j]) v /= static_cast<double>(m.class_counts[j]);
  }

  // Pooled within-class scatter, upper triangle then mirrored.
  linalg::Matrix cov(d, d);
  std::vector<double> centred(d);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& mu = m.means[index[y[i]]];
    for (std::size_t c = 0; c < d; ++c) centred[c] = x[i][c] - mu[c];
    for (std::size_t r = 0; r < d; ++r) {
      const double cr = centred[r];
      if (cr == 0.0) continue;
      auto row = cov.row(r);
      for (std::size_t c = r; c < d; ++c) row[c] += cr * centred[c];
    }
  }
  const double dof = static_cast<double>(x.size() - k);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = r; c < d; ++c) {
      cov(r, c) /= dof;
      cov(c, r) = cov(r, c);
    }
  }

  const double lambda = opt.shrinkage;
  const double target = cov.trace() / static_cast<double>(d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) cov(r, c) *= (1.0 - lambda);
    cov(r, r) += lambda * target;
  }
  try {
    m.cov_factor = linalg::cholesky(cov);
  } catch (const SingularityError& e) {
    throw SingularityError(e.detail() + "; pooled covariance is rank deficient, use shrinkage > 0");
  }

  m.shrinkage = lambda;
  m.uniform_priors = opt.uniform_priors;
  for (std::size_t j = 0; j < k; ++j) {
    const double p = opt.uniform_priors ? 1.0 / static_cast<double>(k)
                                        : static_cast<double>(m.class_counts[j]) / static_cast<double>(x.size());
    m.log_priors.push_back(std::log(p));
  }
  m.prepare();
  return m;
}

inline std::vector<double> predict_scores(const LdaModel& m, std::span<const double> x) {
  if (x.size() != m.dim()) {
    throw DimensionError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                         std::to_string(m.dim()));
  }
  std::vector<double> scores(m.classes.size());
  for (std::size_t j = 0; j < scores.size(); ++j) scores[j] = linalg::dot(x, m.weights[j]) + m.biases[j];
  return scores;
}

/// Argmax of the scores. Exact ties go to c0, then to the lowest class.
inline MotionLabel pick_class(const LdaModel& m, std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[best]) {
      best = j;
    } else if (scores[j] == scores[best] && m.classes[j] == kNeutralClass) {
      best = j;
    }
  }
  return m.classes[best];
}

inline MotionLabel predict(const LdaModel& m, std::span<const double> x) { return pick_class(m, predict_scores(m, x)); }

// -- serialization ----------------------------------------------------------

inline nlohmann::json model_to_json(const LdaModel& m) {
  nlohmann::json j;
  j["format"] = "bomi-lda";
  j["version"] = kModelVersion;
  j["classes"] = m.classes;
  j["class_counts"] = m.class_counts;
  j["means"] = m.means;
  j["dim"] = m.dim();
  std::vector<double> tri;
  for (std::size_t r = 0; r < m.cov_factor.rows(); ++r)
    for (std::size_t c = 0; c <= r; ++c) tri.push_back(m.cov_factor(r, c));
  j["cov_factor_lower"] = tri;
  j["shrinkage"] = m.shrinkage;
  j["log_priors"] = m.log_priors;
  j["uniform_priors"] = m.uniform_priors;
  j["feature"] = {{"kind", to_string(m.layout.kind)},
                  {"sensor_ids", m.layout.sensor_ids},
                  {"window", m.layout.window},
                  {"overlap", m.layout.overlap}};
  auto ranges = nlohmann::json::array();
  for (const auto& [cls, r] : m.amplitude.classes) {
    ranges.push_back({{"class", cls}, {"sensor_id", r.sensor_id}, {"min", r.min}, {"max", r.max}});
  }
  j["amplitude"] = {{"mode", m.amplitude.mode == AmplitudeMode::MinMax ? "minmax" : "percentile"}, {"ranges", ranges}};
  nlohmann::json cs = nlohmann::json::object();
  for (const auto& [cls, id] : m.class_sensors.sensor_for_class) cs[std::to_string(cls)] = id;
  j["class_sensor"] = {{"fallback", m.class_sensors.fallback}, {"map", cs}};
  j["fusion"] = {{"alpha", m.fusion.alpha},
                 {"calib_ticks", m.fusion.calib_ticks},
                 {"pitch_gimbal_guard_deg", m.fusion.pitch_gimbal_guard_deg},
                 {"sample_rate_hz", m.fusion.sample_rate_hz}};
  j["metadata"] = m.metadata;
  return j;
}

inline LdaModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string{}) != "bomi-lda") throw CorruptFileError("not a model file");
  const int version = j.value("version", -1);
  if (version != kModelVersion) {
    throw VersionError("model version " + std::to_string(version) + ", expected " + std::to_string(kModelVersion));
  }
  try {
    LdaModel m;
    m.classes = j.at("classes").get<std::vector<int>>();
    m.class_counts = j.at("class_counts").get<std::vector<std::size_t>>();
    m.means = j.at("means").get<std::vector<std::vector<double>>>();
    const auto d = j.at("dim").get<std::size_t>();
    const auto tri = j.at("cov_factor_lower").get<std::vector<double>>();
    if (m.classes.size() < 2 || m.means.size() != m.classes.size() || m.class_counts.size() != m.classes.size()) {
      throw CorruptFileError("class tables disagree in size");
    }
    for (const auto& mu : m.means) {
      if (mu.size() != d) throw CorruptFileError("mean vector has the wrong dimension");
    }
    if (tri.size() != d * (d + 1) / 2) throw CorruptFileError("covariance factor has the wrong size");
    m.cov_factor = linalg::Matrix(d, d);
    std::size_t p = 0;
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c <= r; ++c) m.cov_factor(r, c) = tri[p++];
    for (std::size_t r = 0; r < d; ++r) {
      if (!(m.cov_factor(r, r) > 0.0)) throw CorruptFileError("covariance factor has a non-positive pivot");
    }
    m.shrinkage = j.at("shrinkage").get<double>();
    m.log_priors = j.at("log_priors").get<std::vector<double>>();
    if (m.log_priors.size() != m.classes.size()) throw CorruptFileError("prior table has the wrong size");
    m.uniform_priors = j.at("uniform_priors").get<bool>();
    const auto& f = j.at("feature");
    m.layout.kind = feature_kind_from_string(f.at("kind").get<std::string>());
    m.layout.sensor_ids = f.at("sensor_ids").get<std::vector<int>>();
    m.layout.window = f.at("window").get<std::size_t>();
    m.layout.overlap = f.at("overlap").get<std::size_t>();
    if (m.layout.dim() != d) throw CorruptFileError("feature descriptor does not match the model dimension");
    const auto& a = j.at("amplitude");
    m.amplitude.mode = a.at("mode").get<std::string>() == "percentile" ? AmplitudeMode::Percentile : AmplitudeMode::MinMax;
    for (const auto& r : a.at("ranges")) {
      m.amplitude.classes[r.at("class").get<int>()] = {r.at("min").get<double>(), r.at("max").get<double>(),
                                                        r.at("sensor_id").get<int>()};
    }
    const auto& cs = j.at("class_sensor");
    m.class_sensors.fallback = cs.at("fallback").get<int>();
    for (const auto& [key, value] : cs.at("map").items()) m.class_sensors.sensor_for_class[std::stoi(key)] = value.get<int>();
    const auto& fu = j.at("fusion");
    m.fusion.alpha = fu.at("alpha").get<double>();
    m.fusion.calib_ticks = fu.at("calib_ticks").get<int>();
    m.fusion.pitch_gimbal_guard_deg = fu.at("pitch_gimbal_guard_deg").get<double>();
    m.fusion.sample_rate_hz = fu.at("sample_rate_hz").get<double>();
    m.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    m.prepare();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(e.what());
  }
}

inline void save_model(const LdaModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << model_to_json(m).dump(1);
  if (!out) throw IoError("write failed for " + path);
}

inline LdaModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptFileError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace bomi
