// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bomi/config.hpp"
#include "bomi/dataset.hpp"

namespace bomi {

enum class RecordingFormat { Csv, Json };

inline RecordingFormat format_from_path(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".csv") return RecordingFormat::Csv;
  return RecordingFormat::Json;
}

inline constexpr const char* kCsvHeader =
    "tick,sensor_id,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z,mag_x,mag_y,mag_z,label,sequence";

/// Column names and unit handling for importing third-party CSV files.
///
/// Keys: `column.<field>` for tick, sensor_id, acc_x..mag_z, label, sequence,
/// pitch, roll, yaw; `scale.acc`, `scale.gyro`, `scale.mag` (multiplied into
/// raw values, e.g. counts to g); `source` = raw | angles; `delimiter`;
/// `sample_rate_hz`; `class_count`; `sensor_id.default` and `sequence.default`
/// for files without those columns.
struct ImportMapping {
  std::map<std::string, std::string> columns;
  double acc_scale = 1.0;
  double gyro_scale = 1.0;
  double mag_scale = 1.0;
  bool angles_source = false;
  char delimiter = ',';
  std::optional<double> sample_rate_hz;
  std::optional<int> class_count;
  int default_sensor_id = 1;
  int default_sequence = 1;

  static inline const char* const kFields[] = {"tick",   "sensor_id", "acc_x",  "acc_y", "acc_z",
                                                "gyro_x", "gyro_y",    "gyro_z", "mag_x", "mag_y",
                                                "mag_z",  "label",     "sequence"};

  /// Identity mapping for the canonical schema.
  static ImportMapping canonical() {
    ImportMapping m;
    for (const char* f : kFields) m.columns[f] = f;
    return m;
  }

  static ImportMapping from_config(const KeyValueConfig& cfg) {
    ImportMapping m = canonical();
    for (const auto& [key, value] : cfg.values()) {
      if (key.rfind("column.", 0) == 0) m.columns[key.substr(7)] = value;
    }
    m.acc_scale = cfg.get_double("scale.acc", 1.0);
    m.gyro_scale = cfg.get_double("scale.gyro", 1.0);
    m.mag_scale = cfg.get_double("scale.mag", 1.0);
    const auto source = cfg.get_or("source", "raw");
    if (source != "raw" && source != "angles") throw ConfigError("source must be raw or angles");
    m.angles_source = source == "angles";
    if (m.angles_source) {
      for (const char* f : {"pitch", "roll", "yaw"}) {
        if (!m.columns.count(f)) m.columns[f] = f;
      }
    }
    const auto delim = cfg.get_or("delimiter", ",");
    if (delim == "\\t" || delim == "tab") m.delimiter = '\t';
    else if (delim.size() == 1) m.delimiter = delim[0];
    else throw ConfigError("delimiter must be a single character");
    if (cfg.contains("sample_rate_hz")) m.sample_rate_hz = cfg.get_double("sample_rate_hz", 60.0);
    if (cfg.contains("class_count")) m.class_count = static_cast<int>(cfg.get_int("class_count", 0));
    m.default_sensor_id = static_cast<int>(cfg.get_int("sensor_id.default", 1));
    m.default_sequence = static_cast<int>(cfg.get_int("sequence.default", 1));
    return m;
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

struct CsvRow {
  int sequence = 1;
  std::int64_t tick = 0;
  ImuSample sample;
  int label = 0;
  int line = 0;
};

/// Assembles tick-aligned sequences from flat rows.
inline SessionRecording assemble(std::vector<CsvRow> rows, SensorLayout layout, double rate, std::optional<int> class_count,
                                 const std::string& origin) {
  if (rows.empty()) throw ValidationError(origin + ": no data rows");
  if (layout.empty()) {
    std::set<int> ids;
    for (const auto& r : rows) ids.insert(r.sample.sensor_id);
    for (int id : ids) layout.push_back({id, ""});
  }
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < layout.size(); ++i) slot[layout[i].id] = i;

  // sequence -> tick -> (slot -> row index)
  std::map<int, std::map<std::int64_t, std::vector<int>>> grid;
  int max_label = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto it = slot.find(r.sample.sensor_id);
    if (it == slot.end()) {
      throw AlignmentError(origin + ":" + std::to_string(r.line) + ": sensor " + std::to_string(r.sample.sensor_id) +
                           " not in layout");
    }
    auto& cell = grid[r.sequence][r.tick];
    if (cell.empty()) cell.assign(layout.size(), -1);
    if (cell[it->second] >= 0) {
      throw AlignmentError(origin + ":" + std::to_string(r.line) + ": duplicate sample for sensor " +
                           std::to_string(r.sample.sensor_id) + " at tick " + std::to_string(r.tick));
    }
    cell[it->second] = static_cast<int>(i);
    max_label = std::max(max_label, r.label);
    if (r.label < 0) throw SchemaError(origin + ":" + std::to_string(r.line) + ": negative label");
  }

  SessionRecording rec;
  rec.sample_rate_hz = rate;
  rec.sensor_layout = std::move(layout);
  rec.class_count = class_count.value_or(max_label + 1);
  for (auto& [seq_index, ticks] : grid) {
    Sequence seq;
    seq.samples.resize(rec.sensor_layout.size());
    for (auto& [tick, cell] : ticks) {
      int label = -1;
      for (std::size_t s = 0; s < cell.size(); ++s) {
        if (cell[s] < 0) {
          throw AlignmentError(origin + ": sequence " + std::to_string(seq_index) + " tick " + std::to_string(tick) +
                               " is missing sensor " + std::to_string(rec.sensor_layout[s].id));
        }
        const auto& r = rows[static_cast<std::size_t>(cell[s])];
        if (label >= 0 && r.label != label) {
          throw SchemaError(origin + ":" + std::to_string(r.line) + ": label disagrees across sensors");
        }
        label = r.label;
        seq.samples[s].push_back(r.sample);
      }
      if (label >= rec.class_count) {
        throw SchemaError(origin + ": unknown label " + std::to_string(label) + " (class_count " +
                          std::to_string(rec.class_count) + ")");
      }
      seq.labels.push_back(label);
    }
    rec.sequences.push_back(std::move(seq));
  }
  validate_recording(rec);
  return rec;
}

inline void write_number(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  out << buf;
}

}  // namespace detail

/// Reads a CSV through a column mapping. Lines starting with `#` before the
/// header may carry `key=value` metadata (sample_rate_hz, class_count,
/// sensor.<id>=<location>).
inline SessionRecording read_csv(std::istream& in, const ImportMapping& mapping, const std::string& origin = "<csv>") {
  std::string line;
  int lineno = 0;
  KeyValueConfig meta;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      const auto kv = trim(body.substr(1));
      const auto eq = kv.find('=');
      if (eq != std::string_view::npos) meta.set(std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
      continue;
    }
    header_line = std::string(body);
    break;
  }
  if (header_line.empty()) throw ParseError(origin + ": missing header");
  header = detail::split_fields(header_line, mapping.delimiter);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[std::string(header[i])] = i;
  auto column = [&](const std::string& field) -> std::optional<std::size_t> {
    const auto m = mapping.columns.find(field);
    if (m == mapping.columns.end()) return std::nullopt;
    const auto it = index.find(m->second);
    if (it == index.end()) return std::nullopt;
    return it->second;
  };
  auto required = [&](const std::string& field) {
    const auto c = column(field);
    if (!c) throw SchemaError(origin + ": header lacks column for " + field);
    return *c;
  };

  const auto c_tick = required("tick");
  const auto c_label = required("label");
  const auto c_sensor = column("sensor_id");
  const auto c_seq = column("sequence");
  std::array<std::size_t, 9> c_raw{};
  std::array<std::optional<std::size_t>, 9> c_raw_opt{};
  static const char* const raw_fields[] = {"acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z", "mag_x", "mag_y", "mag_z"};
  for (std::size_t k = 0; k < 9; ++k) {
    c_raw_opt[k] = column(raw_fields[k]);
    // In angles mode only the gyro channels are needed.
    if (!mapping.angles_source || (k >= 3 && k < 6)) c_raw[k] = required(raw_fields[k]);
  }
  std::array<std::size_t, 3> c_ang{};
  if (mapping.angles_source) {
    c_ang = {required("pitch"), required("roll"), required("yaw")};
  }

  std::vector<detail::CsvRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto f = detail::split_fields(body, mapping.delimiter);
    if (f.size() != header.size()) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(f.size()));
    }
    auto num = [&](std::size_t c, const char* what) {
      const auto v = parse_double(f[c]);
      if (!v) throw ParseError(origin + ":" + std::to_string(lineno) + ": bad " + what + " value '" + std::string(f[c]) + "'");
      return *v;
    };
    auto integer = [&](std::size_t c, const char* what) {
      const auto v = parse_int(f[c]);
      if (!v) throw ParseError(origin + ":" + std::to_string(lineno) + ": bad " + what + " value '" + std::string(f[c]) + "'");
      return *v;
    };
    detail::CsvRow row;
    row.line = lineno;
    row.tick = integer(c_tick, "tick");
    row.label = static_cast<int>(integer(c_label, "label"));
    row.sequence = c_seq ? static_cast<int>(integer(*c_seq, "sequence")) : mapping.default_sequence;
    row.sample.sensor_id = c_sensor ? static_cast<int>(integer(*c_sensor, "sensor_id")) : mapping.default_sensor_id;
    row.sample.tick = row.tick;
    const double scales[3] = {mapping.acc_scale, mapping.gyro_scale, mapping.mag_scale};
    Vec3* targets[3] = {&row.sample.acc, &row.sample.gyro, &row.sample.mag};
    for (std::size_t k = 0; k < 9; ++k) {
      const bool needed = !mapping.angles_source || (k >= 3 && k < 6);
      if (needed || c_raw_opt[k]) {
        (*targets[k / 3])[k % 3] = num(needed ? c_raw[k] : *c_raw_opt[k], raw_fields[k]) * scales[k / 3];
      }
    }
    if (mapping.angles_source) {
      row.sample.fused = Euler{num(c_ang[0], "pitch"), num(c_ang[1], "roll"), num(c_ang[2], "yaw")};
      // Pitch outside +-90 means the source uses another angle convention.
      if (std::abs(row.sample.fused->pitch) > 90.0) {
        throw ValidationError(origin + ":" + std::to_string(lineno) + ": pitch " +
                              std::to_string(row.sample.fused->pitch) + " outside [-90, 90]; check the angle convention");
      }
    }
    rows.push_back(std::move(row));
  }

  SensorLayout layout;
  for (const auto& [key, value] : meta.values()) {
    if (key.rfind("sensor.", 0) == 0) {
      const auto id = parse_int(key.substr(7));
      if (!id) throw ParseError(origin + ": bad sensor metadata key " + key);
      layout.push_back({static_cast<int>(*id), value});
    }
  }
  std::sort(layout.begin(), layout.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (meta.contains("layout")) {
    // Explicit ordering, e.g. "layout=3,1,2".
    SensorLayout ordered;
    const std::string spec = *meta.get("layout");
    for (const auto tok : detail::split_fields(spec, ',')) {
      const auto id = parse_int(tok);
      if (!id) throw ParseError(origin + ": bad layout metadata");
      std::string loc;
      for (const auto& s : layout) if (s.id == *id) loc = s.location;
      ordered.push_back({static_cast<int>(*id), loc});
    }
    layout = std::move(ordered);
  }
  const double rate = mapping.sample_rate_hz.value_or(meta.get_double("sample_rate_hz", kDefaultSampleRateHz));
  std::optional<int> classes = mapping.class_count;
  if (!classes && meta.contains("class_count")) classes = static_cast<int>(meta.get_int("class_count", 0));
  return detail::assemble(std::move(rows), std::move(layout), rate, classes, origin);
}

inline void write_csv(std::ostream& out, const SessionRecording& rec) {
  validate_recording(rec);
  out << "# sample_rate_hz=";
  detail::write_number(out, rec.sample_rate_hz);
  out << "\n# class_count=" << rec.class_count << "\n# layout=";
  for (std::size_t i = 0; i < rec.sensor_layout.size(); ++i) out << (i ? "," : "") << rec.sensor_layout[i].id;
  out << "\n";
  for (const auto& s : rec.sensor_layout) out << "# sensor." << s.id << "=" << s.location << "\n";
  out << kCsvHeader << "\n";
  for (std::size_t q = 0; q < rec.sequences.size(); ++q) {
    const auto& seq = rec.sequences[q];
    for (std::size_t t = 0; t < seq.length(); ++t) {
      for (std::size_t s = 0; s < seq.sensor_count(); ++s) {
        const auto& smp = seq.samples[s][t];
        out << smp.tick << ',' << smp.sensor_id;
        for (const auto* v : {&smp.acc, &smp.gyro, &smp.mag}) {
          for (double x : *v) {
            out << ',';
            detail::write_number(out, x);
          }
        }
        out << ',' << seq.labels[t] << ',' << (q + 1) << '\n';
      }
    }
  }
}

inline nlohmann::json recording_to_json(const SessionRecording& rec) {
  validate_recording(rec);
  nlohmann::json j;
  j["format"] = "bomi-recording";
  j["version"] = 1;
  j["sample_rate_hz"] = rec.sample_rate_hz;
  j["class_count"] = rec.class_count;
  j["sensor_layout"] = nlohmann::json::array();
  for (const auto& s : rec.sensor_layout) j["sensor_layout"].push_back({{"id", s.id}, {"location", s.location}});
  j["sequences"] = nlohmann::json::array();
  for (const auto& seq : rec.sequences) {
    nlohmann::json js;
    js["labels"] = seq.labels;
    js["sensors"] = nlohmann::json::object();
    for (std::size_t s = 0; s < seq.sensor_count(); ++s) {
      auto arr = nlohmann::json::array();
      for (const auto& smp : seq.samples[s]) {
        auto row = nlohmann::json::array({smp.tick, smp.acc[0], smp.acc[1], smp.acc[2], smp.gyro[0], smp.gyro[1],
                                          smp.gyro[2], smp.mag[0], smp.mag[1], smp.mag[2]});
        if (smp.fused) {
          row.push_back(smp.fused->pitch);
          row.push_back(smp.fused->roll);
          row.push_back(smp.fused->yaw);
        }
        arr.push_back(std::move(row));
      }
      js["sensors"][std::to_string(rec.sensor_layout[s].id)] = std::move(arr);
    }
    j["sequences"].push_back(std::move(js));
  }
  return j;
}

inline SessionRecording recording_from_json(const nlohmann::json& j, const std::string& origin = "<json>") {
  try {
    SessionRecording rec;
    rec.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    rec.class_count = j.at("class_count").get<int>();
    for (const auto& s : j.at("sensor_layout")) {
      rec.sensor_layout.push_back({s.at("id").get<int>(), s.value("location", std::string{})});
    }
    for (const auto& js : j.at("sequences")) {
      Sequence seq;
      seq.labels = js.at("labels").get<std::vector<int>>();
      const auto& sensors = js.at("sensors");
      for (const auto& info : rec.sensor_layout) {
        const auto key = std::to_string(info.id);
        if (!sensors.contains(key)) throw AlignmentError(origin + ": sequence lacks sensor " + key);
        std::vector<ImuSample> stream;
        for (const auto& row : sensors.at(key)) {
          if (row.size() != 10 && row.size() != 13) throw SchemaError(origin + ": sample rows need 10 or 13 values");
          ImuSample smp;
          smp.sensor_id = info.id;
          smp.tick = row[0].get<std::int64_t>();
          for (int k = 0; k < 3; ++k) {
            smp.acc[k] = row[1 + k].get<double>();
            smp.gyro[k] = row[4 + k].get<double>();
            smp.mag[k] = row[7 + k].get<double>();
          }
          if (row.size() == 13) smp.fused = Euler{row[10].get<double>(), row[11].get<double>(), row[12].get<double>()};
          stream.push_back(smp);
        }
        seq.samples.push_back(std::move(stream));
      }
      rec.sequences.push_back(std::move(seq));
    }
    validate_recording(rec);
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(origin + ": " + e.what());
  }
}

inline SessionRecording load_recording(const std::string& path, RecordingFormat format,
                                       const ImportMapping& mapping = ImportMapping::canonical()) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  if (format == RecordingFormat::Csv) return read_csv(in, mapping, path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return recording_from_json(j, path);
}

inline SessionRecording load_recording(const std::string& path) { return load_recording(path, format_from_path(path)); }

inline void save_recording(const SessionRecording& rec, const std::string& path, RecordingFormat format) {
  validate_recording(rec);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  if (format == RecordingFormat::Csv) write_csv(out, rec);
  else out << recording_to_json(rec).dump();
  if (!out) throw IoError("write failed for " + path);
}

inline void save_recording(const SessionRecording& rec, const std::string& path) {
  save_recording(rec, path, format_from_path(path));
}

}  // namespace bomi
