#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evodef/plant.hpp"

namespace evodef::store {

// 17 significant digits: exact double round trip through text.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double_strict(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": not a number: '" + s + "'");
  }
}

inline std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for digest: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// --- trace CSV ---------------------------------------------------------------

inline std::string trace_csv_header() {
  std::string h = "tick";
  for (std::size_t i = 0; i < plant::kActuatorCount; ++i) h += ",a_" + std::to_string(i);
  for (std::size_t i = 0; i < plant::kSensorCount; ++i) h += ",s_" + std::to_string(i);
  h += ",label";
  return h;
}

// One row per tick plus a metadata sidecar (<path>.meta.json) holding the
// episode id, injection tick, outcome, attack vector, and seed.
inline void write_trace(const plant::Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  out << trace_csv_header() << "\n";
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const plant::TraceRow& row = trace.rows[i];
    out << row.tick;
    for (double a : row.actuators) out << "," << format_double(a);
    for (double s : row.sensors) out << "," << format_double(s);
    out << "," << int(trace.labels[i]) << "\n";
  }
  out.close();

  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["episode_id"] = trace.episode_id;
  meta["injection_tick"] = trace.injection_tick;
  meta["outcome"] = plant::to_string(trace.outcome);
  meta["attack"] = trace.attack;
  meta["initial_drift"] = trace.initial_drift;
  meta["seed"] = trace.seed;
  meta["shutdown_tick"] = trace.shutdown_tick;
  std::ofstream mout(path + ".meta.json");
  if (!mout) throw std::runtime_error("cannot write trace metadata: " + path + ".meta.json");
  mout << meta.dump(1) << "\n";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline plant::Trace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trace: " + path);
  const std::size_t expected_fields = 2 + plant::kActuatorCount + plant::kSensorCount;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (line != trace_csv_header())
    throw std::runtime_error(path + ":1: unexpected header '" + line + "'");

  plant::Trace trace;
  int lineno = 1;
  int last_valid = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    std::string context = path + ":" + std::to_string(lineno);
    if (fields.size() != expected_fields)
      throw std::runtime_error(context + ": expected " + std::to_string(expected_fields) +
                               " fields, got " + std::to_string(fields.size()) +
                               " (last valid line " + std::to_string(last_valid) + ")");
    plant::TraceRow row;
    try {
      std::size_t used = 0;
      row.tick = std::stol(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument(fields[0]);
    } catch (const std::exception&) {
      throw std::runtime_error(context + ": bad tick '" + fields[0] + "' (last valid line " +
                               std::to_string(last_valid) + ")");
    }
    std::size_t f = 1;
    for (std::size_t i = 0; i < plant::kActuatorCount; ++i)
      row.actuators.push_back(parse_double_strict(fields[f++], context));
    for (std::size_t i = 0; i < plant::kSensorCount; ++i)
      row.sensors.push_back(parse_double_strict(fields[f++], context));
    const std::string& lab = fields[f];
    if (lab != "0" && lab != "1")
      throw std::runtime_error(context + ": label must be 0 or 1, got '" + lab + "'");
    trace.rows.push_back(std::move(row));
    trace.labels.push_back(lab == "1" ? 1 : 0);
    last_valid = lineno;
  }

  std::ifstream min(path + ".meta.json");
  if (!min) throw std::runtime_error("cannot read trace metadata: " + path + ".meta.json");
  nlohmann::json meta;
  try {
    min >> meta;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ".meta.json: " + e.what());
  }
  trace.episode_id = meta.at("episode_id").get<std::string>();
  trace.injection_tick = meta.at("injection_tick").get<long>();
  trace.outcome = plant::outcome_from_string(meta.at("outcome").get<std::string>());
  trace.attack = meta.at("attack").get<std::vector<double>>();
  trace.initial_drift = meta.at("initial_drift").get<std::vector<double>>();
  trace.seed = meta.at("seed").get<std::uint64_t>();
  trace.shutdown_tick = meta.at("shutdown_tick").get<long>();
  return trace;
}

// --- manifest ----------------------------------------------------------------

struct ManifestFile {
  std::string path;  // relative to the manifest's directory
  std::string digest;
  std::string role;
};

struct CampaignManifest {
  int format_version = 1;
  std::string command;
  std::string created;  // informational timestamp; the only non-reproducible field
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ManifestFile> files;
  nlohmann::json extra = nlohmann::json::object();
};

inline std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline nlohmann::json to_json(const CampaignManifest& m) {
  nlohmann::json j;
  j["format_version"] = m.format_version;
  j["command"] = m.command;
  j["created"] = m.created;
  j["seed"] = m.seed;
  j["config"] = m.config;
  j["files"] = nlohmann::json::array();
  for (const auto& f : m.files)
    j["files"].push_back({{"path", f.path}, {"digest", f.digest}, {"role", f.role}});
  j["extra"] = m.extra;
  return j;
}

inline CampaignManifest manifest_from_json(const nlohmann::json& j) {
  CampaignManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != 1) throw std::runtime_error("manifest: unsupported format version");
  m.command = j.at("command").get<std::string>();
  m.created = j.at("created").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config = j.at("config");
  for (const auto& f : j.at("files"))
    m.files.push_back(ManifestFile{f.at("path").get<std::string>(),
                                   f.at("digest").get<std::string>(),
                                   f.at("role").get<std::string>()});
  m.extra = j.at("extra");
  return m;
}

inline void write_manifest(const CampaignManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << to_json(m).dump(1) << "\n";
}

inline CampaignManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest: " + path);
  nlohmann::json j;
  in >> j;
  return manifest_from_json(j);
}

// Checks that every file the manifest references exists and still hashes to
// the recorded digest. Returns one message per violation.
inline std::vector<std::string> verify_manifest(const CampaignManifest& m,
                                                const std::string& base_dir) {
  std::vector<std::string> errors;
  for (const auto& f : m.files) {
    std::filesystem::path p = std::filesystem::path(base_dir) / f.path;
    if (!std::filesystem::exists(p)) {
      errors.push_back("missing file: " + f.path);
      continue;
    }
    std::string digest = file_digest(p.string());
    if (digest != f.digest)
      errors.push_back("digest mismatch for " + f.path + ": recorded " + f.digest + ", found " +
                       digest);
  }
  return errors;
}

// --- metrics -----------------------------------------------------------------

struct SampleMetrics {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;

  std::size_t total() const { return tp + tn + fp + fn; }
};

inline SampleMetrics compute_sample_metrics(const std::vector<std::uint8_t>& predictions,
                                            const std::vector<std::uint8_t>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("compute_sample_metrics: length mismatch");
  SampleMetrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] && predictions[i]) ++m.tp;
    else if (labels[i] && !predictions[i]) ++m.fn;
    else if (!labels[i] && predictions[i]) ++m.fp;
    else ++m.tn;
  }
  std::size_t n = m.total();
  m.accuracy = n ? static_cast<double>(m.tp + m.tn) / static_cast<double>(n) : 0.0;
  m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  // F1 = 0 by convention when precision + recall = 0
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
  return m;
}

struct EndToEndMetrics {
  std::size_t n_effective = 0, n_ineffective = 0;
  std::size_t detected = 0, false_alarms = 0;
  double detection_rate = 0.0, false_alarm_rate = 0.0;
};

// decisions[i] is true when the defender declared an attack; outcomes hold
// the ground-truth episode classification. ExcludedShort traces do not count.
inline EndToEndMetrics compute_end_to_end(const std::vector<bool>& decisions,
                                          const std::vector<plant::Outcome>& outcomes) {
  if (decisions.size() != outcomes.size())
    throw std::invalid_argument("compute_end_to_end: length mismatch");
  EndToEndMetrics m;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (outcomes[i] == plant::Outcome::Effective) {
      ++m.n_effective;
      if (decisions[i]) ++m.detected;
    } else if (outcomes[i] == plant::Outcome::Ineffective) {
      ++m.n_ineffective;
      if (decisions[i]) ++m.false_alarms;
    }
  }
  if (m.n_effective) m.detection_rate = static_cast<double>(m.detected) / m.n_effective;
  if (m.n_ineffective) m.false_alarm_rate = static_cast<double>(m.false_alarms) / m.n_ineffective;
  return m;
}

struct MetricsReport {
  SampleMetrics samples;
  EndToEndMetrics seen;
  EndToEndMetrics unseen;
};

inline nlohmann::json to_json(const SampleMetrics& m) {
  return {{"tp", m.tp},       {"tn", m.tn},           {"fp", m.fp},
          {"fn", m.fn},       {"accuracy", m.accuracy}, {"precision", m.precision},
          {"recall", m.recall}, {"f1", m.f1}};
}

inline nlohmann::json to_json(const EndToEndMetrics& m) {
  return {{"n_effective", m.n_effective},
          {"n_ineffective", m.n_ineffective},
          {"detected", m.detected},
          {"false_alarms", m.false_alarms},
          {"detection_rate", m.detection_rate},
          {"false_alarm_rate", m.false_alarm_rate}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"samples", to_json(r.samples)}, {"seen", to_json(r.seen)}, {"unseen", to_json(r.unseen)}};
}

}  // namespace evodef::store
