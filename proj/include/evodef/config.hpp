#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace evodef {

// Key-value configuration with nested sections:
//
//   [plant.ode]
//   tank_area1 = 6.0        # comment
//   hidden = 64 32          # space-separated list
//
// Keys are addressed as "plant.ode.tank_area1". Values stay strings until a
// typed getter is called; getters either throw (get_*) or record an error in
// a caller-supplied list (check_*), so command-line validation can report
// every bad field at once instead of stopping at the first.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text, const std::string& origin = "<string>") {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip(line);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                   ": unterminated section header");
        section = strip(s.substr(1, s.size() - 2));
        if (section.empty())
          throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                 ": expected 'key = value'");
      std::string key = strip(s.substr(0, eq));
      std::string value = strip(stripComment(s.substr(eq + 1)));
      if (key.empty())
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.set(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  void set(const std::string& dotted_key, const std::string& value) {
    values_[dotted_key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("missing config key: " + key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return parseDouble(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::int64_t get_int(const std::string& key) const { return parseInt(key, get_string(key)); }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key) const {
    std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config key " + key + ": not a boolean: '" + v + "'");
  }
  bool get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
  }

  std::vector<double> get_doubles(const std::string& key) const {
    std::istringstream in(get_string(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parseDouble(key, tok));
    return out;
  }

  std::vector<int> get_ints(const std::string& key) const {
    std::istringstream in(get_string(key));
    std::vector<int> out;
    std::string tok;
    while (in >> tok) out.push_back(static_cast<int>(parseInt(key, tok)));
    return out;
  }

  // Error-accumulating getters for exhaustive validation.
  std::optional<double> check_double(const std::string& key, std::vector<std::string>& errors) const {
    try {
      return get_double(key);
    } catch (const std::exception& e) {
      errors.emplace_back(e.what());
      return std::nullopt;
    }
  }
  std::optional<std::int64_t> check_int(const std::string& key, std::vector<std::string>& errors) const {
    try {
      return get_int(key);
    } catch (const std::exception& e) {
      errors.emplace_back(e.what());
      return std::nullopt;
    }
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Nested-object snapshot for manifests.
  nlohmann::json to_json() const {
    nlohmann::json root = nlohmann::json::object();
    for (const auto& [key, value] : values_) {
      nlohmann::json* node = &root;
      std::size_t start = 0;
      for (std::size_t dot = key.find('.'); dot != std::string::npos;
           start = dot + 1, dot = key.find('.', start)) {
        node = &(*node)[key.substr(start, dot - start)];
      }
      (*node)[key.substr(start)] = value;
    }
    return root;
  }

 private:
  static std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static std::string stripComment(const std::string& s) {
    auto pos = s.find('#');
    return pos == std::string::npos ? s : s.substr(0, pos);
  }

  static double parseDouble(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw std::runtime_error("config key " + key + ": not a number: '" + v + "'");
    }
  }

  static std::int64_t parseInt(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      long long i = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return i;
    } catch (const std::exception&) {
      throw std::runtime_error("config key " + key + ": not an integer: '" + v + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace evodef
