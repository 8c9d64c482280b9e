// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flat `key = value` configuration files. Keys are exactly the SystemConfig
// field names; '#' starts a comment; missing keys keep the desk-scale
// defaults.

#pragma once

#include "scs/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>

namespace scs {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : std::runtime_error(format(key, line, what)), key_(key), line_(line) {}

  [[nodiscard]] const std::string& key() const { return key_; }
  /// 1-based line number, or 0 when the key was not present in the file.
  [[nodiscard]] int line() const { return line_; }

 private:
  static std::string format(const std::string& key, int line, const std::string& what) {
    std::string out = "config error";
    if (line > 0) out += " at line " + std::to_string(line);
    if (!key.empty()) out += " (" + key + ")";
    return out + ": " + what;
  }

  std::string key_;
  int line_;
};

namespace detail {

using ConfigField = std::variant<int SystemConfig::*, double SystemConfig::*>;

inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  static const std::vector<std::pair<std::string, ConfigField>> fields = {
      {"n_ant_user", &SystemConfig::n_ant_user},
      {"n_chain_user", &SystemConfig::n_chain_user},
      {"n_ant_bs", &SystemConfig::n_ant_bs},
      {"n_chain_bs", &SystemConfig::n_chain_bs},
      {"n_bs", &SystemConfig::n_bs},
      {"n_paths", &SystemConfig::n_paths},
      {"n_subcarriers", &SystemConfig::n_subcarriers},
      {"n_pilot_subcarriers", &SystemConfig::n_pilot_subcarriers},
      {"bandwidth_hz", &SystemConfig::bandwidth_hz},
      {"max_delay_s", &SystemConfig::max_delay_s},
      {"antenna_spacing_ratio", &SystemConfig::antenna_spacing_ratio},
      {"rician_k_db", &SystemConfig::rician_k_db},
      {"snr_db", &SystemConfig::snr_db},
      {"n_slots", &SystemConfig::n_slots},
  };
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline bool parse_int(const std::string& text, int& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  // strtod accepts "inf"/"infinity" and is locale-independent for '.' in
  // the "C" locale the tools run under.
  errno = 0;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return errno == 0 && end == text.c_str() + text.size();
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline SystemConfig parse_config_text(const std::string& text) {
  SystemConfig cfg;
  std::map<std::string, int> seen;  // key -> line
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", line_no, "expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto& fields = detail::config_fields();
    const auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](const auto& f) { return f.first == key; });
    if (it == fields.end()) throw ConfigError(key, line_no, "unknown key");
    if (seen.count(key)) throw ConfigError(key, line_no, "duplicate key");
    seen[key] = line_no;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          T parsed{};
          bool ok = false;
          if constexpr (std::is_same_v<T, int>) {
            ok = detail::parse_int(value, parsed);
          } else {
            ok = detail::parse_double(value, parsed);
          }
          if (!ok) throw ConfigError(key, line_no, "malformed value '" + value + "'");
          cfg.*member = parsed;
        },
        it->second);
  }
  if (auto v = find_violation(cfg)) {
    // Report the line of the first offending key present in the file.
    int line = 0;
    std::string keys;
    for (const auto& k : v->keys) {
      if (!keys.empty()) keys += ", ";
      keys += k;
      if (line == 0 && seen.count(k)) line = seen[k];
    }
    throw ConfigError(keys, line, v->message);
  }
  return cfg;
}

inline SystemConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline std::string write_config(const SystemConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : detail::config_fields()) {
    std::visit(
        [&](auto member) {
          const auto v = cfg.*member;
          if constexpr (std::is_same_v<std::remove_cv_t<decltype(v)>, int>) {
            out += key + " = " + std::to_string(v) + "\n";
          } else {
            out += key + " = " + detail::format_double(v) + "\n";
          }
        },
        field);
  }
  return out;
}

}  // namespace scs
