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

#pragma once

#include "scs/common.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace scs {

/// Scalar parameters of one downlink estimation scenario: a user with a
/// hybrid array receiving pilots from n_bs small-cell base stations.
///
/// The defaults are the desk-scale configuration (angular dimension
/// 2 * 32 * 8 = 512). snr_db may be +inf for noiseless measurements.
struct SystemConfig {
  int n_ant_user = 8;
  int n_chain_user = 2;
  int n_ant_bs = 32;
  int n_chain_bs = 4;
  int n_bs = 2;
  int n_paths = 4;
  int n_subcarriers = 16;
  int n_pilot_subcarriers = 16;
  double bandwidth_hz = 0.25e9;
  double max_delay_s = 50e-9;
  double antenna_spacing_ratio = 0.5;
  double rician_k_db = 10.0;
  double snr_db = 20.0;
  int n_slots = 12;

  /// Length of the stacked angular vector: n_bs * n_ant_bs * n_ant_user.
  [[nodiscard]] Index angular_dim() const {
    return static_cast<Index>(n_bs) * n_ant_bs * n_ant_user;
  }
  /// Rows of a stacked measurement operator: n_slots * n_chain_user.
  [[nodiscard]] Index measurement_rows() const {
    return static_cast<Index>(n_slots) * n_chain_user;
  }
  /// On-grid sparsity of the stacked angular vector.
  [[nodiscard]] int sparsity() const { return n_paths * n_bs; }

  bool operator==(const SystemConfig&) const = default;
};

/// Full-size scenario (angular dimension 65,536).
inline SystemConfig full_scale_config() {
  SystemConfig c;
  c.n_ant_user = 32;
  c.n_chain_user = 2;
  c.n_ant_bs = 512;
  c.n_chain_bs = 8;
  c.n_bs = 4;
  c.n_paths = 4;
  c.n_subcarriers = 64;
  c.n_pilot_subcarriers = 64;
  c.max_delay_s = 100e-9;
  c.n_slots = 20;
  return c;
}

/// Above this angular dimension a run is flagged as long-running.
inline constexpr Index kLongRunningDim = 8192;

inline bool is_long_running(const SystemConfig& c) {
  return c.angular_dim() > kLongRunningDim;
}

struct ConfigViolation {
  std::vector<std::string> keys;
  std::string message;
};

/// First violated invariant, if any. Checks run in a fixed order so that
/// error messages are stable.
inline std::optional<ConfigViolation> find_violation(const SystemConfig& c) {
  auto positive = [](int v) { return v >= 1; };
  const std::pair<const char*, int> counts[] = {
      {"n_ant_user", c.n_ant_user},   {"n_chain_user", c.n_chain_user},
      {"n_ant_bs", c.n_ant_bs},       {"n_chain_bs", c.n_chain_bs},
      {"n_bs", c.n_bs},               {"n_paths", c.n_paths},
      {"n_subcarriers", c.n_subcarriers},
      {"n_pilot_subcarriers", c.n_pilot_subcarriers},
      {"n_slots", c.n_slots}};
  for (const auto& [key, value] : counts) {
    if (!positive(value)) {
      return ConfigViolation{{key}, std::string(key) + " must be >= 1"};
    }
  }
  if (c.n_chain_user > c.n_ant_user) {
    return ConfigViolation{{"n_chain_user", "n_ant_user"},
                           "n_chain_user must not exceed n_ant_user"};
  }
  if (c.n_chain_bs > c.n_ant_bs) {
    return ConfigViolation{{"n_chain_bs", "n_ant_bs"},
                           "n_chain_bs must not exceed n_ant_bs"};
  }
  if (c.n_pilot_subcarriers > c.n_subcarriers) {
    return ConfigViolation{{"n_pilot_subcarriers", "n_subcarriers"},
                           "n_pilot_subcarriers must not exceed n_subcarriers"};
  }
  if (c.n_subcarriers % c.n_pilot_subcarriers != 0) {
    return ConfigViolation{
        {"n_pilot_subcarriers", "n_subcarriers"},
        "n_pilot_subcarriers must divide n_subcarriers (equi-spaced pilots)"};
  }
  if (c.n_paths > c.n_ant_user || c.n_paths > c.n_ant_bs) {
    return ConfigViolation{
        {"n_paths", "n_ant_user", "n_ant_bs"},
        "n_paths must not exceed either array size (distinct grid bins)"};
  }
  if (!(c.bandwidth_hz > 0.0) || !std::isfinite(c.bandwidth_hz)) {
    return ConfigViolation{{"bandwidth_hz"}, "bandwidth_hz must be > 0"};
  }
  if (!(c.max_delay_s >= 0.0) || !std::isfinite(c.max_delay_s)) {
    return ConfigViolation{{"max_delay_s"}, "max_delay_s must be >= 0"};
  }
  if (!(c.max_delay_s * c.bandwidth_hz < c.n_subcarriers)) {
    return ConfigViolation{
        {"max_delay_s", "bandwidth_hz", "n_subcarriers"},
        "max_delay_s * bandwidth_hz must be below n_subcarriers"};
  }
  if (!(c.antenna_spacing_ratio > 0.0) ||
      !std::isfinite(c.antenna_spacing_ratio)) {
    return ConfigViolation{{"antenna_spacing_ratio"},
                           "antenna_spacing_ratio must be > 0"};
  }
  if (std::isnan(c.rician_k_db)) {
    return ConfigViolation{{"rician_k_db"}, "rician_k_db is not a number"};
  }
  if (std::isnan(c.snr_db) || c.snr_db == -INFINITY) {
    return ConfigViolation{{"snr_db"}, "snr_db must be finite or +inf"};
  }
  return std::nullopt;
}

inline void validate(const SystemConfig& c) {
  if (auto v = find_violation(c)) throw InvalidParameter(v->message);
}

}  // namespace scs
