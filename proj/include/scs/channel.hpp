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

// Multipath mmWave channel synthesis for uniform linear arrays, the
// delay -> frequency -> angular chain, and the free-space link budget.

#pragma once

#include "scs/common.hpp"
#include "scs/config.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace scs {

// ---------------------------------------------------------------------------
// Link budget

struct LinkBudgetParams {
  double carrier_freq_mhz = 0.0;
  double path_loss_exponent = 0.0;
  double distance_km = 0.0;
  double atmos_atten_db_per_km = 0.0;
  double rain_atten_db_per_km = 0.0;
};

/// eta = 32.5 + 20 log10(f_c) + 10 alpha log10(d) + (alpha_o + alpha_r) d,
/// with f_c in MHz and d in km.
///
/// Evaluated exactly as written. The values often quoted with this formula
/// (192.62 / 188.27 / 161.78 dB) do not follow from it; direct evaluation
/// gives 102.04 / 100.55 / 88.69 dB.
inline double path_loss_db(const LinkBudgetParams& p) {
  if (!(p.carrier_freq_mhz > 0.0)) {
    throw InvalidParameter("path_loss_db: carrier frequency must be > 0");
  }
  if (!(p.distance_km > 0.0)) {
    throw InvalidParameter("path_loss_db: distance must be > 0");
  }
  if (!(p.path_loss_exponent > 0.0)) {
    throw InvalidParameter("path_loss_db: path-loss exponent must be > 0");
  }
  if (p.atmos_atten_db_per_km < 0.0 || p.rain_atten_db_per_km < 0.0) {
    throw InvalidParameter("path_loss_db: attenuation must be >= 0");
  }
  return 32.5 + 20.0 * std::log10(p.carrier_freq_mhz) +
         10.0 * p.path_loss_exponent * std::log10(p.distance_km) +
         (p.atmos_atten_db_per_km + p.rain_atten_db_per_km) * p.distance_km;
}

// ---------------------------------------------------------------------------
// Array geometry

/// ULA response: entry k = exp(j 2 pi k * spacing_ratio * sin_angle).
inline CVector steering_vector(int n_antennas, double sin_angle,
                               double spacing_ratio) {
  if (n_antennas < 1) {
    throw InvalidParameter("steering_vector: n_antennas must be >= 1");
  }
  if (!std::isfinite(sin_angle) || !std::isfinite(spacing_ratio)) {
    throw InvalidParameter("steering_vector: non-finite argument");
  }
  CVector a(n_antennas);
  const double step = kTwoPi * spacing_ratio * sin_angle;
  for (int k = 0; k < n_antennas; ++k) {
    a(k) = std::polar(1.0, step * k);
  }
  return a;
}

/// Direction sine that lands exactly on DFT bin `index` of an n-antenna array.
/// The spatial frequency index/n is wrapped into [-1/2, 1/2).
inline double grid_sin_angle(int index, int n_antennas, double spacing_ratio) {
  double nu = static_cast<double>(index) / n_antennas;
  if (nu >= 0.5) nu -= 1.0;
  return nu / spacing_ratio;
}

/// Unitary DFT basis whose column i is the steering vector of grid bin i
/// scaled by 1/sqrt(n).
inline CMatrix dft_matrix(int n) {
  CMatrix a(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      // Reduce k*i mod n before scaling to keep the phase argument small.
      const int r = static_cast<int>((static_cast<long long>(k) * i) % n);
      a(k, i) = std::polar(scale, kTwoPi * r / n);
    }
  }
  return a;
}

struct DftPair {
  CMatrix rx_dft;  // A_R, n_ant_user x n_ant_user
  CMatrix tx_dft;  // A_T, n_ant_bs x n_ant_bs
};

inline DftPair make_dft_pair(int n_rx, int n_tx) {
  return {dft_matrix(n_rx), dft_matrix(n_tx)};
}

inline DftPair make_dft_pair(const SystemConfig& c) {
  return make_dft_pair(c.n_ant_user, c.n_ant_bs);
}

// ---------------------------------------------------------------------------
// Multipath model

struct PathComponent {
  cplx gain;
  double delay_s = 0.0;
  int aoa_grid_index = 0;
  int aod_grid_index = 0;
  /// Direction sines actually used to build steering vectors. On-grid they
  /// equal grid_sin_angle() of the indices above.
  double aoa_sin = 0.0;
  double aod_sin = 0.0;
  bool is_los = false;

  bool operator==(const PathComponent&) const = default;
};

struct MultipathChannel {
  std::vector<std::vector<PathComponent>> per_bs_paths;

  bool operator==(const MultipathChannel&) const = default;
};

struct ChannelDrawOptions {
  /// Reject single-path links instead of treating them as pure LOS.
  bool strict_rician = false;
  /// Draw continuous direction sines instead of grid bins. Grid indices then
  /// hold the nearest bin. Breaks exact sparsity; not used by default.
  bool off_grid = false;
};

namespace detail {

inline std::vector<int> sample_without_replacement(Rng& rng, int n, int k) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

inline int nearest_bin(double sin_angle, int n, double spacing) {
  double nu = spacing * sin_angle;
  nu -= std::floor(nu);
  int bin = static_cast<int>(std::lround(nu * n)) % n;
  return bin;
}

}  // namespace detail

/// One LOS path plus L-1 equal-power NLOS paths per link. Link mean power is
/// 1: LOS gets K/(K+1), each NLOS 1/((K+1)(L-1)); L = 1 is pure LOS.
/// Delays are uniform on [0, max_delay_s]; on-grid AoA/AoD bins are drawn
/// without replacement within a link.
inline MultipathChannel draw_multipath(const SystemConfig& config,
                                       std::uint64_t seed,
                                       const ChannelDrawOptions& opts = {}) {
  validate(config);
  const int n_paths = config.n_paths;
  if (opts.strict_rician && n_paths < 2) {
    throw InvalidParameter(
        "draw_multipath: a Rician split needs at least one NLOS path");
  }
  const double k_lin = db_to_linear(config.rician_k_db);
  double los_power = 1.0;
  double nlos_power = 0.0;
  if (n_paths >= 2) {
    if (std::isinf(k_lin)) {
      los_power = 1.0;
      nlos_power = 0.0;
    } else {
      los_power = k_lin / (k_lin + 1.0);
      nlos_power = 1.0 / ((k_lin + 1.0) * (n_paths - 1));
    }
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> delay(0.0, config.max_delay_s);
  std::uniform_real_distribution<double> sine(-1.0, 1.0);

  MultipathChannel chan;
  chan.per_bs_paths.resize(static_cast<std::size_t>(config.n_bs));
  for (auto& link : chan.per_bs_paths) {
    const auto aoa = detail::sample_without_replacement(rng, config.n_ant_user,
                                                        n_paths);
    const auto aod =
        detail::sample_without_replacement(rng, config.n_ant_bs, n_paths);
    link.resize(static_cast<std::size_t>(n_paths));
    for (int l = 0; l < n_paths; ++l) {
      auto& path = link[static_cast<std::size_t>(l)];
      path.is_los = (l == 0);
      path.gain = complex_gaussian(rng, path.is_los ? los_power : nlos_power);
      path.delay_s = config.max_delay_s > 0.0 ? delay(rng) : 0.0;
      if (opts.off_grid) {
        path.aoa_sin = sine(rng);
        path.aod_sin = sine(rng);
        path.aoa_grid_index = detail::nearest_bin(
            path.aoa_sin, config.n_ant_user, config.antenna_spacing_ratio);
        path.aod_grid_index = detail::nearest_bin(
            path.aod_sin, config.n_ant_bs, config.antenna_spacing_ratio);
      } else {
        path.aoa_grid_index = aoa[static_cast<std::size_t>(l)];
        path.aod_grid_index = aod[static_cast<std::size_t>(l)];
        path.aoa_sin = grid_sin_angle(path.aoa_grid_index, config.n_ant_user,
                                      config.antenna_spacing_ratio);
        path.aod_sin = grid_sin_angle(path.aod_grid_index, config.n_ant_bs,
                                      config.antenna_spacing_ratio);
      }
    }
  }
  return chan;
}

/// Frequency-domain matrices indexed [p][m], each n_ant_user x n_ant_bs.
using FrequencyChannels = std::vector<std::vector<CMatrix>>;

/// H_n = sum_l alpha_l a_R(theta_l) a_T(phi_l)^H exp(-j 2 pi (n-1) tau_l B / N)
/// for each 1-based subcarrier n in `subcarriers`.
inline FrequencyChannels delay_to_frequency(const MultipathChannel& chan,
                                            const SystemConfig& config,
                                            const std::vector<int>& subcarriers) {
  for (int n : subcarriers) {
    if (n < 1 || n > config.n_subcarriers) {
      throw InvalidParameter("delay_to_frequency: subcarrier out of range");
    }
  }
  const double spacing = config.antenna_spacing_ratio;
  FrequencyChannels out(subcarriers.size());
  for (auto& per_bs : out) {
    per_bs.assign(chan.per_bs_paths.size(),
                  CMatrix::Zero(config.n_ant_user, config.n_ant_bs));
  }
  for (std::size_t m = 0; m < chan.per_bs_paths.size(); ++m) {
    for (const auto& path : chan.per_bs_paths[m]) {
      const CVector a_r =
          steering_vector(config.n_ant_user, path.aoa_sin, spacing);
      const CVector a_t = steering_vector(config.n_ant_bs, path.aod_sin, spacing);
      const CMatrix outer = a_r * a_t.adjoint();
      for (std::size_t p = 0; p < subcarriers.size(); ++p) {
        const double phase = -kTwoPi * (subcarriers[p] - 1) * path.delay_s *
                             config.bandwidth_hz / config.n_subcarriers;
        out[p][m] += path.gain * std::polar(1.0, phase) * outer;
      }
    }
  }
  return out;
}

/// H^a = A_R^H H^f A_T.
inline CMatrix angular_transform(const CMatrix& freq, const DftPair& dft) {
  if (freq.rows() != dft.rx_dft.rows() || freq.cols() != dft.tx_dft.rows()) {
    throw DimensionMismatch("angular_transform: matrix does not match DFT pair");
  }
  return dft.rx_dft.adjoint() * freq * dft.tx_dft;
}

/// H^f = A_R H^a A_T^H.
inline CMatrix inverse_angular_transform(const CMatrix& angular,
                                         const DftPair& dft) {
  if (angular.rows() != dft.rx_dft.rows() ||
      angular.cols() != dft.tx_dft.rows()) {
    throw DimensionMismatch(
        "inverse_angular_transform: matrix does not match DFT pair");
  }
  return dft.rx_dft * angular * dft.tx_dft.adjoint();
}

struct SparseVector {
  CVector values;
  IndexSet support;
};

/// Column-major vectorization of [H_1 | H_2 | ... | H_M]: entry (r, c) of
/// block m lands at (m * cols + c) * rows + r.
inline SparseVector aggregate_sparse_vector(const std::vector<CMatrix>& blocks) {
  if (blocks.empty()) return {};
  const Index rows = blocks.front().rows();
  const Index cols = blocks.front().cols();
  for (const auto& b : blocks) {
    if (b.rows() != rows || b.cols() != cols) {
      throw DimensionMismatch("aggregate_sparse_vector: block shapes differ");
    }
  }
  SparseVector out;
  out.values.resize(rows * cols * static_cast<Index>(blocks.size()));
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    out.values.segment(static_cast<Index>(m) * rows * cols, rows * cols) =
        blocks[m].reshaped();
  }
  out.support = numerical_support(out.values);
  return out;
}

/// Inverse of aggregate_sparse_vector: block m as an n_rx x n_tx matrix.
inline CMatrix extract_block(const CVector& stacked, int m, int n_rx, int n_tx) {
  const Index size = static_cast<Index>(n_rx) * n_tx;
  if (stacked.size() < (m + 1) * size) {
    throw DimensionMismatch("extract_block: vector too short");
  }
  return stacked.segment(m * size, size).reshaped(n_rx, n_tx);
}

/// Jointly sparse angular vectors, one per pilot subcarrier.
struct AngularChannelSet {
  std::vector<CVector> vectors;
  IndexSet support;
  int sparsity = 0;
};

inline AngularChannelSet angular_channel_set(const MultipathChannel& chan,
                                             const SystemConfig& config,
                                             const DftPair& dft,
                                             const std::vector<int>& subcarriers) {
  const auto freq = delay_to_frequency(chan, config, subcarriers);
  AngularChannelSet set;
  set.vectors.reserve(freq.size());
  for (const auto& per_bs : freq) {
    std::vector<CMatrix> angular;
    angular.reserve(per_bs.size());
    for (const auto& h : per_bs) angular.push_back(angular_transform(h, dft));
    auto sv = aggregate_sparse_vector(angular);
    set.support = set_union(set.support, sv.support);
    set.vectors.push_back(std::move(sv.values));
  }
  // Entries that are numerically zero on one subcarrier but not another only
  // arise off-grid; the union keeps the support common by construction.
  set.sparsity = static_cast<int>(set.support.size());
  return set;
}

}  // namespace scs
