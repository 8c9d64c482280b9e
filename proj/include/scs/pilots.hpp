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

// Non-orthogonal random-phase pilots for hybrid arrays and the resulting
// per-subcarrier measurement operators.

#pragma once

#include "scs/channel.hpp"
#include "scs/common.hpp"
#include "scs/config.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace scs {

/// Equi-spaced 1-based pilot subcarriers: xi_p = (p - 1) N / P + 1.
inline std::vector<int> pilot_subcarrier_indices(const SystemConfig& c) {
  validate(c);
  std::vector<int> out(static_cast<std::size_t>(c.n_pilot_subcarriers));
  const int spacing = c.n_subcarriers / c.n_pilot_subcarriers;
  for (int p = 0; p < c.n_pilot_subcarriers; ++p) {
    out[static_cast<std::size_t>(p)] = p * spacing + 1;
  }
  return out;
}

/// Unit-modulus training stages for G slots, P pilot subcarriers and M base
/// stations. RF stages are stored once per slot (per slot and BS for the
/// precoder) since every subcarrier shares them; baseband stages are stored
/// per subcarrier. All indices are 0-based.
class PilotEnsemble {
 public:
  PilotEnsemble() = default;

  PilotEnsemble(const SystemConfig& c, std::uint64_t seed)
      : n_slots_(c.n_slots),
        n_pilots_(c.n_pilot_subcarriers),
        n_bs_(c.n_bs),
        n_ant_bs_(c.n_ant_bs),
        n_chain_bs_(c.n_chain_bs) {
    validate(c);
    Rng rng(seed);
    auto random_phase_matrix = [&](int rows, int cols) {
      CMatrix m(rows, cols);
      for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) m(i, j) = std::polar(1.0, uniform_phase(rng));
      }
      return m;
    };
    for (int t = 0; t < n_slots_; ++t) {
      rf_combiner_.push_back(random_phase_matrix(c.n_ant_user, c.n_chain_user));
      for (int m = 0; m < n_bs_; ++m) {
        rf_precoder_.push_back(random_phase_matrix(c.n_ant_bs, c.n_chain_bs));
      }
      for (int p = 0; p < n_pilots_; ++p) {
        bb_combiner_.push_back(
            random_phase_matrix(c.n_chain_user, c.n_chain_user));
        for (int m = 0; m < n_bs_; ++m) {
          training_.push_back(random_phase_matrix(c.n_chain_bs, 1).col(0));
        }
      }
    }
  }

  [[nodiscard]] int n_slots() const { return n_slots_; }
  [[nodiscard]] int n_pilots() const { return n_pilots_; }
  [[nodiscard]] int n_bs() const { return n_bs_; }

  /// Z_RF for slot t; identical for every p.
  [[nodiscard]] const CMatrix& rf_combiner(int t, int p) const {
    check(t, p, 0);
    return rf_combiner_[static_cast<std::size_t>(t)];
  }
  [[nodiscard]] const CMatrix& bb_combiner(int t, int p) const {
    check(t, p, 0);
    return bb_combiner_[static_cast<std::size_t>(t * n_pilots_ + p)];
  }
  /// F_RF for slot t and BS m; identical for every p.
  [[nodiscard]] const CMatrix& rf_precoder(int t, int p, int m) const {
    check(t, p, m);
    return rf_precoder_[static_cast<std::size_t>(t * n_bs_ + m)];
  }
  /// Effective training s~ = F_BB s for slot t, subcarrier p, BS m.
  [[nodiscard]] const CVector& training(int t, int p, int m) const {
    check(t, p, m);
    return training_[static_cast<std::size_t>((t * n_pilots_ + p) * n_bs_ + m)];
  }

  /// Z = Z_RF Z_BB.
  [[nodiscard]] CMatrix combiner(int t, int p) const {
    return rf_combiner(t, p) * bb_combiner(t, p);
  }

  /// f = F_RF s~ / sqrt(N_a^BS N_BB^BS), so E||f||^2 = 1 for every array size.
  [[nodiscard]] CVector pilot_vector(int t, int p, int m) const {
    const double scale =
        1.0 / std::sqrt(static_cast<double>(n_ant_bs_) * n_chain_bs_);
    return scale * (rf_precoder(t, p, m) * training(t, p, m));
  }

  /// Every stored phase entry, in storage order (used for statistics).
  [[nodiscard]] std::vector<cplx> all_entries() const {
    std::vector<cplx> out;
    auto append = [&](const auto& mats) {
      for (const auto& m : mats) {
        for (Index k = 0; k < m.size(); ++k) out.push_back(m.data()[k]);
      }
    };
    append(rf_combiner_);
    append(bb_combiner_);
    append(rf_precoder_);
    append(training_);
    return out;
  }

  bool operator==(const PilotEnsemble& o) const {
    auto same = [](const auto& a, const auto& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
      }
      return true;
    };
    return n_slots_ == o.n_slots_ && n_pilots_ == o.n_pilots_ &&
           n_bs_ == o.n_bs_ && same(rf_combiner_, o.rf_combiner_) &&
           same(bb_combiner_, o.bb_combiner_) &&
           same(rf_precoder_, o.rf_precoder_) && same(training_, o.training_);
  }

 private:
  void check(int t, int p, int m) const {
    if (t < 0 || t >= n_slots_ || p < 0 || p >= n_pilots_ || m < 0 ||
        m >= n_bs_) {
      throw InvalidParameter("PilotEnsemble: slot/pilot/BS index out of range");
    }
  }

  int n_slots_ = 0;
  int n_pilots_ = 0;
  int n_bs_ = 0;
  int n_ant_bs_ = 1;
  int n_chain_bs_ = 1;
  std::vector<CMatrix> rf_combiner_;
  std::vector<CMatrix> bb_combiner_;
  std::vector<CMatrix> rf_precoder_;
  std::vector<CVector> training_;
};

inline PilotEnsemble draw_ensemble(const SystemConfig& c, std::uint64_t seed) {
  return PilotEnsemble(c, seed);
}

/// Kronecker form of one slot: Phi = (blkdiag(A_T^H) f)^T kron (Z^H A_R).
/// Built explicitly column by column: column k * N_R + r equals
/// tx(k) * rx.col(r).
inline CMatrix kron_measurement(const CVector& tx, const CMatrix& rx) {
  CMatrix phi(rx.rows(), tx.size() * rx.cols());
  for (Index k = 0; k < tx.size(); ++k) {
    phi.middleCols(k * rx.cols(), rx.cols()) = tx(k) * rx;
  }
  return phi;
}

/// Phi_p^(t) for 0-based slot t and pilot p.
inline CMatrix slot_measurement(const PilotEnsemble& ens, const DftPair& dft,
                                int t, int p) {
  const CMatrix z = ens.combiner(t, p);
  if (z.rows() != dft.rx_dft.rows()) {
    throw DimensionMismatch("slot_measurement: combiner does not match A_R");
  }
  const Index n_tx = dft.tx_dft.rows();
  CVector tx(n_tx * ens.n_bs());
  for (int m = 0; m < ens.n_bs(); ++m) {
    const CVector f = ens.pilot_vector(t, p, m);
    if (f.size() != n_tx) {
      throw DimensionMismatch("slot_measurement: precoder does not match A_T");
    }
    tx.segment(m * n_tx, n_tx) = dft.tx_dft.adjoint() * f;
  }
  const CMatrix rx = z.adjoint() * dft.rx_dft;
  return kron_measurement(tx, rx);
}

/// Phi_p^[G]: slot operators stacked vertically in slot order.
inline CMatrix stack_measurements(const PilotEnsemble& ens, const DftPair& dft,
                                  int p) {
  if (ens.n_slots() < 1) {
    throw InvalidParameter("stack_measurements: need at least one slot");
  }
  std::vector<CMatrix> slots;
  slots.reserve(static_cast<std::size_t>(ens.n_slots()));
  Index rows = 0;
  for (int t = 0; t < ens.n_slots(); ++t) {
    slots.push_back(slot_measurement(ens, dft, t, p));
    rows += slots.back().rows();
  }
  CMatrix out(rows, slots.front().cols());
  Index r = 0;
  for (const auto& s : slots) {
    out.middleRows(r, s.rows()) = s;
    r += s.rows();
  }
  return out;
}

/// Noise variance per complex entry such that
/// sum_p ||Phi_p h_p||^2 / (rows * P * sigma^2) = 10^(snr_db / 10).
/// snr_db = +inf gives zero.
inline double calibrate_noise_variance(std::span<const CMatrix> operators,
                                       std::span<const CVector> signals,
                                       double snr_db) {
  if (operators.size() != signals.size() || operators.empty()) {
    throw DimensionMismatch("calibrate_noise_variance: operator/signal count");
  }
  double energy = 0.0;
  double entries = 0.0;
  for (std::size_t p = 0; p < operators.size(); ++p) {
    if (operators[p].cols() != signals[p].size()) {
      throw DimensionMismatch("calibrate_noise_variance: column mismatch");
    }
    energy += (operators[p] * signals[p]).squaredNorm();
    entries += static_cast<double>(operators[p].rows());
  }
  if (!(energy > 0.0)) {
    throw NumericalError("calibrate_noise_variance: SNR undefined for a zero channel");
  }
  if (snr_db == INFINITY) return 0.0;
  return energy / (entries * db_to_linear(snr_db));
}

/// r = Phi h + v with v ~ CN(0, noise_variance I).
inline CVector synthesize_received(const CMatrix& op, const CVector& signal,
                                   double noise_variance, std::uint64_t seed) {
  if (op.cols() != signal.size()) {
    throw DimensionMismatch("synthesize_received: column mismatch");
  }
  if (noise_variance < 0.0) {
    throw InvalidParameter("synthesize_received: negative noise variance");
  }
  CVector r = op * signal;
  if (noise_variance > 0.0) {
    Rng rng(seed);
    for (Index i = 0; i < r.size(); ++i) r(i) += complex_gaussian(rng, noise_variance);
  }
  return r;
}

/// Stacked operators and received vectors for every pilot subcarrier.
struct MeasurementSet {
  std::vector<CMatrix> operators;
  std::vector<CVector> received;
  double noise_variance = 0.0;
  std::vector<int> pilot_indices;
};

/// Builds operators from the ensemble, calibrates noise for config.snr_db and
/// synthesizes received signals; noise for subcarrier p uses seed
/// mix_seed(noise_seed, p).
inline MeasurementSet build_measurements(const SystemConfig& config,
                                         const PilotEnsemble& ens,
                                         const DftPair& dft,
                                         const AngularChannelSet& channel,
                                         std::uint64_t noise_seed) {
  MeasurementSet ms;
  ms.pilot_indices = pilot_subcarrier_indices(config);
  if (channel.vectors.size() != ms.pilot_indices.size()) {
    throw DimensionMismatch("build_measurements: channel/pilot count mismatch");
  }
  for (int p = 0; p < ens.n_pilots(); ++p) {
    ms.operators.push_back(stack_measurements(ens, dft, p));
  }
  ms.noise_variance =
      calibrate_noise_variance(ms.operators, channel.vectors, config.snr_db);
  for (std::size_t p = 0; p < ms.operators.size(); ++p) {
    ms.received.push_back(synthesize_received(ms.operators[p], channel.vectors[p],
                                              ms.noise_variance,
                                              mix_seed(noise_seed, p)));
  }
  return ms;
}

}  // namespace scs
