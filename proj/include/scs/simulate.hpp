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

// Monte-Carlo driver: end-to-end estimation trials, NMSE sweeps over the
// slot count or SNR, and a simplified two-stream downlink BER experiment.

#pragma once

#include "scs/channel.hpp"
#include "scs/common.hpp"
#include "scs/config.hpp"
#include "scs/pilots.hpp"
#include "scs/recovery.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace scs {

// ---------------------------------------------------------------------------
// Seeds. Trial t of a sweep uses base_seed + t; inside a trial every random
// stage draws from its own stream mix_seed(trial_seed, tag).

enum class SeedStream : std::uint64_t { channel = 1, pilots = 2, noise = 3, data = 4 };

inline std::uint64_t stream_seed(std::uint64_t trial_seed, SeedStream s) {
  return mix_seed(trial_seed, static_cast<std::uint64_t>(s));
}

inline std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial_index) {
  return base_seed + trial_index;
}

/// SSAMP stopping threshold in the units of the synthesized channel.
///
/// The schedule from p_th_for_snr() is an energy per coefficient for paths of
/// unit gain. An on-grid path of gain alpha shows up in the angular vector as
/// alpha * sqrt(N_a^US * N_a^BS), so the schedule is scaled by that array
/// gain. Noiseless runs use a numerical floor instead of the schedule.
inline double ssamp_threshold(const SystemConfig& c) {
  const double array_gain = static_cast<double>(c.n_ant_user) * c.n_ant_bs;
  if (c.snr_db == INFINITY) return 1e-9 * array_gain;
  return p_th_for_snr(c.snr_db) * array_gain;
}

/// Relative residual margin of the OMP baseline: stop at sigma^2 * rows * 1.1.
inline constexpr double kOmpResidualMargin = 0.1;

struct TrialOptions {
  /// Overrides ssamp_threshold().
  std::optional<double> p_th;
  ChannelDrawOptions channel;
  bool run_baselines = true;
};

/// Everything one trial draws, before any estimator runs.
struct TrialData {
  SystemConfig config;
  std::uint64_t seed = 0;
  DftPair dft;
  MultipathChannel channel;
  AngularChannelSet truth;
  PilotEnsemble pilots;
  MeasurementSet measurements;
};

inline TrialData prepare_trial(const SystemConfig& config, std::uint64_t seed,
                               const TrialOptions& opts = {}) {
  validate(config);
  TrialData d;
  d.config = config;
  d.seed = seed;
  d.dft = make_dft_pair(config);
  d.channel = draw_multipath(config, stream_seed(seed, SeedStream::channel), opts.channel);
  const auto pilots = pilot_subcarrier_indices(config);
  d.truth = angular_channel_set(d.channel, config, d.dft, pilots);
  d.pilots = draw_ensemble(config, stream_seed(seed, SeedStream::pilots));
  d.measurements = build_measurements(config, d.pilots, d.dft, d.truth,
                                      stream_seed(seed, SeedStream::noise));
  return d;
}

inline double omp_threshold(const TrialData& d) {
  const auto& ms = d.measurements;
  const double rows = static_cast<double>(ms.operators.front().rows());
  double level = ms.noise_variance * rows * (1.0 + kOmpResidualMargin);
  if (level == 0.0) {
    // Noiseless: stop at round-off level relative to the measurements.
    double energy = 0.0;
    for (const auto& r : ms.received) energy += r.squaredNorm();
    level = 1e-20 * energy / static_cast<double>(ms.received.size());
  }
  return std::max(level, std::numeric_limits<double>::min());
}

struct EstimatorMetrics {
  std::string name;
  double nmse_db = 0.0;
  bool exact_support_match = false;
  int iterations = 0;
  double wall_time_s = 0.0;
};

/// One end-to-end pass. Equality ignores wall times, which are the only
/// non-deterministic fields.
struct TrialRecord {
  std::uint64_t seed = 0;
  SystemConfig config;
  double noise_variance = 0.0;
  std::vector<EstimatorMetrics> estimators;  // ssamp, adaptive_omp, oracle_ls

  [[nodiscard]] const EstimatorMetrics& get(const std::string& name) const {
    for (const auto& e : estimators) {
      if (e.name == name) return e;
    }
    throw InvalidParameter("TrialRecord: no estimator named " + name);
  }

  bool operator==(const TrialRecord& o) const {
    if (seed != o.seed || !(config == o.config) ||
        noise_variance != o.noise_variance ||
        estimators.size() != o.estimators.size()) {
      return false;
    }
    for (std::size_t i = 0; i < estimators.size(); ++i) {
      const auto& a = estimators[i];
      const auto& b = o.estimators[i];
      const bool same_nmse =
          a.nmse_db == b.nmse_db || (std::isnan(a.nmse_db) && std::isnan(b.nmse_db));
      if (a.name != b.name || !same_nmse ||
          a.exact_support_match != b.exact_support_match ||
          a.iterations != b.iterations) {
        return false;
      }
    }
    return true;
  }
};

inline const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names = {"ssamp", "adaptive_omp", "oracle_ls"};
  return names;
}

struct TrialEstimates {
  EstimationResult ssamp;
  std::optional<EstimationResult> adaptive_omp;
  /// Empty when the true support exceeds the row count.
  std::optional<EstimationResult> oracle_ls;
  double ssamp_seconds = 0.0;
  double omp_seconds = 0.0;
  double oracle_seconds = 0.0;
};

inline TrialEstimates run_estimators(const TrialData& d, const TrialOptions& opts = {}) {
  using Clock = std::chrono::steady_clock;
  const auto& ms = d.measurements;
  TrialEstimates out;
  const double p_th = opts.p_th.value_or(ssamp_threshold(d.config));

  auto t0 = Clock::now();
  out.ssamp = ssamp(ms.received, ms.operators, p_th, {.record_trace = false});
  out.ssamp_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  if (opts.run_baselines) {
    t0 = Clock::now();
    out.adaptive_omp = adaptive_omp(ms.received, ms.operators, omp_threshold(d));
    out.omp_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

    if (static_cast<Index>(d.truth.support.size()) <= ms.operators.front().rows()) {
      t0 = Clock::now();
      out.oracle_ls = oracle_ls(ms.received, ms.operators, d.truth.support);
      out.oracle_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    }
  }
  return out;
}

inline TrialRecord run_trial(const SystemConfig& config, std::uint64_t seed,
                             const TrialOptions& opts = {}) {
  const TrialData d = prepare_trial(config, seed, opts);
  const TrialEstimates est = run_estimators(d, opts);
  TrialRecord rec;
  rec.seed = seed;
  rec.config = config;
  rec.noise_variance = d.measurements.noise_variance;

  auto metrics = [&](const std::string& name, const EstimationResult& r, double secs) {
    return EstimatorMetrics{name, nmse_db(r.estimates, d.truth.vectors),
                            r.support == d.truth.support, r.iterations, secs};
  };
  rec.estimators.push_back(metrics("ssamp", est.ssamp, est.ssamp_seconds));
  if (opts.run_baselines) {
    rec.estimators.push_back(metrics("adaptive_omp", *est.adaptive_omp, est.omp_seconds));
    if (est.oracle_ls) {
      rec.estimators.push_back(metrics("oracle_ls", *est.oracle_ls, est.oracle_seconds));
    } else {
      rec.estimators.push_back({"oracle_ls", std::numeric_limits<double>::quiet_NaN(),
                                false, 0, 0.0});
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Parallel trial execution

/// Runs job(i) for i in [0, count) on `workers` threads. Results are written
/// by index, so aggregation order never depends on scheduling. The first
/// exception thrown by any job is rethrown.
template <typename Job>
void parallel_for(std::size_t count, int workers, Job&& job) {
  workers = std::max(1, workers);
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepVariable { slots, snr_db };

inline std::string to_string(SweepVariable v) {
  return v == SweepVariable::slots ? "G" : "snr_db";
}

struct ResultRow {
  double value = 0.0;
  std::string estimator;
  double mean_nmse_db = 0.0;
  double support_rate = 0.0;
  int trials = 0;
  double stderr_db = 0.0;
};

struct ResultTable {
  std::string sweep_var;
  std::vector<ResultRow> rows;
  std::vector<std::vector<TrialRecord>> records;  // [value][trial]

  bool operator==(const ResultTable& o) const {
    if (sweep_var != o.sweep_var || rows.size() != o.rows.size()) return false;
    auto same = [](double a, double b) {
      return a == b || (std::isnan(a) && std::isnan(b));
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& a = rows[i];
      const auto& b = o.rows[i];
      if (a.value != b.value || a.estimator != b.estimator ||
          !same(a.mean_nmse_db, b.mean_nmse_db) || a.support_rate != b.support_rate ||
          a.trials != b.trials || !same(a.stderr_db, b.stderr_db)) {
        return false;
      }
    }
    return true;
  }
};

inline SystemConfig with_sweep_value(SystemConfig c, SweepVariable var, double value) {
  if (var == SweepVariable::slots) {
    c.n_slots = static_cast<int>(value);
    if (static_cast<double>(c.n_slots) != value) {
      throw InvalidParameter("sweep: G values must be integers");
    }
  } else {
    c.snr_db = value;
  }
  validate(c);
  return c;
}

/// Mean, support rate and standard error per estimator over a trial set, in
/// trial-index order.
inline std::vector<ResultRow> aggregate(double value,
                                        const std::vector<TrialRecord>& records) {
  std::vector<ResultRow> rows;
  if (records.empty()) return rows;
  for (const auto& est : records.front().estimators) {
    ResultRow row;
    row.value = value;
    row.estimator = est.name;
    row.trials = static_cast<int>(records.size());
    double sum = 0.0;
    double hits = 0.0;
    for (const auto& r : records) {
      const auto& m = r.get(est.name);
      sum += m.nmse_db;
      hits += m.exact_support_match ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(records.size());
    row.mean_nmse_db = sum / n;
    row.support_rate = hits / n;
    double var = 0.0;
    for (const auto& r : records) {
      const double d = r.get(est.name).nmse_db - row.mean_nmse_db;
      var += d * d;
    }
    row.stderr_db = records.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

/// For each value, n_trials trials with seeds base_seed + t (shared across
/// values, so every comparison is paired).
inline ResultTable sweep(const SystemConfig& config, SweepVariable var,
                         const std::vector<double>& values, int n_trials,
                         std::uint64_t base_seed, int workers = 1,
                         const TrialOptions& opts = {}) {
  if (n_trials < 1) throw InvalidParameter("sweep: n_trials must be >= 1");
  ResultTable table;
  table.sweep_var = to_string(var);
  for (double value : values) {
    const SystemConfig c = with_sweep_value(config, var, value);
    std::vector<TrialRecord> records(static_cast<std::size_t>(n_trials));
    parallel_for(records.size(), workers, [&](std::size_t t) {
      records[t] = run_trial(c, trial_seed(base_seed, t), opts);
    });
    for (auto& row : aggregate(value, records)) table.rows.push_back(std::move(row));
    table.records.push_back(std::move(records));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Downlink BER with estimated CSI

namespace qam16 {

/// Per-dimension Gray map: bits (b0 b1) 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
inline double level(int b0, int b1) {
  static constexpr double kLevels[2][2] = {{-3.0, -1.0}, {3.0, 1.0}};
  return kLevels[b0][b1];
}

inline std::pair<int, int> decide(double x) {
  if (x < -2.0) return {0, 0};
  if (x < 0.0) return {0, 1};
  if (x < 2.0) return {1, 1};
  return {1, 0};
}

/// Unit average energy: E|s|^2 = 1.
inline const double kScale = 1.0 / std::sqrt(10.0);

inline cplx modulate(const std::array<int, 4>& bits) {
  return kScale * cplx(level(bits[0], bits[1]), level(bits[2], bits[3]));
}

inline std::array<int, 4> demodulate(cplx s) {
  const auto [b0, b1] = decide(s.real() / kScale);
  const auto [b2, b3] = decide(s.imag() / kScale);
  return {b0, b1, b2, b3};
}

}  // namespace qam16

struct ServingLink {
  int bs = 0;
  int path = 0;
};

/// Serving pair for the two data streams: one path from each of two distinct
/// base stations, with distinct receive grid bins so the user can separate
/// them. Among admissible pairs the largest |g_1| |g_2| wins; LOS pairs come
/// first when they are admissible, ties go to the lower indices.
inline std::array<ServingLink, 2> serving_links(const MultipathChannel& chan) {
  if (chan.per_bs_paths.size() < 2) {
    throw InvalidParameter("ber_experiment: need at least two base stations");
  }
  std::optional<std::array<ServingLink, 2>> best;
  std::pair<int, double> best_score{-1, 0.0};
  for (std::size_t m1 = 0; m1 < chan.per_bs_paths.size(); ++m1) {
    for (std::size_t m2 = m1 + 1; m2 < chan.per_bs_paths.size(); ++m2) {
      const auto& a = chan.per_bs_paths[m1];
      const auto& b = chan.per_bs_paths[m2];
      for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
          if (a[i].aoa_grid_index == b[j].aoa_grid_index) continue;
          const std::pair<int, double> score{(a[i].is_los ? 1 : 0) + (b[j].is_los ? 1 : 0),
                                             std::abs(a[i].gain) * std::abs(b[j].gain)};
          if (score > best_score) {
            best_score = score;
            best = {{{static_cast<int>(m1), static_cast<int>(i)},
                     {static_cast<int>(m2), static_cast<int>(j)}}};
          }
        }
      }
    }
  }
  if (!best) throw InvalidParameter("ber_experiment: no pair of resolvable paths");
  return *best;
}

/// 2x2 channel after analog beams: entry (k, b) = w_k^H H_b v_b, where H_b is
/// the frequency-domain channel of serving BS b rebuilt from a stacked
/// angular vector.
inline Eigen::Matrix2cd effective_channel(const CVector& angular,
                                          const SystemConfig& c, const DftPair& dft,
                                          const std::array<ServingLink, 2>& serving,
                                          const std::array<CVector, 2>& tx_beams,
                                          const std::array<CVector, 2>& rx_beams) {
  Eigen::Matrix2cd h;
  for (int b = 0; b < 2; ++b) {
    const CMatrix hf = inverse_angular_transform(
        extract_block(angular, serving[static_cast<std::size_t>(b)].bs, c.n_ant_user,
                      c.n_ant_bs),
        dft);
    const CVector hv = hf * tx_beams[static_cast<std::size_t>(b)];
    for (int k = 0; k < 2; ++k) {
      h(k, b) = rx_beams[static_cast<std::size_t>(k)].dot(hv);
    }
  }
  return h;
}

struct BerRow {
  double snr_db = 0.0;
  std::string csi_source;
  double ber = 0.0;
  std::int64_t symbols = 0;
};

struct BerTable {
  std::vector<BerRow> rows;
  bool operator==(const BerTable& o) const {
    if (rows.size() != o.rows.size()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].snr_db != o.rows[i].snr_db || rows[i].csi_source != o.rows[i].csi_source ||
          rows[i].ber != o.rows[i].ber || rows[i].symbols != o.rows[i].symbols) {
        return false;
      }
    }
    return true;
  }
};

struct BerOptions {
  /// Channel uses (two QAM symbols each) per channel realization.
  int uses_per_block = 1000;
  int workers = 1;
  /// Replace the estimation-stage SNR by +inf (noiseless pilots).
  bool noiseless_estimation = false;
};

/// Simplified two-stream downlink: the pair from serving_links() serves the
/// user; analog beams are the steering vectors of those paths; regularized ZF
/// (MMSE) precoding is computed from each CSI source and data passes through
/// the true channel. The same SNR drives estimation and data detection. Symbols, noise and
/// channel realizations are shared across CSI sources and SNR points.
inline BerTable ber_experiment(const SystemConfig& config,
                               const std::vector<double>& snr_values,
                               std::int64_t n_symbols, std::uint64_t seed,
                               const BerOptions& opts = {}) {
  validate(config);
  if (n_symbols < 10000) throw InvalidParameter("ber_experiment: need >= 1e4 symbols");
  if (config.n_bs < 2) {
    throw InvalidParameter("ber_experiment: need at least two base stations");
  }
  if (opts.uses_per_block < 1) throw InvalidParameter("ber_experiment: empty blocks");

  const std::int64_t symbols_per_block = 2LL * opts.uses_per_block;
  const auto n_blocks =
      static_cast<std::size_t>((n_symbols + symbols_per_block - 1) / symbols_per_block);
  static const std::array<std::string, 3> sources = {"perfect", "ssamp", "adaptive_omp"};

  BerTable table;
  for (double snr : snr_values) {
    SystemConfig c = config;
    c.snr_db = opts.noiseless_estimation ? INFINITY : snr;
    validate(c);
    const double snr_lin = db_to_linear(snr);

    std::vector<std::array<std::int64_t, 3>> errors(n_blocks, {0, 0, 0});
    parallel_for(n_blocks, opts.workers, [&](std::size_t blk) {
      const std::uint64_t s = trial_seed(seed, blk);
      const TrialData d = prepare_trial(c, s);
      const TrialEstimates est = run_estimators(d);

      const auto serving = serving_links(d.channel);
      std::array<CVector, 2> tx_beams;
      std::array<CVector, 2> rx_beams;
      for (int b = 0; b < 2; ++b) {
        const auto& link = serving[static_cast<std::size_t>(b)];
        const auto& path = d.channel.per_bs_paths[static_cast<std::size_t>(link.bs)]
                                                 [static_cast<std::size_t>(link.path)];
        tx_beams[b] = steering_vector(c.n_ant_bs, path.aod_sin, c.antenna_spacing_ratio) /
                      std::sqrt(static_cast<double>(c.n_ant_bs));
        rx_beams[b] = steering_vector(c.n_ant_user, path.aoa_sin, c.antenna_spacing_ratio) /
                      std::sqrt(static_cast<double>(c.n_ant_user));
      }
      // CSI at the first pilot subcarrier, which also carries the data.
      const Eigen::Matrix2cd h_true = effective_channel(d.truth.vectors[0], c, d.dft,
                                                        serving, tx_beams, rx_beams);
      const std::array<Eigen::Matrix2cd, 3> h_csi = {
          h_true,
          effective_channel(est.ssamp.estimates[0], c, d.dft, serving, tx_beams, rx_beams),
          effective_channel(est.adaptive_omp->estimates[0], c, d.dft, serving, tx_beams,
                            rx_beams)};

      std::array<Eigen::Matrix2cd, 3> precoder;
      std::array<Eigen::Vector2cd, 3> scale;
      for (std::size_t k = 0; k < 3; ++k) {
        const Eigen::Matrix2cd& h = h_csi[k];
        const double reg = h.squaredNorm() / 2.0 / snr_lin;
        const Eigen::Matrix2cd w =
            h.adjoint() * (h * h.adjoint() + reg * Eigen::Matrix2cd::Identity())
                              .completeOrthogonalDecomposition()
                              .pseudoInverse();
        const double norm = w.norm();
        precoder[k] = norm > 0.0 ? Eigen::Matrix2cd(std::sqrt(2.0) / norm * w) : w;
        scale[k] = (h * precoder[k]).diagonal();
        for (int i = 0; i < 2; ++i) {
          if (scale[k](i) == cplx(0.0)) scale[k](i) = 1.0;
        }
      }
      const double noise_var = h_true.squaredNorm() / 2.0 / snr_lin;

      Rng rng(stream_seed(s, SeedStream::data));
      std::bernoulli_distribution bit(0.5);
      for (int u = 0; u < opts.uses_per_block; ++u) {
        std::array<std::array<int, 4>, 2> bits;
        Eigen::Vector2cd sym;
        for (int k = 0; k < 2; ++k) {
          for (auto& b : bits[k]) b = bit(rng) ? 1 : 0;
          sym(k) = qam16::modulate(bits[k]);
        }
        Eigen::Vector2cd noise;
        noise(0) = complex_gaussian(rng, noise_var);
        noise(1) = complex_gaussian(rng, noise_var);
        for (std::size_t src = 0; src < 3; ++src) {
          const Eigen::Vector2cd y = h_true * (precoder[src] * sym) + noise;
          for (int k = 0; k < 2; ++k) {
            const auto got = qam16::demodulate(y(k) / scale[src](k));
            for (int i = 0; i < 4; ++i) {
              errors[blk][src] += got[static_cast<std::size_t>(i)] != bits[k][static_cast<std::size_t>(i)];
            }
          }
        }
      }
    });

    const std::int64_t total_symbols = static_cast<std::int64_t>(n_blocks) * symbols_per_block;
    for (std::size_t src = 0; src < 3; ++src) {
      std::int64_t err = 0;
      for (const auto& e : errors) err += e[src];
      table.rows.push_back({snr, sources[src],
                            static_cast<double>(err) / (4.0 * static_cast<double>(total_symbols)),
                            total_symbols});
    }
  }
  return table;
}

}  // namespace scs
