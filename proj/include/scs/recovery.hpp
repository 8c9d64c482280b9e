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

// Joint sparse recovery of channel vectors that share one support across
// pilot subcarriers, plus the per-subcarrier OMP baseline and the
// known-support least-squares bound.

#pragma once

#include "scs/common.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace scs {

enum class Termination {
  weakest_below_threshold,
  residual_increase,
  max_iterations,
  /// Baseline only: residual energy dropped below its stopping level.
  residual_below_threshold,
};

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::weakest_below_threshold:
      return "weakest-coefficient-below-threshold";
    case Termination::residual_increase:
      return "residual-increase-vs-last-stage";
    case Termination::max_iterations:
      return "max-iterations";
    case Termination::residual_below_threshold:
      return "residual-below-threshold";
  }
  return "unknown";
}

/// What the stage loop did after one pass.
enum class StepDecision { accepted, stage_switch, stop_threshold, stop_residual };

struct TraceEntry {
  int iteration = 0;
  int stage = 0;
  int sparsity = 0;
  double residual_energy = 0.0;
  StepDecision decision = StepDecision::accepted;
};

struct EstimationResult {
  std::vector<CVector> estimates;
  IndexSet support;
  int iterations = 0;
  /// Completed stages; each completed stage adds one to the sparsity, so
  /// for SSAMP this equals support.size().
  int stages = 0;
  double final_residual_energy = 0.0;
  Termination termination = Termination::weakest_below_threshold;
  std::vector<TraceEntry> trace;
};

namespace detail {

inline void check_problem(std::span<const CVector> received,
                          std::span<const CMatrix> operators) {
  if (received.empty() || received.size() != operators.size()) {
    throw DimensionMismatch("recovery: need matching, non-empty r/Phi lists");
  }
  const Index cols = operators.front().cols();
  for (std::size_t p = 0; p < operators.size(); ++p) {
    if (operators[p].cols() != cols) {
      throw DimensionMismatch("recovery: operators differ in column count");
    }
    if (operators[p].rows() != received[p].size()) {
      throw DimensionMismatch("recovery: operator rows do not match r");
    }
    if (operators[p].rows() < 1) {
      throw InvalidParameter("recovery: operators have no rows");
    }
  }
}

inline double total_energy(const std::vector<CVector>& v) {
  double e = 0.0;
  for (const auto& x : v) e += x.squaredNorm();
  return e;
}

/// Sum over subcarriers of |x_p[k]|^2 for every k.
inline Eigen::VectorXd joint_energy(const std::vector<CVector>& v) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(v.front().size());
  for (const auto& x : v) e += x.cwiseAbs2();
  return e;
}

}  // namespace detail

struct SsampOptions {
  /// Iteration cap; 0 selects 10 * (rows of the first operator).
  int max_iterations = 0;
  /// Record one TraceEntry per iteration.
  bool record_trace = true;
};

/// Structured-sparsity adaptive matching pursuit.
///
/// Each iteration correlates the residuals with the operators, merges the
/// `sparsity` strongest joint proxies with the previous support, solves LS,
/// prunes back to `sparsity` entries and re-solves. A stage ends (sparsity
/// grows by one) when the residual stops shrinking. The run stops when the
/// weakest retained coefficient falls below `p_th` in mean energy per
/// subcarrier, or when a stage ends with more residual than the previous
/// one; either way the estimate of the last completed stage is returned.
inline EstimationResult ssamp(std::span<const CVector> received,
                              std::span<const CMatrix> operators, double p_th,
                              const SsampOptions& opts = {}) {
  detail::check_problem(received, operators);
  if (!(p_th > 0.0)) throw InvalidParameter("ssamp: p_th must be > 0");

  const std::size_t n_sub = operators.size();
  const double n_sub_d = static_cast<double>(n_sub);
  const Index n = operators.front().cols();
  const int max_iter = opts.max_iterations > 0
                           ? opts.max_iterations
                           : static_cast<int>(10 * operators.front().rows());

  int sparsity = 1;
  int iteration = 1;
  int stage = 1;
  int total_iterations = 0;

  std::vector<CVector> c(n_sub, CVector::Zero(n));
  std::vector<CVector> c_last(n_sub, CVector::Zero(n));
  IndexSet support_prev;  // Omega^{i-1}
  IndexSet support_last;  // support of c_last
  std::vector<CVector> b_prev(received.begin(), received.end());  // b^{i-1}
  double b_prev_energy = detail::total_energy(b_prev);
  // No previous stage yet: the residual-increase exit cannot fire.
  std::optional<double> b_last_energy;

  EstimationResult result;
  result.termination = Termination::max_iterations;

  std::vector<CVector> proxy(n_sub);
  std::vector<CVector> b(n_sub);
  std::vector<CVector> t(n_sub);

  while (total_iterations < max_iter) {
    ++total_iterations;

    for (std::size_t p = 0; p < n_sub; ++p) {
      proxy[p] = operators[p].adjoint() * b_prev[p];
    }
    const IndexSet gamma = top_indices(detail::joint_energy(proxy), sparsity);
    const IndexSet candidates = set_union(support_prev, gamma);

    for (std::size_t p = 0; p < n_sub; ++p) {
      t[p] = scatter(
          least_squares(select_columns(operators[p], candidates), received[p]),
          candidates, n);
    }
    const Eigen::VectorXd t_energy = detail::joint_energy(t);
    Eigen::VectorXd cand_energy(static_cast<Index>(candidates.size()));
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      cand_energy(static_cast<Index>(k)) = t_energy(candidates[k]);
    }
    IndexSet omega;
    for (Index k : top_indices(cand_energy, sparsity)) {
      omega.push_back(candidates[static_cast<std::size_t>(k)]);
    }

    for (std::size_t p = 0; p < n_sub; ++p) {
      const CMatrix sub = select_columns(operators[p], omega);
      const CVector coef = least_squares(sub, received[p]);
      c[p] = scatter(coef, omega, n);
      b[p] = received[p] - sub * coef;
    }
    const double b_energy = detail::total_energy(b);

    // Weakest retained coefficient; ties go to the lowest index.
    double weakest = std::numeric_limits<double>::infinity();
    for (Index l : omega) {
      double e = 0.0;
      for (std::size_t p = 0; p < n_sub; ++p) e += std::norm(c[p](l));
      if (e < weakest) weakest = e;
    }
    if (omega.empty()) weakest = 0.0;

    StepDecision decision;
    if (weakest / n_sub_d < p_th) {
      decision = StepDecision::stop_threshold;
    } else if (b_last_energy && *b_last_energy < b_energy) {
      decision = StepDecision::stop_residual;
    } else if (b_prev_energy <= b_energy) {
      decision = StepDecision::stage_switch;
    } else {
      decision = StepDecision::accepted;
    }

    if (opts.record_trace) {
      result.trace.push_back({iteration, stage, sparsity, b_energy, decision});
    }

    if (decision == StepDecision::stop_threshold) {
      result.termination = Termination::weakest_below_threshold;
      break;
    }
    if (decision == StepDecision::stop_residual) {
      result.termination = Termination::residual_increase;
      break;
    }
    if (decision == StepDecision::stage_switch) {
      ++stage;
      sparsity = stage;
      c_last = c;
      support_last = omega;
      b_last_energy = b_energy;
    } else {
      support_prev = omega;
      b_prev = b;
      b_prev_energy = b_energy;
      ++iteration;
    }
  }

  result.estimates = std::move(c_last);
  result.support = std::move(support_last);
  result.iterations = total_iterations;
  result.stages = stage - 1;
  double residual = 0.0;
  for (std::size_t p = 0; p < n_sub; ++p) {
    residual += (received[p] - operators[p] * result.estimates[p]).squaredNorm();
  }
  result.final_residual_energy = residual;
  return result;
}

/// Per-subcarrier OMP: add the column most correlated with the residual,
/// re-fit by LS, stop once the residual energy is at or below
/// `residual_threshold` or the support fills the row count. Subcarriers do
/// not share supports; the reported support is their union.
inline EstimationResult adaptive_omp(std::span<const CVector> received,
                                     std::span<const CMatrix> operators,
                                     double residual_threshold) {
  detail::check_problem(received, operators);
  if (!(residual_threshold > 0.0)) {
    throw InvalidParameter("adaptive_omp: residual_threshold must be > 0");
  }
  const Index n = operators.front().cols();
  EstimationResult result;
  result.termination = Termination::residual_below_threshold;

  for (std::size_t p = 0; p < operators.size(); ++p) {
    const CMatrix& phi = operators[p];
    const Index limit = std::min(phi.rows(), n);
    IndexSet support;
    CVector residual = received[p];
    CVector coef;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    while (residual.squaredNorm() > residual_threshold &&
           static_cast<Index>(support.size()) < limit) {
      const Eigen::VectorXd corr = (phi.adjoint() * residual).cwiseAbs2();
      Index best = -1;
      double best_val = -1.0;
      for (Index k = 0; k < n; ++k) {
        if (!used[static_cast<std::size_t>(k)] && corr(k) > best_val) {
          best = k;
          best_val = corr(k);
        }
      }
      used[static_cast<std::size_t>(best)] = true;
      support.insert(std::upper_bound(support.begin(), support.end(), best), best);
      const CMatrix sub = select_columns(phi, support);
      coef = least_squares(sub, received[p]);
      residual = received[p] - sub * coef;
      ++result.iterations;
    }
    if (static_cast<Index>(support.size()) >= limit &&
        residual.squaredNorm() > residual_threshold) {
      result.termination = Termination::max_iterations;
    }
    result.estimates.push_back(support.empty() ? CVector(CVector::Zero(n))
                                               : scatter(coef, support, n));
    result.final_residual_energy += residual.squaredNorm();
    result.support = set_union(result.support, support);
  }
  result.stages = static_cast<int>(result.support.size());
  return result;
}

/// Minimum-norm LS restricted to a known support.
inline EstimationResult oracle_ls(std::span<const CVector> received,
                                  std::span<const CMatrix> operators,
                                  const IndexSet& true_support) {
  detail::check_problem(received, operators);
  const Index n = operators.front().cols();
  for (Index k : true_support) {
    if (k < 0 || k >= n) throw InvalidParameter("oracle_ls: support index out of range");
  }
  EstimationResult result;
  result.support = true_support;
  for (std::size_t p = 0; p < operators.size(); ++p) {
    if (static_cast<Index>(true_support.size()) > operators[p].rows()) {
      throw NumericalError("oracle_ls: support larger than row count (underdetermined)");
    }
    const CMatrix sub = select_columns(operators[p], true_support);
    const CVector coef = least_squares(sub, received[p]);
    result.estimates.push_back(scatter(coef, true_support, n));
    result.final_residual_energy += (received[p] - sub * coef).squaredNorm();
  }
  result.iterations = 1;
  result.stages = static_cast<int>(true_support.size());
  return result;
}

inline constexpr double kNmseFloorDb = -300.0;

/// 10 log10( sum_p ||est_p - truth_p||^2 / sum_p ||truth_p||^2 ), floored at
/// -300 dB.
inline double nmse_db(std::span<const CVector> estimates,
                      std::span<const CVector> truth) {
  if (estimates.size() != truth.size()) {
    throw DimensionMismatch("nmse_db: vector counts differ");
  }
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t p = 0; p < truth.size(); ++p) {
    if (estimates[p].size() != truth[p].size()) {
      throw DimensionMismatch("nmse_db: vector lengths differ");
    }
    err += (estimates[p] - truth[p]).squaredNorm();
    ref += truth[p].squaredNorm();
  }
  if (!(ref > 0.0)) throw NumericalError("nmse_db: zero-energy reference");
  if (err == 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(err / ref));
}

/// Termination threshold schedule: 0.06, 0.02, 0.01, 0.008, 0.005 at 10, 15,
/// 20, 25 and >= 30 dB. Between listed points the value of the nearest
/// listed SNR below applies; below 10 dB the 10 dB value applies.
inline double p_th_for_snr(double snr_db) {
  if (snr_db >= 30.0) return 0.005;
  if (snr_db >= 25.0) return 0.008;
  if (snr_db >= 20.0) return 0.01;
  if (snr_db >= 15.0) return 0.02;
  return 0.06;
}

struct SupportMetrics {
  bool exact_match = false;
  double precision = 0.0;
  double recall = 0.0;
};

/// Set-overlap metrics. Empty sets count as fully precise / fully recalled.
inline SupportMetrics support_metrics(const IndexSet& estimated,
                                      const IndexSet& truth) {
  const auto common = static_cast<double>(set_intersection(estimated, truth).size());
  SupportMetrics m;
  m.exact_match = estimated == truth;
  m.precision = estimated.empty() ? 1.0 : common / static_cast<double>(estimated.size());
  m.recall = truth.empty() ? 1.0 : common / static_cast<double>(truth.size());
  return m;
}

}  // namespace scs
