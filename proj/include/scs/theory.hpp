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

// Small-instance checks for generalized multiple-measurement-vector (GMMV)
// uniqueness: spark, bridge matrices, the rank condition and an exhaustive
// l0 oracle. Also the closed-form pilot overhead counts.

#pragma once

#include "scs/common.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace scs {

inline constexpr Index kSparkMaxColumns = 24;
inline constexpr Index kL0MaxColumns = 16;
inline constexpr int kL0MaxSparsity = 3;

namespace detail {

/// Calls visit(subset) for every k-subset of {0..n-1} in lexicographic order
/// until it returns true. Returns whether any call returned true.
template <typename Visit>
bool for_each_subset(Index n, Index k, Visit&& visit) {
  IndexSet subset(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) subset[static_cast<std::size_t>(i)] = i;
  if (k > n) return false;
  while (true) {
    if (visit(subset)) return true;
    Index i = k - 1;
    while (i >= 0 && subset[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return false;
    ++subset[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j) {
      subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

}  // namespace detail

/// Smallest number of linearly dependent columns. Returns min(m, n) + 1 when
/// no subset of size <= min(m, n) is dependent. A zero column gives 1.
inline int spark(const CMatrix& a) {
  const Index n = a.cols();
  if (n > kSparkMaxColumns) {
    throw InvalidParameter("spark: exhaustive search refused above 24 columns");
  }
  const Index limit = std::min(a.rows(), n);
  auto has_dependent = [&](Index k) {
    return detail::for_each_subset(n, k, [&](const IndexSet& s) {
      Eigen::ColPivHouseholderQR<CMatrix> qr(select_columns(a, s));
      qr.setThreshold(kRankTolerance);
      return qr.rank() < k;
    });
  };
  if (limit == 0 || !has_dependent(limit)) return static_cast<int>(limit + 1);
  for (Index k = 1; k < limit; ++k) {
    if (has_dependent(k)) return static_cast<int>(k);
  }
  return static_cast<int>(limit);
}

/// y_p = Phi_p x_p with a common support across p.
struct GmmvInstance {
  std::vector<CMatrix> operators;
  std::vector<CVector> signals;
  std::vector<CVector> measurements;
  IndexSet support;
  int sparsity = 0;
};

/// Fills measurements and the common support from operators and signals.
inline GmmvInstance make_gmmv_instance(std::vector<CMatrix> operators,
                                       std::vector<CVector> signals) {
  if (operators.empty() || operators.size() != signals.size()) {
    throw DimensionMismatch("make_gmmv_instance: operator/signal count");
  }
  GmmvInstance inst;
  for (std::size_t p = 0; p < operators.size(); ++p) {
    if (operators[p].cols() != signals[p].size() ||
        operators[p].rows() != operators.front().rows() ||
        operators[p].cols() != operators.front().cols()) {
      throw DimensionMismatch("make_gmmv_instance: shape mismatch");
    }
    inst.measurements.push_back(operators[p] * signals[p]);
    IndexSet nonzero;
    for (Index i = 0; i < signals[p].size(); ++i) {
      if (signals[p](i) != cplx(0.0)) nonzero.push_back(i);
    }
    inst.support = set_union(inst.support, nonzero);
  }
  inst.operators = std::move(operators);
  inst.signals = std::move(signals);
  inst.sparsity = static_cast<int>(inst.support.size());
  return inst;
}

/// Psi_p for p = 2..P: the minimum-Frobenius-norm m x m solution of
/// (Phi_p)_S = Psi_p (Phi_1)_S, i.e. (Phi_p)_S (Phi_1)_S^+. It has rank |S|
/// and maps the column space of (Phi_1)_S one-to-one onto that of (Phi_p)_S.
inline std::vector<CMatrix> bridge_matrices(const std::vector<CMatrix>& operators,
                                            const IndexSet& support) {
  if (operators.empty()) throw InvalidParameter("bridge_matrices: no operators");
  const Index m = operators.front().rows();
  if (static_cast<Index>(support.size()) > m) {
    throw InvalidParameter("bridge_matrices: support larger than row count");
  }
  const CMatrix base = select_columns(operators.front(), support);
  if (numerical_rank(base) < static_cast<int>(support.size())) {
    throw NumericalError("bridge_matrices: bridge columns are rank-deficient (no bridge)");
  }
  const CMatrix base_pinv = pseudo_inverse(base);
  std::vector<CMatrix> out;
  for (std::size_t p = 1; p < operators.size(); ++p) {
    if (operators[p].rows() != m) {
      throw DimensionMismatch("bridge_matrices: operators differ in row count");
    }
    out.push_back(select_columns(operators[p], support) * base_pinv);
  }
  return out;
}

struct UniquenessCertificate {
  int spark_phi1 = 0;
  int rank_ytilde = 0;
  /// False when the bridge columns of Phi_1 are rank-deficient; the
  /// condition is then not evaluated.
  bool evaluable = true;
  bool condition_holds = false;
  std::vector<CMatrix> bridge_matrices;
};

/// Y~ = [y_1, Psi_2^+ y_2, ..., Psi_P^+ y_P].
inline CMatrix bridged_measurements(const GmmvInstance& inst,
                                    const std::vector<CMatrix>& bridges) {
  CMatrix y(inst.operators.front().rows(),
            static_cast<Index>(inst.measurements.size()));
  y.col(0) = inst.measurements.front();
  for (std::size_t p = 1; p < inst.measurements.size(); ++p) {
    y.col(static_cast<Index>(p)) =
        pseudo_inverse(bridges[p - 1], kRankTolerance) * inst.measurements[p];
  }
  return y;
}

/// Evaluates 2S < spark(Phi_1) - 1 + rank(Y~).
inline UniquenessCertificate uniqueness_check(const GmmvInstance& inst) {
  UniquenessCertificate cert;
  cert.spark_phi1 = spark(inst.operators.front());
  try {
    cert.bridge_matrices = bridge_matrices(inst.operators, inst.support);
  } catch (const NumericalError&) {
    cert.evaluable = false;
    return cert;
  }
  cert.rank_ytilde = numerical_rank(bridged_measurements(inst, cert.bridge_matrices));
  cert.condition_holds =
      2 * inst.sparsity < cert.spark_phi1 - 1 + cert.rank_ytilde;
  return cert;
}

struct L0Solution {
  /// Every support of size <= S consistent with all measurements, ordered by
  /// size then lexicographically.
  std::vector<IndexSet> supports;

  [[nodiscard]] int minimal_size() const {
    return supports.empty() ? -1 : static_cast<int>(supports.front().size());
  }
  [[nodiscard]] bool unique() const {
    return !supports.empty() &&
           (supports.size() == 1 || supports[1].size() != supports[0].size());
  }
};

/// Enumerates every common support of size <= inst.sparsity for which each
/// y_p lies in the span of the selected columns of Phi_p (relative residual
/// <= 1e-8).
inline L0Solution exhaustive_l0_solve(const GmmvInstance& inst) {
  const Index n = inst.operators.front().cols();
  if (n > kL0MaxColumns || inst.sparsity > kL0MaxSparsity) {
    throw InvalidParameter("exhaustive_l0_solve: instance too large");
  }
  auto consistent = [&](const IndexSet& s) {
    for (std::size_t p = 0; p < inst.operators.size(); ++p) {
      const CVector& y = inst.measurements[p];
      const double y_norm = y.norm();
      if (y_norm == 0.0) continue;
      if (s.empty()) return false;
      const CMatrix sub = select_columns(inst.operators[p], s);
      const CVector fit = sub * least_squares(sub, y);
      if ((y - fit).norm() > 1e-8 * y_norm) return false;
    }
    return true;
  };
  L0Solution out;
  for (Index k = 0; k <= inst.sparsity; ++k) {
    detail::for_each_subset(n, k, [&](const IndexSet& s) {
      if (consistent(s)) out.supports.push_back(s);
      return false;
    });
  }
  return out;
}

struct GmmvShape {
  Index rows = 0;
  Index cols = 0;
  int sparsity = 0;
  int n_vectors = 0;
};

/// I.i.d. CN(0, 1) operators and jointly sparse CN(0, 1) signals on a
/// uniformly drawn common support.
inline GmmvInstance random_gmmv_instance(const GmmvShape& shape, std::uint64_t seed) {
  if (shape.rows < 1 || shape.cols < 1 || shape.n_vectors < 1 || shape.sparsity < 1 ||
      shape.sparsity > shape.cols) {
    throw InvalidParameter("random_gmmv_instance: invalid shape");
  }
  Rng rng(seed);
  IndexSet pool(static_cast<std::size_t>(shape.cols));
  std::iota(pool.begin(), pool.end(), Index{0});
  std::shuffle(pool.begin(), pool.end(), rng);
  IndexSet support(pool.begin(), pool.begin() + shape.sparsity);
  std::sort(support.begin(), support.end());

  std::vector<CMatrix> ops;
  std::vector<CVector> signals;
  for (int p = 0; p < shape.n_vectors; ++p) {
    CMatrix phi(shape.rows, shape.cols);
    for (Index i = 0; i < phi.size(); ++i) phi.data()[i] = complex_gaussian(rng, 1.0);
    CVector x = CVector::Zero(shape.cols);
    for (Index k : support) x(k) = complex_gaussian(rng, 1.0);
    ops.push_back(std::move(phi));
    signals.push_back(std::move(x));
  }
  return make_gmmv_instance(std::move(ops), std::move(signals));
}

struct TheoryCheckCase {
  GmmvShape shape;
  std::uint64_t seed = 0;
  UniquenessCertificate certificate;
  bool l0_unique = false;
  bool l0_matches_truth = false;
};

struct TheoryCheckSummary {
  std::vector<TheoryCheckCase> cases;  // certified instances only
  int drawn = 0;
  int not_evaluable = 0;

  [[nodiscard]] int consistent() const {
    int n = 0;
    for (const auto& c : cases) n += (c.l0_unique && c.l0_matches_truth) ? 1 : 0;
    return n;
  }
};

/// Draws random instances with m in [4, 8], n in [m + 1, 16], S in [1, 3] and
/// P in [1, 4] until n_certified of them satisfy the uniqueness condition,
/// then runs the exhaustive l0 search on each.
inline TheoryCheckSummary theory_check(int n_certified, std::uint64_t seed,
                                       int max_draws = 0) {
  if (n_certified < 1) throw InvalidParameter("theory_check: need at least one instance");
  if (max_draws <= 0) max_draws = 100 * n_certified;
  TheoryCheckSummary out;
  Rng shape_rng(mix_seed(seed, 0));
  auto uniform = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(shape_rng);
  };
  while (static_cast<int>(out.cases.size()) < n_certified) {
    if (out.drawn >= max_draws) {
      throw NumericalError("theory_check: too few certified instances");
    }
    GmmvShape shape;
    shape.rows = uniform(4, 8);
    shape.cols = uniform(static_cast<int>(shape.rows) + 1, 16);
    shape.sparsity = uniform(1, 3);
    shape.n_vectors = uniform(1, 4);
    const std::uint64_t instance_seed = mix_seed(seed, static_cast<std::uint64_t>(++out.drawn));
    const GmmvInstance inst = random_gmmv_instance(shape, instance_seed);
    TheoryCheckCase c{shape, instance_seed, uniqueness_check(inst)};
    if (!c.certificate.evaluable) {
      ++out.not_evaluable;
      continue;
    }
    if (!c.certificate.condition_holds) continue;
    const L0Solution sol = exhaustive_l0_solve(inst);
    c.l0_unique = sol.unique();
    c.l0_matches_truth = !sol.supports.empty() && sol.supports.front() == inst.support;
    out.cases.push_back(std::move(c));
  }
  return out;
}

/// Smallest G with G * n_chain_user >= sparsity + 1.
inline std::int64_t min_time_slots(std::int64_t sparsity, std::int64_t n_chain_user) {
  if (sparsity < 0 || n_chain_user < 1) {
    throw InvalidParameter("min_time_slots: need sparsity >= 0, chains >= 1");
  }
  return (sparsity + 1 + n_chain_user - 1) / n_chain_user;
}

/// ceil(N_g * M * N_a^US * N_a^BS / N_BB^US) pilots for time-domain
/// orthogonal training.
inline std::uint64_t orthogonal_pilot_overhead(std::uint64_t n_g, std::uint64_t n_bs,
                                               std::uint64_t n_ant_user,
                                               std::uint64_t n_ant_bs,
                                               std::uint64_t n_chain_user) {
  if (n_g == 0 || n_bs == 0 || n_ant_user == 0 || n_ant_bs == 0 || n_chain_user == 0) {
    throw InvalidParameter("orthogonal_pilot_overhead: inputs must be positive");
  }
  const std::uint64_t total = n_g * n_bs * n_ant_user * n_ant_bs;
  return (total + n_chain_user - 1) / n_chain_user;
}

}  // namespace scs
