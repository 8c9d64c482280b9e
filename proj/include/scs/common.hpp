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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace scs {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

/// Sorted, duplicate-free set of column indices.
using IndexSet = std::vector<Index>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Relative singular-value cutoff used by every least-squares solve.
inline constexpr double kPinvTolerance = 1e-10;

/// Relative singular-value cutoff used for rank and spark decisions.
inline constexpr double kRankTolerance = 1e-8;

class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a quantity is mathematically undefined for the given data
/// (zero-energy reference, rank-deficient bridge, underdetermined oracle).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeding

/// splitmix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(base ^ mix_seed(stream));
}

using Rng = std::mt19937_64;

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cplx complex_gaussian(Rng& rng, double variance) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  const double re = normal(rng);
  const double im = normal(rng);
  return {re, im};
}

inline double uniform_phase(Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
  return uniform(rng);
}

// ---------------------------------------------------------------------------
// Linear algebra helpers

/// Minimum-norm least-squares solution of A x = b. Singular values at or
/// below tol * sigma_max are treated as zero.
inline CVector least_squares(const CMatrix& a, const CVector& b,
                             double tol = kPinvTolerance) {
  if (a.rows() != b.size()) {
    throw DimensionMismatch("least_squares: row count does not match rhs");
  }
  if (a.cols() == 0) return CVector(0);
  if (a.rows() == 0) return CVector::Zero(a.cols());
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(tol);
  return svd.solve(b);
}

/// Moore-Penrose pseudo-inverse with the same cutoff rule as least_squares.
inline CMatrix pseudo_inverse(const CMatrix& a, double tol = kPinvTolerance) {
  if (a.rows() == 0 || a.cols() == 0) return CMatrix::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = tol * s(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

inline int numerical_rank(const CMatrix& a, double tol = kRankTolerance) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(a);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  const double cutoff = tol * s(0);
  int rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++rank;
  }
  return rank;
}

inline CMatrix select_columns(const CMatrix& a, const IndexSet& columns) {
  CMatrix out(a.rows(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.col(static_cast<Index>(k)) = a.col(columns[k]);
  }
  return out;
}

/// Scatter `values` into a zero vector of length n at `columns`.
inline CVector scatter(const CVector& values, const IndexSet& columns,
                       Index n) {
  CVector out = CVector::Zero(n);
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out(columns[k]) = values(static_cast<Index>(k));
  }
  return out;
}

/// Indices of the `count` largest scores; ties resolve to the lower index.
/// The result is sorted ascending.
inline IndexSet top_indices(const Eigen::VectorXd& scores, Index count) {
  const Index n = scores.size();
  count = std::clamp<Index>(count, 0, n);
  IndexSet order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Index lhs, Index rhs) {
    return scores(lhs) > scores(rhs);
  });
  order.resize(static_cast<std::size_t>(count));
  std::sort(order.begin(), order.end());
  return order;
}

inline IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

inline IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

/// Indices whose magnitude exceeds rel_tol times the largest magnitude.
inline IndexSet numerical_support(const CVector& v, double rel_tol = 1e-9) {
  IndexSet out;
  if (v.size() == 0) return out;
  const double peak = v.cwiseAbs().maxCoeff();
  if (peak == 0.0) return out;
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) >= rel_tol * peak) out.push_back(i);
  }
  return out;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace scs
