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

#include "oracles.hpp"
#include "scs/channel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

namespace {

using namespace scs;

SystemConfig small_config() {
  SystemConfig c;
  c.n_ant_bs = 16;
  c.n_ant_user = 4;
  c.n_paths = 2;
  c.n_subcarriers = 8;
  c.n_pilot_subcarriers = 8;
  c.max_delay_s = 25e-9;
  return c;
}

TEST(PathLoss, FormulaScenarios) {
  EXPECT_NEAR(path_loss_db({3000, 2.2, 1.0, 0.0, 0.0}), 102.04, 0.01);
  EXPECT_NEAR(path_loss_db({30000, 2.2, 0.1, 0.1, 5.0}), 100.55, 0.01);
  EXPECT_NEAR(path_loss_db({30000, 2.2, 0.03, 0.1, 5.0}), 88.69, 0.01);
  EXPECT_NEAR(path_loss_db({1, 3.7, 1.0, 0.0, 0.0}), 32.5, 1e-12);
}

TEST(PathLoss, MatchesDirectEvaluation) {
  for (double f : {900.0, 28000.0, 73000.0}) {
    for (double d : {0.05, 0.2, 2.0}) {
      const double expect = 32.5 + 20 * std::log10(f) + 10 * 2.5 * std::log10(d) + 1.5 * d;
      EXPECT_NEAR(path_loss_db({f, 2.5, d, 0.5, 1.0}), expect, 1e-9);
    }
  }
}

TEST(PathLoss, RejectsInvalidParameters) {
  EXPECT_THROW(path_loss_db({0, 2, 1, 0, 0}), InvalidParameter);
  EXPECT_THROW(path_loss_db({1000, 2, 0, 0, 0}), InvalidParameter);
  EXPECT_THROW(path_loss_db({1000, 2, -1, 0, 0}), InvalidParameter);
  EXPECT_THROW(path_loss_db({1000, 2, 1, -0.1, 0}), InvalidParameter);
}

TEST(SteeringVector, Examples) {
  const CVector broadside = steering_vector(4, 0.0, 0.5);
  for (Index k = 0; k < 4; ++k) EXPECT_EQ(broadside(k), cplx(1.0, 0.0));

  const CVector endfire = steering_vector(2, 1.0, 0.5);
  EXPECT_NEAR(std::abs(endfire(0) - cplx(1, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(endfire(1) - cplx(-1, 0)), 0.0, 1e-15);

  const CVector v = steering_vector(8, 0.25, 0.5);
  EXPECT_NEAR(std::abs(v.dot(v) - cplx(8.0, 0.0)), 0.0, 1e-12);
  EXPECT_EQ(oracle::naive_dft_peak(v), 1);
  const CMatrix a = dft_matrix(8);
  Index peak = 0;
  (a.adjoint() * v).cwiseAbs().maxCoeff(&peak);
  EXPECT_EQ(peak, 1);
}

TEST(SteeringVector, UnitModulus) {
  const CVector v = steering_vector(33, -0.71, 0.5);
  for (Index k = 0; k < v.size(); ++k) EXPECT_NEAR(std::abs(v(k)), 1.0, 1e-14);
  EXPECT_THROW(steering_vector(0, 0.0, 0.5), InvalidParameter);
}

TEST(Dft, Unitary) {
  for (int n : {1, 4, 16, 32, 64}) {
    const CMatrix a = dft_matrix(n);
    EXPECT_LE((a * a.adjoint() - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12) << n;
  }
}

TEST(Dft, GridSteeringVectorIsScaledColumn) {
  const int n = 16;
  const CMatrix a = dft_matrix(n);
  for (int i = 0; i < n; ++i) {
    const CVector v = steering_vector(n, grid_sin_angle(i, n, 0.5), 0.5);
    EXPECT_LE((v / std::sqrt(n) - a.col(i)).norm(), 1e-12) << i;
  }
}

TEST(Multipath, LosNlosPowerRatio) {
  SystemConfig c;
  c.n_paths = 4;
  c.n_bs = 1;
  c.rician_k_db = 10.0;
  double los = 0.0;
  double nlos = 0.0;
  const int draws = 100000;
  for (int s = 0; s < draws; ++s) {
    const auto ch = draw_multipath(c, static_cast<std::uint64_t>(s));
    const auto& link = ch.per_bs_paths[0];
    los += std::norm(link[0].gain);
    nlos += std::norm(link[1].gain);
  }
  EXPECT_NEAR((los / draws) / (nlos / draws), 30.0, 30.0 * 0.05);
}

TEST(Multipath, SinglePathIsPureLos) {
  SystemConfig c;
  c.n_paths = 1;
  c.n_bs = 1;
  double power = 0.0;
  const int draws = 20000;
  for (int s = 0; s < draws; ++s) {
    const auto ch = draw_multipath(c, static_cast<std::uint64_t>(s));
    ASSERT_EQ(ch.per_bs_paths[0].size(), 1U);
    EXPECT_TRUE(ch.per_bs_paths[0][0].is_los);
    power += std::norm(ch.per_bs_paths[0][0].gain);
  }
  EXPECT_NEAR(power / draws, 1.0, 0.03);
  EXPECT_THROW(draw_multipath(c, 1, {.strict_rician = true}), InvalidParameter);
}

TEST(Multipath, StructureAndDeterminism) {
  const SystemConfig c = small_config();
  const auto a = draw_multipath(c, 42);
  const auto b = draw_multipath(c, 42);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == draw_multipath(c, 43));
  ASSERT_EQ(a.per_bs_paths.size(), static_cast<std::size_t>(c.n_bs));
  for (const auto& link : a.per_bs_paths) {
    ASSERT_EQ(link.size(), static_cast<std::size_t>(c.n_paths));
    int los = 0;
    std::set<int> aod;
    std::set<int> aoa;
    for (const auto& p : link) {
      los += p.is_los ? 1 : 0;
      EXPECT_GE(p.delay_s, 0.0);
      EXPECT_LE(p.delay_s, c.max_delay_s);
      EXPECT_GE(p.aoa_grid_index, 0);
      EXPECT_LT(p.aoa_grid_index, c.n_ant_user);
      EXPECT_GE(p.aod_grid_index, 0);
      EXPECT_LT(p.aod_grid_index, c.n_ant_bs);
      aod.insert(p.aod_grid_index);
      aoa.insert(p.aoa_grid_index);
    }
    EXPECT_EQ(los, 1);
    EXPECT_EQ(aod.size(), link.size());
    EXPECT_EQ(aoa.size(), link.size());
  }
}

TEST(DelayToFrequency, ZeroDelayIsFlat) {
  SystemConfig c = small_config();
  c.max_delay_s = 0.0;
  c.n_paths = 1;
  const auto ch = draw_multipath(c, 7);
  const auto f = delay_to_frequency(ch, c, {1, 2, 5, 8});
  for (std::size_t p = 1; p < f.size(); ++p) {
    EXPECT_LE((f[p][0] - f[0][0]).norm(), 1e-12);
  }
}

TEST(DelayToFrequency, SinglePathRankOne) {
  SystemConfig c = small_config();
  c.n_paths = 1;
  const auto ch = draw_multipath(c, 9);
  const auto f = delay_to_frequency(ch, c, {1, 3, 8});
  for (const auto& per_bs : f) {
    for (const auto& h : per_bs) EXPECT_EQ(numerical_rank(h), 1);
  }
}

TEST(DelayToFrequency, ParsevalOverSubcarriers) {
  SystemConfig c = small_config();
  c.n_paths = 4;
  c.n_ant_user = 8;
  c.n_bs = 1;
  const auto ch = draw_multipath(c, 11);
  std::vector<int> all(static_cast<std::size_t>(c.n_subcarriers));
  std::iota(all.begin(), all.end(), 1);
  const auto f = delay_to_frequency(ch, c, all);
  double mean = 0.0;
  for (const auto& per_bs : f) mean += per_bs[0].squaredNorm();
  mean /= static_cast<double>(all.size());
  double expect = 0.0;
  for (const auto& p : ch.per_bs_paths[0]) expect += std::norm(p.gain);
  expect *= c.n_ant_user * c.n_ant_bs;
  EXPECT_NEAR(mean, expect, 1e-9 * expect);
}

TEST(DelayToFrequency, RejectsOutOfRangeSubcarrier) {
  const SystemConfig c = small_config();
  const auto ch = draw_multipath(c, 1);
  EXPECT_THROW(delay_to_frequency(ch, c, {0}), InvalidParameter);
  EXPECT_THROW(delay_to_frequency(ch, c, {9}), InvalidParameter);
}

TEST(AngularTransform, IdentityChannel) {
  const DftPair dft = make_dft_pair(8, 8);
  const CMatrix h = CMatrix::Identity(8, 8);
  EXPECT_LE((angular_transform(h, dft) - dft.rx_dft.adjoint() * dft.tx_dft).norm(), 1e-12);
}

TEST(AngularTransform, OnGridPathConcentrates) {
  SystemConfig c = small_config();
  c.n_paths = 1;
  c.n_bs = 1;
  const DftPair dft = make_dft_pair(c);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ch = draw_multipath(c, s);
    const auto f = delay_to_frequency(ch, c, {3});
    const CMatrix ha = angular_transform(f[0][0], dft);
    const double total = ha.squaredNorm();
    Index r = 0;
    Index col = 0;
    const double peak = ha.cwiseAbs2().maxCoeff(&r, &col);
    EXPECT_GE(peak, 0.999 * total);
    EXPECT_EQ(r, ch.per_bs_paths[0][0].aoa_grid_index);
    EXPECT_EQ(col, ch.per_bs_paths[0][0].aod_grid_index);
  }
}

TEST(AngularTransform, RoundTripAndEnergy) {
  std::mt19937_64 rng(5);
  const DftPair dft = make_dft_pair(4, 16);
  for (int i = 0; i < 50; ++i) {
    const CMatrix h = oracle::random_matrix(rng, 4, 16);
    const CMatrix ha = angular_transform(h, dft);
    EXPECT_NEAR(ha.norm(), h.norm(), 1e-10 * h.norm());
    EXPECT_LE((inverse_angular_transform(ha, dft) - h).norm(), 1e-10 * h.norm());
  }
  EXPECT_THROW(angular_transform(CMatrix::Zero(3, 16), dft), DimensionMismatch);
  EXPECT_THROW(inverse_angular_transform(CMatrix::Zero(4, 15), dft), DimensionMismatch);
}

TEST(AggregateSparseVector, Vectorization) {
  CMatrix h = CMatrix::Zero(4, 6);
  h(2, 3) = cplx(1.0, -2.0);
  const auto one = aggregate_sparse_vector({h});
  EXPECT_EQ(one.support, (IndexSet{3 * 4 + 2}));

  CMatrix g = CMatrix::Zero(4, 6);
  g(0, 5) = 3.0;
  const auto two = aggregate_sparse_vector({h, g});
  EXPECT_EQ(two.support.size(), 2U);
  EXPECT_EQ(two.values.size(), 48);
  EXPECT_EQ(two.values(24 + 5 * 4 + 0), cplx(3.0, 0.0));
  EXPECT_LE((extract_block(two.values, 1, 4, 6) - g).norm(), 0.0);
  EXPECT_THROW(aggregate_sparse_vector({h, CMatrix::Zero(3, 6)}), DimensionMismatch);
}

TEST(AngularChannelSet, FullScaleSparsity) {
  SystemConfig c;
  c.n_bs = 4;
  c.n_paths = 4;
  c.n_ant_bs = 32;
  c.n_ant_user = 8;
  c.n_subcarriers = 64;
  c.n_pilot_subcarriers = 8;
  c.max_delay_s = 100e-9;
  const DftPair dft = make_dft_pair(c);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto ch = draw_multipath(c, s);
    const auto set = angular_channel_set(ch, c, dft, {1, 9, 17, 25});
    EXPECT_EQ(set.sparsity, 16);
  }
}

TEST(AngularChannelSet, CommonSupportAndSparsityBound) {
  const SystemConfig c = small_config();
  const DftPair dft = make_dft_pair(c);
  std::vector<int> pilots(8);
  std::iota(pilots.begin(), pilots.end(), 1);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto ch = draw_multipath(c, s);
    const auto set = angular_channel_set(ch, c, dft, pilots);
    EXPECT_EQ(set.sparsity, static_cast<int>(set.support.size()));
    EXPECT_LE(set.sparsity, c.n_paths * c.n_bs);
    for (const auto& v : set.vectors) {
      EXPECT_EQ(numerical_support(v), set.support);
    }
    const auto again = angular_channel_set(draw_multipath(c, s), c, dft, pilots);
    for (std::size_t p = 0; p < pilots.size(); ++p) {
      EXPECT_EQ(again.vectors[p], set.vectors[p]);
    }
  }
}

TEST(AngularChannelSet, OffGridLeaks) {
  SystemConfig c = small_config();
  c.n_paths = 1;
  c.n_bs = 1;
  const DftPair dft = make_dft_pair(c);
  const auto ch = draw_multipath(c, 3, {.off_grid = true});
  const auto set = angular_channel_set(ch, c, dft, {1});
  EXPECT_GT(set.sparsity, 1);
}

}  // namespace
