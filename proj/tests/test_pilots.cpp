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
#include "scs/pilots.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

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
  c.n_slots = 6;
  return c;
}

/// Phi^(t) * vec(Hbar) through the matrix-product route.
CVector product_route(const PilotEnsemble& ens, const DftPair& dft, int t, int p,
                      const CMatrix& hbar) {
  const Index n_tx = dft.tx_dft.rows();
  const int m_count = ens.n_bs();
  CMatrix blk = CMatrix::Zero(n_tx * m_count, n_tx * m_count);
  CVector fbar(n_tx * m_count);
  for (int m = 0; m < m_count; ++m) {
    blk.block(m * n_tx, m * n_tx, n_tx, n_tx) = dft.tx_dft.adjoint();
    fbar.segment(m * n_tx, n_tx) = ens.pilot_vector(t, p, m);
  }
  return ens.combiner(t, p).adjoint() * dft.rx_dft * hbar * blk * fbar;
}

TEST(PilotIndices, EquiSpaced) {
  SystemConfig c;
  c.n_subcarriers = 64;
  c.n_pilot_subcarriers = 8;
  c.max_delay_s = 100e-9;
  EXPECT_EQ(pilot_subcarrier_indices(c), (std::vector<int>{1, 9, 17, 25, 33, 41, 49, 57}));
}

TEST(Ensemble, UnitModulusAndDeterminism) {
  const SystemConfig c = small_config();
  const PilotEnsemble a = draw_ensemble(c, 3);
  double worst = 0.0;
  for (const cplx& z : a.all_entries()) worst = std::max(worst, std::abs(std::abs(z) - 1.0));
  EXPECT_LE(worst, 1e-15);
  EXPECT_TRUE(a == draw_ensemble(c, 3));
  EXPECT_FALSE(a == draw_ensemble(c, 4));
}

TEST(Ensemble, RfStagesSharedAcrossSubcarriers) {
  const SystemConfig c = small_config();
  const PilotEnsemble e = draw_ensemble(c, 8);
  for (int t = 0; t < c.n_slots; ++t) {
    for (int p = 1; p < c.n_pilot_subcarriers; ++p) {
      EXPECT_EQ(e.rf_combiner(t, p), e.rf_combiner(t, 0));
      for (int m = 0; m < c.n_bs; ++m) EXPECT_EQ(e.rf_precoder(t, p, m), e.rf_precoder(t, 0, m));
    }
  }
  EXPECT_FALSE(e.bb_combiner(0, 0) == e.bb_combiner(0, 1));
  EXPECT_THROW(static_cast<void>(e.rf_combiner(c.n_slots, 0)), InvalidParameter);
  EXPECT_THROW(static_cast<void>(e.training(0, c.n_pilot_subcarriers, 0)), InvalidParameter);
}

TEST(Ensemble, PhasesUniformByKolmogorovSmirnov) {
  SystemConfig c = small_config();
  c.n_slots = 40;
  std::vector<double> phases;
  for (std::uint64_t s = 0; phases.size() < 100000; ++s) {
    for (const cplx& z : draw_ensemble(c, s).all_entries()) {
      double ph = std::arg(z);
      if (ph < 0.0) ph += 2.0 * oracle::kPi;
      phases.push_back(ph);
    }
  }
  EXPECT_LT(oracle::ks_uniform_phase(phases), oracle::ks_critical_1pct(phases.size()));
}

TEST(SlotMeasurement, KroneckerIdentity) {
  const SystemConfig c = small_config();
  const DftPair dft = make_dft_pair(c);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const PilotEnsemble e = draw_ensemble(c, static_cast<std::uint64_t>(trial));
    const int t = trial % c.n_slots;
    const int p = (trial * 3) % c.n_pilot_subcarriers;
    const CMatrix hbar = oracle::random_matrix(rng, c.n_ant_user, c.n_ant_bs * c.n_bs);
    const CMatrix phi = slot_measurement(e, dft, t, p);
    const CVector lhs = phi * oracle::vec(hbar);
    const CVector rhs = product_route(e, dft, t, p, hbar);
    EXPECT_LE((lhs - rhs).norm(), 1e-10 * rhs.norm());
  }
}

TEST(SlotMeasurement, MatchesExplicitKronecker) {
  const SystemConfig c = small_config();
  const DftPair dft = make_dft_pair(c);
  const PilotEnsemble e = draw_ensemble(c, 2);
  CVector tx(c.n_ant_bs * c.n_bs);
  for (int m = 0; m < c.n_bs; ++m) {
    tx.segment(m * c.n_ant_bs, c.n_ant_bs) = dft.tx_dft.adjoint() * e.pilot_vector(1, 2, m);
  }
  const CMatrix rx = e.combiner(1, 2).adjoint() * dft.rx_dft;
  const CMatrix expect = oracle::kron(tx.transpose(), rx);
  EXPECT_LE((slot_measurement(e, dft, 1, 2) - expect).norm(), 1e-12 * expect.norm());
}

TEST(KronMeasurement, SelectionCase) {
  CVector tx = CVector::Zero(5);
  tx(3) = 1.0;
  CMatrix rx = CMatrix::Zero(1, 4);
  rx(0, 2) = 1.0;
  const CMatrix phi = kron_measurement(tx, rx);
  ASSERT_EQ(phi.rows(), 1);
  ASSERT_EQ(phi.cols(), 20);
  for (Index k = 0; k < 20; ++k) {
    EXPECT_EQ(phi(0, k), k == 3 * 4 + 2 ? cplx(1.0) : cplx(0.0));
  }
}

TEST(SlotMeasurement, FullScaleDimensions) {
  const SystemConfig c = full_scale_config();
  const DftPair dft = make_dft_pair(c);
  SystemConfig one_slot = c;
  one_slot.n_slots = 1;
  one_slot.n_pilot_subcarriers = 1;
  const PilotEnsemble e = draw_ensemble(one_slot, 0);
  const CMatrix phi = slot_measurement(e, dft, 0, 0);
  EXPECT_EQ(phi.rows(), 2);
  EXPECT_EQ(phi.cols(), 65536);
}

TEST(StackMeasurements, OrderAndShape) {
  SystemConfig c = small_config();
  c.n_slots = 3;
  const DftPair dft = make_dft_pair(c);
  const PilotEnsemble e = draw_ensemble(c, 6);
  const CMatrix stacked = stack_measurements(e, dft, 4);
  ASSERT_EQ(stacked.rows(), 6);
  EXPECT_EQ(stacked.middleRows(2, 2), slot_measurement(e, dft, 1, 4));

  c.n_slots = 1;
  const PilotEnsemble e1 = draw_ensemble(c, 6);
  EXPECT_EQ(stack_measurements(e1, dft, 0), slot_measurement(e1, dft, 0, 0));
}

TEST(StackMeasurements, DiversifiedAcrossSubcarriers) {
  const SystemConfig c = small_config();
  const DftPair dft = make_dft_pair(c);
  const PilotEnsemble e = draw_ensemble(c, 12);
  for (int p = 0; p < c.n_pilot_subcarriers; ++p) {
    for (int q = p + 1; q < c.n_pilot_subcarriers; ++q) {
      const CMatrix d = stack_measurements(e, dft, p) - stack_measurements(e, dft, q);
      EXPECT_GT(d.cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(StackMeasurements, EntryStatistics) {
  SystemConfig c = small_config();
  c.n_pilot_subcarriers = 1;
  c.n_subcarriers = 8;
  const DftPair dft = make_dft_pair(c);
  std::vector<double> re;
  std::vector<double> im;
  for (std::uint64_t s = 0; re.size() < 100000; ++s) {
    const CMatrix phi = stack_measurements(draw_ensemble(c, s), dft, 0);
    for (Index k = 0; k < phi.size(); ++k) {
      re.push_back(phi.data()[k].real());
      im.push_back(phi.data()[k].imag());
    }
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto var = [&](const std::vector<double>& v) {
    const double mu = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return acc / static_cast<double>(v.size() - 1);
  };
  const double vr = var(re);
  const double vi = var(im);
  const double sd = std::sqrt(vr);
  EXPECT_LT(std::abs(mean(re)), 0.02 * sd);
  EXPECT_LT(std::abs(mean(im)), 0.02 * sd);
  EXPECT_NEAR(vr / vi, 1.0, 0.05);
}

TEST(NoiseCalibration, DefinitionAndMonotonicity) {
  const SystemConfig c = small_config();
  const DftPair dft = make_dft_pair(c);
  const PilotEnsemble e = draw_ensemble(c, 1);
  std::mt19937_64 rng(2);
  std::vector<CMatrix> ops;
  std::vector<CVector> sig;
  double energy = 0.0;
  Index rows = 0;
  for (int p = 0; p < c.n_pilot_subcarriers; ++p) {
    ops.push_back(stack_measurements(e, dft, p));
    sig.push_back(oracle::random_matrix(rng, ops.back().cols(), 1).col(0));
    energy += (ops.back() * sig.back()).squaredNorm();
    rows += ops.back().rows();
  }
  EXPECT_NEAR(calibrate_noise_variance(ops, sig, 0.0), energy / static_cast<double>(rows),
              1e-12 * energy);
  double prev = INFINITY;
  for (double snr : {-10.0, 0.0, 10.0, 20.0, 40.0, 80.0}) {
    const double v = calibrate_noise_variance(ops, sig, snr);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_EQ(calibrate_noise_variance(ops, sig, INFINITY), 0.0);
  std::vector<CVector> zero(sig.size(), CVector::Zero(sig.front().size()));
  EXPECT_THROW(calibrate_noise_variance(ops, zero, 10.0), NumericalError);
}

TEST(NoiseCalibration, EmpiricalSnrWithinTenthOfDecibel) {
  const SystemConfig c = small_config();
  const DftPair dft = make_dft_pair(c);
  const PilotEnsemble e = draw_ensemble(c, 5);
  std::mt19937_64 rng(6);
  std::vector<CMatrix> ops;
  std::vector<CVector> sig;
  double energy = 0.0;
  for (int p = 0; p < c.n_pilot_subcarriers; ++p) {
    ops.push_back(stack_measurements(e, dft, p));
    sig.push_back(oracle::random_matrix(rng, ops.back().cols(), 1).col(0));
    energy += (ops.back() * sig.back()).squaredNorm();
  }
  const double target = 15.0;
  const double var = calibrate_noise_variance(ops, sig, target);
  double noise = 0.0;
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    for (std::size_t p = 0; p < ops.size(); ++p) {
      const CVector clean = ops[p] * sig[p];
      const CVector r = synthesize_received(ops[p], sig[p], var,
                                            mix_seed(static_cast<std::uint64_t>(d), p));
      noise += (r - clean).squaredNorm();
    }
  }
  const double snr = 10.0 * std::log10(energy / (noise / draws));
  EXPECT_NEAR(snr, target, 0.1);
}

TEST(Synthesize, NoiselessAndDeterministic) {
  std::mt19937_64 rng(3);
  const CMatrix op = oracle::random_matrix(rng, 6, 10);
  const CVector h = oracle::random_matrix(rng, 10, 1).col(0);
  EXPECT_EQ(synthesize_received(op, h, 0.0, 9), op * h);
  EXPECT_EQ(synthesize_received(op, h, 0.3, 9), synthesize_received(op, h, 0.3, 9));
  EXPECT_THROW(synthesize_received(op, h, -1.0, 9), InvalidParameter);
  EXPECT_THROW(synthesize_received(op, CVector::Zero(9), 0.0, 9), DimensionMismatch);
}

TEST(Synthesize, PureNoiseVariance) {
  const CMatrix op = CMatrix::Identity(100000, 1);
  const CVector h = CVector::Zero(1);
  const double var = 0.7;
  const CVector r = synthesize_received(op, h, var, 17);
  EXPECT_NEAR(r.squaredNorm() / static_cast<double>(r.size()), var, 0.02 * var);
  double re = 0.0;
  for (Index i = 0; i < r.size(); ++i) re += r(i).real() * r(i).real();
  EXPECT_NEAR(re / static_cast<double>(r.size()), var / 2.0, 0.02 * var / 2.0);
}

TEST(BuildMeasurements, ShapesAndNoiseSeeds) {
  const SystemConfig c = small_config();
  const DftPair dft = make_dft_pair(c);
  const auto ch = draw_multipath(c, 1);
  const auto pilots = pilot_subcarrier_indices(c);
  const auto truth = angular_channel_set(ch, c, dft, pilots);
  const PilotEnsemble e = draw_ensemble(c, 2);
  const MeasurementSet ms = build_measurements(c, e, dft, truth, 3);
  ASSERT_EQ(ms.operators.size(), static_cast<std::size_t>(c.n_pilot_subcarriers));
  for (std::size_t p = 0; p < ms.operators.size(); ++p) {
    EXPECT_EQ(ms.operators[p].rows(), c.measurement_rows());
    EXPECT_EQ(ms.operators[p].cols(), c.angular_dim());
    EXPECT_EQ(ms.received[p].size(), c.measurement_rows());
  }
  EXPECT_GT(ms.noise_variance, 0.0);
  EXPECT_EQ(ms.pilot_indices, pilots);
  const MeasurementSet again = build_measurements(c, e, dft, truth, 3);
  for (std::size_t p = 0; p < ms.received.size(); ++p) EXPECT_EQ(ms.received[p], again.received[p]);
}

}  // namespace
