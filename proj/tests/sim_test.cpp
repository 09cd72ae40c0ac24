// Copyright 2026 The netexp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "netexp/sim.hpp"

namespace {

using namespace netexp;

TreatmentVector iid_z(const Graph& g, std::string_view salt, double p = 0.5) {
  return std::get<TreatmentVector>(draw(IidBernoulli{p}, g, salt));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(SimulateOutcomes, NoiseFreeIsExactlyLinear) {
  auto g = generate_random_graph(300, 0.02, 1);
  auto z = iid_z(g, "nf");
  auto t = fraction_treated_peers(g, z);
  SimParams p;
  p.tau = 1.7;
  p.rho = -0.6;
  p.noise_sd = 0.0;
  auto y = simulate_outcomes(g, z, p);
  for (std::size_t i = 0; i < g.n(); ++i) EXPECT_NEAR(y[i], 1.7 * z[i] - 0.6 * t[i], 1e-12);

  p.rho = 0.0;
  y = simulate_outcomes(g, z, p);
  for (std::size_t i = 0; i < g.n(); ++i) EXPECT_EQ(y[i], 1.7 * z[i]);

  p.tau = 0.0;
  p.rho = 1.0;
  y = simulate_outcomes(g, z, p);
  EXPECT_EQ(y, t.t);
}

TEST(SimulateOutcomes, DeterministicGivenSeed) {
  auto g = generate_random_graph(100, 0.05, 2);
  auto z = iid_z(g, "det");
  SimParams p;
  p.tau = 1;
  p.tau_het_sd = 1;
  p.confound_sd = 0.5;
  p.seed = 42;
  EXPECT_EQ(simulate_outcomes(g, z, p), simulate_outcomes(g, z, p));
  auto other = p;
  other.seed = 43;
  EXPECT_NE(simulate_outcomes(g, z, p), simulate_outcomes(g, z, other));
  SimParams bad;
  bad.noise_sd = -1;
  EXPECT_THROW(simulate_outcomes(g, z, bad), InvalidArgument);
  EXPECT_THROW(simulate_outcomes(g, TreatmentVector(5), p), InvalidArgument);
}

TEST(SimulateOutcomes, OlsRecoversEffects) {
  auto g = generate_random_graph(10000, 0.001, 3);
  auto z = iid_z(g, "ols");
  auto t = fraction_treated_peers(g, z);
  SimParams p;
  p.tau = 1.0;
  p.rho = 2.0;
  p.seed = 7;
  auto y = simulate_outcomes(g, z, p);
  Eigen::MatrixXd x(10000, 3);
  Eigen::VectorXd yy(10000);
  for (int i = 0; i < 10000; ++i) {
    auto k = static_cast<std::size_t>(i);
    x(i, 0) = 1.0;
    x(i, 1) = z[k];
    x(i, 2) = t[k];
    yy(i) = y[k];
  }
  Eigen::Vector3d beta = x.colPivHouseholderQr().solve(yy);
  double sigma2 = (yy - x * beta).squaredNorm() / (10000 - 3);
  Eigen::Matrix3d cov = sigma2 * (x.transpose() * x).inverse();
  EXPECT_NEAR(beta(1), 1.0, 4 * std::sqrt(cov(1, 1)));
  EXPECT_NEAR(beta(2), 2.0, 4 * std::sqrt(cov(2, 2)));
}

TEST(SimulateOutcomes, HeterogeneousEffectsHaveRequestedSpread) {
  Graph g(20000, {});
  TreatmentVector z(std::vector<std::uint8_t>(20000, 1));
  SimParams p;
  p.tau = 1.0;
  p.tau_het_sd = 1.0;
  p.noise_sd = 0.0;
  auto y = simulate_outcomes(g, z, p);
  double m = 0, v = 0;
  for (double x : y) m += x;
  m /= 20000;
  for (double x : y) v += (x - m) * (x - m);
  v /= 19999;
  EXPECT_NEAR(m, 1.0, 4 * std::sqrt(1.0 / 20000));
  EXPECT_NEAR(v, 1.0, 0.05);
}

TEST(SimulateCompliance, ExtremeThresholds) {
  TreatmentVector z(std::vector<std::uint8_t>(1000, 1));
  for (auto d : simulate_compliance(z, -1e6, 0, 1)) EXPECT_EQ(d, 0);
  for (auto d : simulate_compliance(z, 1e6, 0, 1)) EXPECT_EQ(d, 1);
}

TEST(SimulateCompliance, LogisticAdoptionRates) {
  Graph g(100000, {});
  auto z = iid_z(g, "comp");
  for (auto [alpha, beta] : {std::pair{0.0, 0.0}, std::pair{-2.0, 4.0}}) {
    auto d = simulate_compliance(z, alpha, beta, 11);
    double n1 = 0, a1 = 0, n0 = 0, a0 = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      (z[i] ? n1 : n0) += 1;
      (z[i] ? a1 : a0) += d[i];
    }
    EXPECT_NEAR(a1 / n1, sigmoid(alpha + beta), 0.01);
    EXPECT_NEAR(a0 / n0, sigmoid(alpha), 0.01);
  }
  EXPECT_EQ(simulate_compliance(z, -2, 4, 11), simulate_compliance(z, -2, 4, 11));
}

TEST(SimulateEdgeCompliance, ExtremesAndSubset) {
  auto g = generate_random_graph(300, 0.05, 4);
  auto w = std::get<EdgeTreatment>(draw(EdgeIid{0.5}, g, "w"));
  EXPECT_EQ(simulate_edge_compliance(g, w, 1e6, 0, 1).edges(), g.edges());
  EXPECT_EQ(simulate_edge_compliance(g, w, -1e6, 0, 1).num_edges(), 0u);
  auto kept = simulate_edge_compliance(g, w, 0, 1, 2);
  std::set<std::pair<NodeId, NodeId>> all;
  for (const Edge& e : g.edges()) all.insert({e.src, e.dst});
  for (const Edge& e : kept.edges()) EXPECT_TRUE(all.count({e.src, e.dst}));
  EXPECT_EQ(kept.n(), g.n());
  EXPECT_THROW(simulate_edge_compliance(g, EdgeTreatment({1, 0}), 0, 1, 2), InvalidArgument);
}

TEST(SimulateEdgeCompliance, RetentionRates) {
  auto g = generate_random_graph(2000, 0.05, 5);
  ASSERT_GT(g.num_edges(), 90000u);
  auto w = std::get<EdgeTreatment>(draw(EdgeIid{0.5}, g, "rates"));
  auto kept = simulate_edge_compliance(g, w, 0, 2, 3);
  std::set<std::pair<NodeId, NodeId>> kept_set;
  for (const Edge& e : kept.edges()) kept_set.insert({e.src, e.dst});
  double n1 = 0, k1 = 0, n0 = 0, k0 = 0;
  for (std::size_t k = 0; k < g.num_edges(); ++k) {
    bool in = kept_set.count({g.edges()[k].src, g.edges()[k].dst}) > 0;
    (w[k] ? n1 : n0) += 1;
    (w[k] ? k1 : k0) += in;
  }
  EXPECT_NEAR(k0 / n0, 0.5, 0.01);
  EXPECT_NEAR(k1 / n1, sigmoid(2), 0.01);
}

TEST(SimulateInfluence, PerfectComplianceMatchesSpilloverModel) {
  auto g = generate_random_graph(200, 0.03, 6);
  auto z = iid_z(g, "pc");
  SimParams p;
  p.tau = 0.5;
  p.rho = 1.5;
  p.theta = 1.5;
  p.seed = 9;
  auto d = to_real(z.values());
  EXPECT_EQ(simulate_influence_outcomes(g, z, d, p), simulate_outcomes(g, z, p));
}

TEST(SimulateInfluence, ZeroThetaIgnoresBehaviour) {
  auto g = generate_random_graph(200, 0.03, 7);
  auto z = iid_z(g, "zt");
  SimParams p;
  p.tau = 1;
  p.seed = 3;
  std::vector<double> d(200), shuffled(200);
  for (std::size_t i = 0; i < 200; ++i) d[i] = i % 3 == 0;
  shuffled = d;
  std::rotate(shuffled.begin(), shuffled.begin() + 17, shuffled.end());
  EXPECT_EQ(simulate_influence_outcomes(g, z, d, p), simulate_influence_outcomes(g, z, shuffled, p));
  EXPECT_THROW(simulate_influence_outcomes(g, z, std::vector<double>(3), p), InvalidArgument);
}

TEST(SimulateInfluence, TwoStageLeastSquaresRecoversTheta) {
  auto g = generate_random_graph(10000, 0.001, 8);
  auto z = iid_z(g, "iv");
  SimParams p;
  p.tau = 1.0;
  p.theta = 2.0;
  p.seed = 21;
  auto d = to_real(simulate_compliance(z, -2, 4, p.seed));
  auto y = simulate_influence_outcomes(g, z, d, p);
  auto t = fraction_treated_peers(g, z);
  auto x_endog = fraction_adopting_peers(g, std::span<const double>(d));
  const int n = 10000;
  Eigen::MatrixXd x(n, 3), inst(n, 3);
  Eigen::VectorXd yy(n);
  for (int i = 0; i < n; ++i) {
    auto k = static_cast<std::size_t>(i);
    x.row(i) << 1.0, z[k], x_endog[k];
    inst.row(i) << 1.0, z[k], t[k];
    yy(i) = y[k];
  }
  Eigen::Matrix3d zx = inst.transpose() * x;
  Eigen::Vector3d beta = zx.fullPivLu().solve(inst.transpose() * yy);
  double sigma2 = (yy - x * beta).squaredNorm() / (n - 3);
  Eigen::Matrix3d zx_inv = zx.inverse();
  Eigen::Matrix3d cov = sigma2 * zx_inv * (inst.transpose() * inst) * zx_inv.transpose();
  EXPECT_NEAR(beta(2), 2.0, 4 * std::sqrt(cov(2, 2)));
  EXPECT_NEAR(beta(1), 1.0, 4 * std::sqrt(cov(1, 1)));
}

TEST(SimulateDataset, DeterministicAndSeeded) {
  SimSpec spec;
  spec.n = 120;
  spec.edge_p = 0.05;
  spec.params.tau = 1;
  spec.master_seed = 5;
  auto a = simulate_dataset(spec, 3);
  auto b = simulate_dataset(spec, 3);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.graph, b.graph);
  auto c = simulate_dataset(spec, 4);
  EXPECT_NE(a.y, c.y);
  EXPECT_FALSE(a.graph == c.graph);
  spec.fixed_graph = true;
  EXPECT_EQ(simulate_dataset(spec, 3).graph, simulate_dataset(spec, 4).graph);
  spec.influence = true;
  spec.params.alpha = 1e6;
  auto inf = simulate_dataset(spec, 1);
  for (double v : inf.d) EXPECT_EQ(v, 1.0);
}

TEST(Calibrate, RateAndIntervalBounds) {
  SimSpec sim;
  sim.n = 100;
  sim.edge_p = 0.06;
  sim.params.tau = 1.0;
  TestSpec test;
  test.tau0 = 1.0;
  test.replications = 49;
  auto small = calibrate(test, sim, 100, 0.05, 1);
  auto large = calibrate(test, sim, 400, 0.05, 1);
  for (const auto* r : {&small, &large}) {
    EXPECT_GE(r->rejection_rate, 0.0);
    EXPECT_LE(r->rejection_rate, 1.0);
    EXPECT_LE(r->ci_low, r->rejection_rate);
    EXPECT_GE(r->ci_high, r->rejection_rate);
    EXPECT_EQ(r->p_values.size(), r->n_sims);
  }
  double ratio = (small.ci_high - small.ci_low) / (large.ci_high - large.ci_low);
  EXPECT_GT(ratio, 1.4);
  EXPECT_LT(ratio, 2.8);
  EXPECT_THROW(calibrate(test, sim, 99, 0.05), InvalidArgument);
  EXPECT_THROW(calibrate(test, sim, 100, 0.0), InvalidArgument);
  TestSpec composite;
  composite.kind = TestKind::kComposite;
  EXPECT_THROW(calibrate(composite, sim, 100, 0.05), InvalidArgument);
}

TEST(Calibrate, DeterministicAcrossThreads) {
  SimSpec sim;
  sim.n = 80;
  sim.edge_p = 0.06;
  TestSpec test;
  test.replications = 29;
  auto a = calibrate(test, sim, 100, 0.05, 1);
  auto b = calibrate(test, sim, 100, 0.05, 4);
  EXPECT_EQ(a.p_values, b.p_values);
}

SimSpec er(std::size_t n, double p, double tau, double rho, std::uint64_t seed) {
  SimSpec sim;
  sim.n = n;
  sim.edge_p = p;
  sim.params.tau = tau;
  sim.params.rho = rho;
  sim.master_seed = seed;
  return sim;
}

TEST(Calibrate, SharpNullPowerExceedsNullRate) {
  TestSpec test;
  test.tau0 = 1.0;
  test.replications = 99;
  auto null = calibrate(test, er(500, 0.02, 1.0, 0.0, 31), 100, 0.05, 1);
  auto alt = calibrate(test, er(500, 0.02, 1.0, 2.0, 31), 100, 0.05, 1);
  EXPECT_GT(alt.rejection_rate, null.rejection_rate);
  EXPECT_GT(alt.rejection_rate, 0.5);
}

TEST(Calibrate, CompositeIsConservativeAndPowerful) {
  TestSpec test;
  test.kind = TestKind::kComposite;
  test.tau_grid = {0, 0.5, 1, 1.5, 2, 2.5, 3};
  test.replications = 99;
  auto null = calibrate(test, er(200, 0.05, 1.5, 0.0, 32), 1000, 0.05, 1);
  EXPECT_LE(null.rejection_rate, 0.05 + 0.02);
  auto alt = calibrate(test, er(500, 0.02, 1.5, 2.0, 33), 100, 0.05, 1);
  EXPECT_GT(alt.rejection_rate, 0.5);
}

TEST(Calibrate, NaiveValidWithoutDirectEffect) {
  TestSpec test;
  test.kind = TestKind::kNaive;
  test.replications = 99;
  auto r = calibrate(test, er(200, 0.05, 0.0, 0.0, 34), 400, 0.05, 1);
  EXPECT_LE(r.rejection_rate, 0.05 + 3 * std::sqrt(0.05 * 0.95 / 400));
}

TEST(Calibrate, IndependentSetFocalBeatsRandomFocal) {
  TestSpec test;
  test.kind = TestKind::kConditional;
  test.replications = 99;
  test.focal_fraction = 0.2;
  auto sim = er(500, 0.02, 1.0, 2.0, 35);
  test.focal_strategy = FocalStrategy::kIndependentSet;
  auto is = calibrate(test, sim, 500, 0.05, 1);
  test.focal_strategy = FocalStrategy::kRandom;
  auto random = calibrate(test, sim, 500, 0.05, 1);
  EXPECT_GT(is.rejection_rate, random.rejection_rate);
}

TEST(WilsonInterval, KnownValues) {
  auto [lo, hi] = wilson_interval(50, 1000);
  EXPECT_NEAR(lo, 0.0381, 1e-4);
  EXPECT_NEAR(hi, 0.0654, 1e-4);
  auto [lo0, hi0] = wilson_interval(0, 100);
  EXPECT_EQ(lo0, 0.0);
  EXPECT_GT(hi0, 0.0);
}

TEST(BinomialUpperTail, MatchesDirectSum) {
  EXPECT_NEAR(binomial_upper_tail(3, 4, 0.5), 5.0 / 16, 1e-12);
  EXPECT_EQ(binomial_upper_tail(0, 10, 0.3), 1.0);
  EXPECT_EQ(binomial_upper_tail(11, 10, 0.3), 0.0);
  double direct = 0;
  for (int k = 70; k <= 1000; ++k) {
    direct += std::exp(std::lgamma(1001) - std::lgamma(k + 1) - std::lgamma(1001 - k) + k * std::log(0.05) +
                       (1000 - k) * std::log(0.95));
  }
  EXPECT_NEAR(binomial_upper_tail(70, 1000, 0.05), direct, 1e-12);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  auto ra = ranks(a), rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

TEST(PowerCurve, IncreasesWithSpillover) {
  SimSpec sim;
  sim.n = 300;
  sim.edge_p = 0.02;
  sim.params.tau = 1.0;
  TestSpec test;
  test.tau0 = 1.0;
  test.replications = 49;
  std::vector<double> grid{0, 0.5, 1, 2};
  auto curve = power_curve(test, sim, "rho", grid, 100, 0.05, 1);
  ASSERT_EQ(curve.size(), 4u);
  std::vector<double> rates;
  for (auto& pt : curve) rates.push_back(pt.calibration.rejection_rate);
  EXPECT_GT(spearman(grid, rates), 0.0);
  EXPECT_GT(rates.back(), rates.front());
  EXPECT_EQ(curve[0].calibration.p_values, calibrate(test, sim, 100, 0.05, 1).p_values);
  EXPECT_THROW(power_curve(test, sim, "rho", {}, 100, 0.05), InvalidArgument);
  EXPECT_THROW(power_curve(test, sim, "kappa", {1.0}, 100, 0.05), InvalidArgument);
}

TEST(PowerCurve, WeakerInstrumentHasLessPower) {
  SimSpec sim;
  sim.n = 300;
  sim.edge_p = 0.03;
  sim.influence = true;
  sim.params.tau = 1.0;
  sim.params.alpha = -2.0;
  TestSpec test;
  test.kind = TestKind::kInfluence;
  test.tau0 = 1.0;
  test.theta0 = 0.0;
  test.replications = 49;
  std::vector<double> grid{1.0, 2.0, 3.0};
  sim.params.beta = 0.5;
  auto weak = power_curve(test, sim, "theta", grid, 100, 0.05, 1);
  sim.params.beta = 3.0;
  auto strong = power_curve(test, sim, "theta", grid, 100, 0.05, 1);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_LT(weak[k].calibration.rejection_rate, strong[k].calibration.rejection_rate) << grid[k];
  }
}

TEST(SimNames, RoundTrip) {
  for (auto k : {TestKind::kSharpNull, TestKind::kComposite, TestKind::kConditional, TestKind::kRegion,
                 TestKind::kInfluence, TestKind::kNaive}) {
    EXPECT_EQ(test_kind_from_name(test_kind_name(k)), k);
  }
  EXPECT_THROW(test_kind_from_name("bogus"), InvalidArgument);
  SimParams p;
  sim_parameter(p, "delta") = 3;
  EXPECT_EQ(p.delta, 3);
}

}  // namespace
