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

#pragma once

// Generative oracle with known direct effects, spillovers, compliance and
// social influence, plus a calibration harness that runs inference tests on
// many simulated datasets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "netexp/common.hpp"
#include "netexp/counter_rng.hpp"
#include "netexp/design.hpp"
#include "netexp/exposure.hpp"
#include "netexp/graph.hpp"
#include "netexp/inference.hpp"
#include "netexp/parallel.hpp"
#include "netexp/randomizer.hpp"
#include "netexp/statistics.hpp"

namespace netexp {

struct SimParams {
  double tau = 0.0;    // direct effect
  double rho = 0.0;    // spillover coefficient on the fraction of treated peers
  double theta = 0.0;  // influence coefficient on the fraction of adopting peers
  double alpha = 0.0;  // compliance: D = 1{alpha + beta z + eps > 0}
  double beta = 0.0;
  double gamma = 0.0;  // edge compliance: A = 1{gamma + delta w + nu > 0}
  double delta = 0.0;
  double noise_sd = 1.0;
  double tau_het_sd = 0.0;
  double confound_sd = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(noise_sd >= 0.0) || !(tau_het_sd >= 0.0) || !(confound_sd >= 0.0)) {
      throw InvalidArgument("noise scales must be non-negative");
    }
  }
};

// Independent random streams; each value is keyed by (seed, stream, unit).
namespace sim_stream {
inline constexpr std::uint64_t kNoise = 1;
inline constexpr std::uint64_t kHeterogeneity = 2;
inline constexpr std::uint64_t kConfounder = 3;
inline constexpr std::uint64_t kCompliance = 4;
inline constexpr std::uint64_t kEdgeCompliance = 5;
}  // namespace sim_stream

namespace detail {

inline std::vector<double> node_noise(const Graph& graph, const SimParams& p) {
  const std::size_t n = graph.n();
  std::vector<double> u(n, 0.0);
  const CounterRng noise(p.seed, sim_stream::kNoise);
  for (std::size_t i = 0; i < n; ++i) u[i] = p.noise_sd == 0.0 ? 0.0 : p.noise_sd * noise.normal(i);
  if (p.confound_sd > 0.0) {
    // Latent U shared along edges: own draw plus the peer average.
    const CounterRng conf(p.seed, sim_stream::kConfounder);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = conf.normal(i);
    auto peer = fraction_adopting_peers(graph, std::span<const double>(v));
    for (std::size_t i = 0; i < n; ++i) u[i] += p.confound_sd * (v[i] + peer[i]) / std::sqrt(2.0);
  }
  return u;
}

inline double direct_effect(const SimParams& p, std::size_t i) {
  if (p.tau_het_sd == 0.0) return p.tau;
  return p.tau + p.tau_het_sd * CounterRng(p.seed, sim_stream::kHeterogeneity).normal(i);
}

inline void check_length(std::size_t got, const Graph& graph, const char* what) {
  if (got != graph.n()) throw InvalidArgument(std::string(what) + " does not match graph size");
}

}  // namespace detail

// y_i = (tau + h_i) z_i + rho T_i(z) + u_i + xi_i.
inline std::vector<double> simulate_outcomes(const Graph& graph, const TreatmentVector& z, const SimParams& params) {
  params.validate();
  detail::check_length(z.size(), graph, "treatment vector");
  auto t = fraction_treated_peers(graph, z);
  auto y = detail::node_noise(graph, params);
  for (std::size_t i = 0; i < graph.n(); ++i) y[i] += detail::direct_effect(params, i) * z[i] + params.rho * t[i];
  return y;
}

// d_j = 1{alpha + beta z_j + eps_j > 0}, eps_j standard logistic.
inline std::vector<std::uint8_t> simulate_compliance(const TreatmentVector& z, double alpha, double beta,
                                                     std::uint64_t seed) {
  const CounterRng rng(seed, sim_stream::kCompliance);
  std::vector<std::uint8_t> d(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) d[j] = alpha + beta * z[j] + rng.logistic(j) > 0.0 ? 1 : 0;
  return d;
}

// Keeps edge k when gamma + delta w_k + nu_k > 0, nu_k standard logistic.
inline Graph simulate_edge_compliance(const Graph& graph, const EdgeTreatment& w, double gamma, double delta,
                                      std::uint64_t seed) {
  if (w.size() != graph.num_edges()) throw InvalidArgument("edge treatment does not cover every edge");
  const CounterRng rng(seed, sim_stream::kEdgeCompliance);
  std::vector<Edge> kept;
  for (std::size_t k = 0; k < graph.num_edges(); ++k) {
    if (gamma + delta * w[k] + rng.logistic(k) > 0.0) kept.push_back(graph.edges()[k]);
  }
  return Graph(graph.n(), std::move(kept), graph.directed(), graph.cluster_labels(), graph.covariates());
}

// y_i = (tau + h_i) z_i + theta sum_j d_j Abar_ij + u_i + xi_i.
inline std::vector<double> simulate_influence_outcomes(const Graph& graph, const TreatmentVector& z,
                                                       std::span<const double> d, const SimParams& params) {
  params.validate();
  detail::check_length(z.size(), graph, "treatment vector");
  detail::check_length(d.size(), graph, "behaviour vector");
  auto adopting = fraction_adopting_peers(graph, d);
  auto y = detail::node_noise(graph, params);
  for (std::size_t i = 0; i < graph.n(); ++i) {
    y[i] += detail::direct_effect(params, i) * z[i] + params.theta * adopting[i];
  }
  return y;
}

inline std::vector<double> to_real(std::span<const std::uint8_t> v) { return {v.begin(), v.end()}; }

// ---------------------------------------------------------------------------
// Calibration

enum class TestKind { kSharpNull, kComposite, kConditional, kRegion, kInfluence, kNaive };

inline TestKind test_kind_from_name(std::string_view s) {
  if (s == "sharp_null") return TestKind::kSharpNull;
  if (s == "composite") return TestKind::kComposite;
  if (s == "conditional") return TestKind::kConditional;
  if (s == "region") return TestKind::kRegion;
  if (s == "influence") return TestKind::kInfluence;
  if (s == "naive") return TestKind::kNaive;
  throw InvalidArgument("unknown test kind \"" + std::string(s) + "\"");
}

inline std::string test_kind_name(TestKind k) {
  switch (k) {
    case TestKind::kSharpNull: return "sharp_null";
    case TestKind::kComposite: return "composite";
    case TestKind::kConditional: return "conditional";
    case TestKind::kRegion: return "region";
    case TestKind::kInfluence: return "influence";
    case TestKind::kNaive: return "naive";
  }
  return "unknown";
}

struct TestSpec {
  TestKind kind = TestKind::kSharpNull;
  Statistic statistic = StatisticKind::kScoreRho;
  double tau0 = 0.0;
  double rho0 = 0.0;  // region: the cell whose rejection is counted
  double theta0 = 0.0;
  std::vector<double> tau_grid;
  std::vector<double> rho_grid;
  std::size_t replications = 500;
  double focal_fraction = 0.2;
  FocalStrategy focal_strategy = FocalStrategy::kIndependentSet;
};

enum class GraphModel { kErdosRenyi, kCliques };

struct SimSpec {
  GraphModel graph_model = GraphModel::kErdosRenyi;
  std::size_t n = 500;
  double edge_p = 0.02;
  std::size_t groups = 50;
  std::size_t group_size = 10;
  bool fixed_graph = false;  // reuse one graph across simulations
  Design design = IidBernoulli{0.5};
  bool influence = false;  // z -> compliance d -> influence outcomes
  SimParams params;
  std::uint64_t master_seed = 1;
};

struct SimDataset {
  Graph graph;
  TreatmentVector z;
  std::vector<double> d;  // behaviours (equal to z without compliance)
  std::vector<double> y;
};

inline std::uint64_t simulation_seed(std::uint64_t master, std::size_t sim) {
  return detail::splitmix64(detail::splitmix64(master) + sim);
}

inline Graph make_sim_graph(const SimSpec& spec, std::uint64_t seed) {
  if (spec.graph_model == GraphModel::kCliques) return generate_disjoint_cliques(spec.groups, spec.group_size);
  return generate_random_graph(spec.n, spec.edge_p, seed);
}

// Dataset number `sim` of a simulation study.
inline SimDataset simulate_dataset(const SimSpec& spec, std::size_t sim) {
  const std::uint64_t seed = simulation_seed(spec.master_seed, sim);
  SimDataset ds;
  ds.graph = make_sim_graph(spec, spec.fixed_graph ? simulation_seed(spec.master_seed, 0xffffffffULL) : seed);
  PreparedDesign prepared(spec.design, ds.graph);
  ds.z = draw_nodes(prepared, "sim:" + std::to_string(spec.master_seed) + ":" + std::to_string(sim));
  SimParams params = spec.params;
  params.seed = seed;
  if (spec.influence) {
    ds.d = to_real(simulate_compliance(ds.z, params.alpha, params.beta, seed));
    ds.y = simulate_influence_outcomes(ds.graph, ds.z, ds.d, params);
  } else {
    ds.d = to_real(ds.z.values());
    ds.y = simulate_outcomes(ds.graph, ds.z, params);
  }
  return ds;
}

// p-value of `test` on one dataset; for regions, the p-value of the (tau0, rho0) cell.
inline double run_test(const TestSpec& test, const Design& design, const SimDataset& ds, const std::string& salt,
                       double alpha, unsigned threads = 1) {
  RandomizationOptions opts;
  opts.replications = test.replications;
  opts.salt = salt;
  opts.threads = threads;
  switch (test.kind) {
    case TestKind::kSharpNull:
      return test_sharp_null(ds.y, ds.z, design, ds.graph, test.tau0, test.statistic, opts).p_value;
    case TestKind::kNaive:
      return naive_permutation_test(ds.y, ds.z, ds.graph, test.statistic, opts).p_value;
    case TestKind::kComposite:
      return test_composite_no_spillovers(ds.y, ds.z, design, ds.graph, test.tau_grid, test.statistic, opts)
          .result.p_value;
    case TestKind::kInfluence:
      return test_influence_sharp_null(ds.y, ds.z, ds.d, design, ds.graph, test.tau0, test.theta0, test.statistic,
                                       opts)
          .p_value;
    case TestKind::kConditional: {
      auto sel = select_focal_units(ds.graph, test.focal_fraction, test.focal_strategy, salt + ".focal");
      return conditional_test_no_spillovers(ds.y, ds.z, design, ds.graph, sel.focal, test.statistic, opts).p_value;
    }
    case TestKind::kRegion: {
      auto region = acceptance_region(ds.y, ds.z, design, ds.graph, {test.tau0}, {test.rho0}, alpha,
                                      test.statistic, opts);
      return region.p[0][0];
    }
  }
  throw InvalidArgument("invalid test kind");
}

struct CalibrationResult {
  std::size_t n_sims = 0;
  std::size_t rejections = 0;
  double alpha = 0.05;
  double rejection_rate = 0.0;
  double ci_low = 0.0;  // 95% Wilson interval
  double ci_high = 0.0;
  double mean_p = 0.0;
  std::vector<double> p_values;
};

inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  const double center = (phat + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z * z / (4.0 * nn * nn)) / denom;
  const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
  return {lo, hi};
}

// Pr(X >= k) for X ~ Binomial(n, p).
inline double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  double total = 0.0;
  for (std::size_t i = k; i <= n; ++i) {
    double log_term = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                      std::lgamma(static_cast<double>(n - i) + 1) + static_cast<double>(i) * lp +
                      static_cast<double>(n - i) * lq;
    total += std::exp(log_term);
  }
  return std::min(1.0, total);
}

// Runs `test` on n_sims fresh datasets from `sim`; deterministic given sim.master_seed.
inline CalibrationResult calibrate(const TestSpec& test, const SimSpec& sim, std::size_t n_sims, double alpha,
                                   unsigned threads = 0, std::size_t min_sims = 100) {
  if (n_sims < min_sims) throw InvalidArgument("calibration needs at least " + std::to_string(min_sims) + " simulations");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (test.kind == TestKind::kComposite && test.tau_grid.empty()) throw InvalidArgument("composite test needs a tau grid");
  validate(sim.design);
  CalibrationResult out;
  out.n_sims = n_sims;
  out.alpha = alpha;
  out.p_values.assign(n_sims, 1.0);
  parallel_blocks(n_sims, threads, [&](std::size_t s) {
    SimDataset ds = simulate_dataset(sim, s);
    out.p_values[s] = run_test(test, sim.design, ds,
                               "ri:" + std::to_string(sim.master_seed) + ":" + std::to_string(s), alpha, 1);
  });
  double sum = 0.0;
  for (double p : out.p_values) {
    sum += p;
    out.rejections += p <= alpha;
  }
  out.rejection_rate = static_cast<double>(out.rejections) / static_cast<double>(n_sims);
  out.mean_p = sum / static_cast<double>(n_sims);
  std::tie(out.ci_low, out.ci_high) = wilson_interval(out.rejections, n_sims);
  return out;
}

inline nlohmann::json to_json(const CalibrationResult& r) {
  return {{"n_sims", r.n_sims},     {"rejections", r.rejections}, {"alpha", r.alpha},
          {"rejection_rate", r.rejection_rate}, {"ci_low", r.ci_low}, {"ci_high", r.ci_high},
          {"mean_p", r.mean_p}};
}

// Simulation parameter addressed by name ("tau", "rho", "theta", "beta", ...).
inline double& sim_parameter(SimParams& p, std::string_view name) {
  if (name == "tau") return p.tau;
  if (name == "rho") return p.rho;
  if (name == "theta") return p.theta;
  if (name == "alpha") return p.alpha;
  if (name == "beta") return p.beta;
  if (name == "gamma") return p.gamma;
  if (name == "delta") return p.delta;
  if (name == "noise_sd") return p.noise_sd;
  if (name == "tau_het_sd") return p.tau_het_sd;
  if (name == "confound_sd") return p.confound_sd;
  throw InvalidArgument("unknown simulation parameter \"" + std::string(name) + "\"");
}

struct PowerPoint {
  double effect = 0.0;
  CalibrationResult calibration;
};

// calibrate() at each value of `parameter`; every grid point reuses the same
// master seed, so the points differ only in the effect size.
inline std::vector<PowerPoint> power_curve(const TestSpec& test, const SimSpec& sim, std::string_view parameter,
                                           const std::vector<double>& effect_grid, std::size_t n_sims, double alpha,
                                           unsigned threads = 0, std::size_t min_sims = 100) {
  if (effect_grid.empty()) throw InvalidArgument("effect grid is empty");
  std::vector<PowerPoint> out;
  for (double effect : effect_grid) {
    SimSpec point = sim;
    sim_parameter(point.params, parameter) = effect;
    out.push_back({effect, calibrate(test, point, n_sims, alpha, threads, min_sims)});
  }
  return out;
}

}  // namespace netexp
