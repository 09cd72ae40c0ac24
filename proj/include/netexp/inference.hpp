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

// Fisherian randomization inference for spillovers and social influence.
//
// Every test shares one engine: residualize the observed outcomes under the
// null, redraw the treatment R times from the known design (replication r uses
// salt#r), evaluate the statistic on each redraw and report
//
//   p = (1 + #{r : T_null,r >= T_obs}) / (R + 1).
//
// Replications whose statistic is degenerate count as T_null = -inf; more than
// half degenerate aborts the test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "netexp/common.hpp"
#include "netexp/design.hpp"
#include "netexp/exposure.hpp"
#include "netexp/graph.hpp"
#include "netexp/hash.hpp"
#include "netexp/parallel.hpp"
#include "netexp/randomizer.hpp"
#include "netexp/statistics.hpp"

namespace netexp {

struct RandomizationOptions {
  std::size_t replications = 1000;
  std::string salt = "netexp";
  unsigned threads = 0;
  ExposureKind exposure = ExposureKind::kFractionTreated;
  std::size_t max_attempts = kDefaultMaxAttempts;
};

struct NullSummary {
  double min = 0, q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0, max = 0, mean = 0;
};

struct TestResult {
  std::string test;
  double stat_obs = 0.0;
  double p_value = 1.0;
  std::size_t replications = 0;
  std::size_t degenerate = 0;
  NullSummary null_quantiles;
  std::string design;
  std::string statistic;
  std::string salt;
  std::optional<double> tau0;
  std::optional<double> rho0;
  std::optional<double> theta0;
  std::size_t focal_units = 0;
};

struct CompositeResult {
  TestResult result;  // the grid point with the largest p-value
  double argmax_tau = 0.0;
  std::vector<double> tau_grid;
  std::vector<double> p_values;
};

struct AcceptanceRegion {
  std::vector<double> tau_grid;
  std::vector<double> rho_grid;
  double alpha = 0.05;
  std::vector<std::vector<double>> p;  // p[tau index][rho index]
  std::vector<std::vector<bool>> accepted;
  std::string statistic;
  std::size_t replications = 0;

  bool is_accepted(std::size_t tau_index, std::size_t rho_index) const { return accepted[tau_index][rho_index]; }
};

struct FocalSet {
  std::vector<NodeId> nodes;  // sorted, unique
};

enum class FocalStrategy { kRandom, kIndependentSet, kProvided };

struct FocalSelection {
  FocalSet focal;
  std::size_t budget = 0;
  bool budget_met = true;  // false when the independent set ran out of candidates
};

inline nlohmann::json to_json(const NullSummary& s) {
  return {{"min", s.min}, {"q05", s.q05}, {"q25", s.q25}, {"q50", s.q50},
          {"q75", s.q75}, {"q95", s.q95}, {"max", s.max}, {"mean", s.mean}};
}

inline nlohmann::json to_json(const TestResult& r) {
  nlohmann::json j = {{"test", r.test},
                      {"stat_obs", r.stat_obs},
                      {"p_value", r.p_value},
                      {"replications", r.replications},
                      {"degenerate", r.degenerate},
                      {"null_quantiles", to_json(r.null_quantiles)},
                      {"design", r.design},
                      {"statistic", r.statistic},
                      {"salt", r.salt}};
  if (r.tau0) j["tau0"] = *r.tau0;
  if (r.rho0) j["rho0"] = *r.rho0;
  if (r.theta0) j["theta0"] = *r.theta0;
  if (r.focal_units) j["focal_units"] = r.focal_units;
  return j;
}

namespace detail {

inline constexpr std::size_t kReplicationBlock = 64;

struct CellTally {
  std::size_t at_least_observed = 0;
  std::size_t degenerate = 0;
  std::vector<double> null_values;  // degenerate entries are -inf
};

inline void check_inputs(std::span<const double> y, const TreatmentVector& z, const Graph& graph) {
  if (y.size() != graph.n()) throw InvalidArgument("outcome vector does not match graph size");
  if (z.size() != graph.n()) throw InvalidArgument("treatment vector does not match graph size");
  for (double v : y) {
    if (!std::isfinite(v)) throw InvalidArgument("outcomes must be finite");
  }
}

inline void check_replications(const RandomizationOptions& opts) {
  if (opts.replications < 1) throw InvalidArgument("replications must be at least 1");
}

// Runs R redraws and evaluates `num_cells` statistics on each one.
// draw(salt_r) -> TreatmentVector; cell_stat(cell, z, t) -> optional<double>.
template <typename DrawFn, typename CellStatFn>
std::vector<CellTally> run_null(const Graph& graph, const RandomizationOptions& opts, std::size_t num_cells,
                                std::span<const double> observed, DrawFn&& draw_fn, CellStatFn&& cell_stat) {
  const std::size_t R = opts.replications;
  std::vector<CellTally> tallies(num_cells);
  for (auto& t : tallies) t.null_values.assign(R, 0.0);
  const std::size_t blocks = num_blocks_for(R, kReplicationBlock);
  parallel_blocks(blocks, opts.threads, [&](std::size_t b) {
    std::vector<double> t;
    auto range = block_range(b, R, kReplicationBlock);
    for (std::size_t r = range.begin; r < range.end; ++r) {
      TreatmentVector z = draw_fn(replication_salt(opts.salt, r + 1));
      compute_exposure(graph, z.values(), opts.exposure, t);
      for (std::size_t c = 0; c < num_cells; ++c) {
        auto v = cell_stat(c, z, std::span<const double>(t));
        tallies[c].null_values[r] = v ? *v : -std::numeric_limits<double>::infinity();
      }
    }
  });
  for (std::size_t c = 0; c < num_cells; ++c) {
    auto& tally = tallies[c];
    for (double v : tally.null_values) {
      if (v == -std::numeric_limits<double>::infinity()) {
        ++tally.degenerate;
      } else if (v >= observed[c]) {
        ++tally.at_least_observed;
      }
    }
    if (2 * tally.degenerate > R) {
      throw DegenerateStatistic("statistic degenerate on " + std::to_string(tally.degenerate) + " of " +
                                std::to_string(R) + " replications");
    }
  }
  return tallies;
}

inline NullSummary summarize(std::vector<double> values) {
  values.erase(std::remove(values.begin(), values.end(), -std::numeric_limits<double>::infinity()), values.end());
  NullSummary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  auto q = [&](double f) {
    double pos = f * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, values.size() - 1);
    double w = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - w) + values[hi] * w;
  };
  s.min = values.front();
  s.max = values.back();
  s.q05 = q(0.05);
  s.q25 = q(0.25);
  s.q50 = q(0.5);
  s.q75 = q(0.75);
  s.q95 = q(0.95);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

inline TestResult make_result(std::string test, const CellTally& tally, double observed,
                              const RandomizationOptions& opts, const PreparedDesign& design,
                              const std::string& statistic) {
  TestResult r;
  r.test = std::move(test);
  r.stat_obs = observed;
  r.replications = opts.replications;
  r.degenerate = tally.degenerate;
  r.p_value = static_cast<double>(1 + tally.at_least_observed) / static_cast<double>(opts.replications + 1);
  r.null_quantiles = summarize(tally.null_values);
  r.design = design_description(design.original());
  r.statistic = statistic;
  r.salt = opts.salt;
  return r;
}

template <typename Stat>
std::string statistic_name(const Stat& stat) {
  if constexpr (requires { stat.name(); }) {
    return stat.name();
  } else {
    return "custom";
  }
}

template <typename Stat>
double observed_statistic(const Stat& stat, std::span<const double> y, std::span<const std::uint8_t> z,
                          std::span<const double> t) {
  auto v = stat(y, z, t);
  if (!v) throw DegenerateStatistic("statistic is degenerate on the observed assignment");
  return *v;
}

inline PreparedDesign prepare_subject_design(const Design& design, const Graph& graph) {
  if (is_edge_design(design)) throw InvalidArgument("randomization tests need a subject-level design");
  return PreparedDesign(design, graph);
}

// Shared machinery for tests that redraw from the full design on a grid of
// residualized outcome vectors.
template <typename Stat>
std::vector<CellTally> grid_null(const Graph& graph, const PreparedDesign& prepared, const TreatmentVector& z,
                                 const std::vector<std::vector<double>>& residuals, const Stat& stat,
                                 const RandomizationOptions& opts, std::vector<double>& observed) {
  std::vector<double> t_obs;
  compute_exposure(graph, z.values(), opts.exposure, t_obs);
  observed.clear();
  for (const auto& y : residuals) observed.push_back(observed_statistic(stat, y, z.values(), t_obs));
  return run_null(
      graph, opts, residuals.size(), observed,
      [&](const std::string& salt) { return draw_nodes(prepared, salt); },
      [&](std::size_t c, const TreatmentVector& zs, std::span<const double> ts) {
        return stat(std::span<const double>(residuals[c]), zs.values(), ts);
      });
}

}  // namespace detail

// Sharp null of no spillovers with constant direct effect tau0:
// Y_i(z) = tau0 * z_i + xi_i.
template <typename Stat = Statistic>
TestResult test_sharp_null(std::span<const double> y, const TreatmentVector& z, const Design& design,
                           const Graph& graph, double tau0, const Stat& stat = Stat{},
                           const RandomizationOptions& opts = {}) {
  detail::check_inputs(y, z, graph);
  detail::check_replications(opts);
  auto prepared = detail::prepare_subject_design(design, graph);
  std::vector<std::vector<double>> resid(1, std::vector<double>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) resid[0][i] = y[i] - tau0 * z[i];
  std::vector<double> observed;
  auto tallies = detail::grid_null(graph, prepared, z, resid, stat, opts, observed);
  auto r = detail::make_result("sharp_null", tallies[0], observed[0], opts, prepared, detail::statistic_name(stat));
  r.tau0 = tau0;
  return r;
}

// Composite null of no spillovers with some constant direct effect: the
// supremum of sharp-null p-values over tau_grid.
template <typename Stat = Statistic>
CompositeResult test_composite_no_spillovers(std::span<const double> y, const TreatmentVector& z,
                                             const Design& design, const Graph& graph,
                                             const std::vector<double>& tau_grid, const Stat& stat = Stat{},
                                             const RandomizationOptions& opts = {}) {
  if (tau_grid.empty()) throw InvalidArgument("tau grid is empty");
  detail::check_inputs(y, z, graph);
  detail::check_replications(opts);
  auto prepared = detail::prepare_subject_design(design, graph);
  std::vector<std::vector<double>> resid(tau_grid.size(), std::vector<double>(y.size()));
  for (std::size_t c = 0; c < tau_grid.size(); ++c) {
    for (std::size_t i = 0; i < y.size(); ++i) resid[c][i] = y[i] - tau_grid[c] * z[i];
  }
  std::vector<double> observed;
  auto tallies = detail::grid_null(graph, prepared, z, resid, stat, opts, observed);
  CompositeResult out;
  out.tau_grid = tau_grid;
  std::size_t best = 0;
  for (std::size_t c = 0; c < tau_grid.size(); ++c) {
    auto r = detail::make_result("composite_no_spillovers", tallies[c], observed[c], opts, prepared,
                                 detail::statistic_name(stat));
    out.p_values.push_back(r.p_value);
    if (c == 0 || r.p_value > out.p_values[best]) best = c;
  }
  out.result = detail::make_result("composite_no_spillovers", tallies[best], observed[best], opts, prepared,
                                   detail::statistic_name(stat));
  out.result.tau0 = tau_grid[best];
  out.argmax_tau = tau_grid[best];
  return out;
}

// Joint sharp nulls Y_i = tau0 z_i + rho0 T_i(z) + xi_i over a (tau, rho) grid.
// Cells with p > alpha form the acceptance region.
template <typename Stat = Statistic>
AcceptanceRegion acceptance_region(std::span<const double> y, const TreatmentVector& z, const Design& design,
                                   const Graph& graph, const std::vector<double>& tau_grid,
                                   const std::vector<double>& rho_grid, double alpha,
                                   const Stat& stat = Stat(StatisticKind::kJointF),
                                   const RandomizationOptions& opts = {}) {
  if (tau_grid.empty() || rho_grid.empty()) throw InvalidArgument("tau and rho grids must be nonempty");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  detail::check_inputs(y, z, graph);
  detail::check_replications(opts);
  auto prepared = detail::prepare_subject_design(design, graph);
  std::vector<double> t_obs;
  compute_exposure(graph, z.values(), opts.exposure, t_obs);
  std::vector<std::vector<double>> resid;
  for (double tau : tau_grid) {
    for (double rho : rho_grid) {
      std::vector<double> r(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - tau * z[i] - rho * t_obs[i];
      resid.push_back(std::move(r));
    }
  }
  std::vector<double> observed;
  auto tallies = detail::grid_null(graph, prepared, z, resid, stat, opts, observed);
  AcceptanceRegion region;
  region.tau_grid = tau_grid;
  region.rho_grid = rho_grid;
  region.alpha = alpha;
  region.statistic = detail::statistic_name(stat);
  region.replications = opts.replications;
  region.p.assign(tau_grid.size(), std::vector<double>(rho_grid.size()));
  region.accepted.assign(tau_grid.size(), std::vector<bool>(rho_grid.size()));
  for (std::size_t a = 0; a < tau_grid.size(); ++a) {
    for (std::size_t b = 0; b < rho_grid.size(); ++b) {
      const auto& tally = tallies[a * rho_grid.size() + b];
      double p = static_cast<double>(1 + tally.at_least_observed) / static_cast<double>(opts.replications + 1);
      region.p[a][b] = p;
      region.accepted[a][b] = p > alpha;
    }
  }
  return region;
}

// Sharp null of constant direct effects and social influence:
// Y_i(z, d) = tau0 z_i + theta0 sum_j d_j Abar_ij + xi_i.
// Observed behaviours d are held fixed under re-randomization of z.
template <typename Stat = Statistic>
TestResult test_influence_sharp_null(std::span<const double> y, const TreatmentVector& z,
                                     std::span<const double> d, const Design& design, const Graph& graph,
                                     double tau0, double theta0, const Stat& stat = Stat{},
                                     const RandomizationOptions& opts = {}) {
  detail::check_inputs(y, z, graph);
  detail::check_replications(opts);
  if (d.size() != graph.n()) throw InvalidArgument("behaviour vector does not match graph size");
  auto prepared = detail::prepare_subject_design(design, graph);
  auto adopting = fraction_adopting_peers(graph, d);
  std::vector<std::vector<double>> resid(1, std::vector<double>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) resid[0][i] = y[i] - tau0 * z[i] - theta0 * adopting[i];
  std::vector<double> observed;
  auto tallies = detail::grid_null(graph, prepared, z, resid, stat, opts, observed);
  auto r = detail::make_result("influence_sharp_null", tallies[0], observed[0], opts, prepared,
                               detail::statistic_name(stat));
  r.tau0 = tau0;
  r.theta0 = theta0;
  return r;
}

// Permutation test that ignores both the direct effect (tau0 = 0) and the
// actual design: treatment vectors are uniform permutations of the observed z.
// Only valid when there is no direct effect and z was completely randomized.
template <typename Stat = Statistic>
TestResult naive_permutation_test(std::span<const double> y, const TreatmentVector& z, const Graph& graph,
                                  const Stat& stat = Stat{}, const RandomizationOptions& opts = {}) {
  auto r = test_sharp_null(y, z, CompleteRandomization{z.count_treated()}, graph, 0.0, stat, opts);
  r.test = "naive_permutation";
  return r;
}

// ---------------------------------------------------------------------------
// Focal units

inline FocalSelection select_focal_units(const Graph& graph, double fraction, FocalStrategy strategy,
                                         std::string_view salt, const std::vector<NodeId>& provided = {}) {
  const std::size_t n = graph.n();
  FocalSelection sel;
  if (strategy == FocalStrategy::kProvided) {
    std::set<NodeId> uniq;
    for (NodeId v : provided) {
      if (v >= n) throw InvalidArgument("focal node " + std::to_string(v) + " out of range");
      uniq.insert(v);
    }
    if (uniq.empty() || uniq.size() >= n) throw InvalidArgument("focal set must be a nonempty strict subset of nodes");
    sel.focal.nodes.assign(uniq.begin(), uniq.end());
    sel.budget = uniq.size();
    return sel;
  }
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("focal fraction must lie in (0, 1)");
  sel.budget = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (sel.budget == 0 || sel.budget >= n) {
    throw InvalidArgument("focal fraction yields " + std::to_string(sel.budget) + " of " + std::to_string(n) +
                          " nodes; need a nonempty strict subset");
  }
  std::vector<double> key(n);
  for (NodeId j = 0; j < n; ++j) key[j] = hash_uniform(salt, j);

  if (strategy == FocalStrategy::kRandom) {
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return key[a] != key[b] ? key[a] < key[b] : a < b; });
    sel.focal.nodes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sel.budget));
  } else {
    // Greedy minimum-degree independent set on the undirected view; ties by hash key.
    std::vector<std::size_t> degree(n);
    std::vector<char> removed(n, 0);
    std::set<std::tuple<std::size_t, double, NodeId>> queue;
    for (NodeId v = 0; v < n; ++v) {
      degree[v] = graph.undirected_neighbors(v).size();
      queue.emplace(degree[v], key[v], v);
    }
    while (!queue.empty() && sel.focal.nodes.size() < sel.budget) {
      auto [deg, k, v] = *queue.begin();
      queue.erase(queue.begin());
      sel.focal.nodes.push_back(v);
      removed[v] = 1;
      for (const Neighbor& u : graph.undirected_neighbors(v)) {
        if (removed[u.node]) continue;
        removed[u.node] = 1;
        queue.erase({degree[u.node], key[u.node], u.node});
        for (const Neighbor& w : graph.undirected_neighbors(u.node)) {
          if (removed[w.node]) continue;
          queue.erase({degree[w.node], key[w.node], w.node});
          --degree[w.node];
          queue.emplace(degree[w.node], key[w.node], w.node);
        }
      }
    }
    sel.budget_met = sel.focal.nodes.size() >= sel.budget;
  }
  std::sort(sel.focal.nodes.begin(), sel.focal.nodes.end());
  return sel;
}

// Conditional randomization test of no spillovers (arbitrary direct effects).
// Focal units keep their observed treatment in every redraw and only their
// outcomes enter the statistic.
template <typename Stat = Statistic>
TestResult conditional_test_no_spillovers(std::span<const double> y, const TreatmentVector& z,
                                          const Design& design, const Graph& graph, const FocalSet& focal,
                                          const Stat& stat = Stat{}, const RandomizationOptions& opts = {}) {
  detail::check_inputs(y, z, graph);
  detail::check_replications(opts);
  const std::size_t n = graph.n();
  if (focal.nodes.empty()) throw InvalidArgument("focal set is empty");
  if (focal.nodes.size() >= n) throw InvalidArgument("focal set must leave some units free to vary");
  FixedTreatments fixed(n);
  for (NodeId v : focal.nodes) {
    if (v >= n) throw InvalidArgument("focal node out of range");
    if (fixed.is_fixed(v)) throw InvalidArgument("focal node listed twice");
    fixed.set(v, z[v]);
  }
  auto prepared = detail::prepare_subject_design(design, graph);
  const std::size_t m = focal.nodes.size();
  std::vector<double> y_focal(m);
  for (std::size_t k = 0; k < m; ++k) y_focal[k] = y[focal.nodes[k]];

  auto focal_stat = [&](const TreatmentVector& zs, std::span<const double> ts) {
    std::vector<std::uint8_t> zf(m);
    std::vector<double> tf(m);
    for (std::size_t k = 0; k < m; ++k) {
      zf[k] = zs[focal.nodes[k]];
      tf[k] = ts[focal.nodes[k]];
    }
    return stat(std::span<const double>(y_focal), std::span<const std::uint8_t>(zf), std::span<const double>(tf));
  };

  std::vector<double> t_obs;
  compute_exposure(graph, z.values(), opts.exposure, t_obs);
  auto obs = focal_stat(z, t_obs);
  if (!obs) throw DegenerateStatistic("statistic is degenerate on the observed assignment");
  std::vector<double> observed{*obs};
  auto tallies = detail::run_null(
      graph, opts, 1, observed,
      [&](const std::string& salt) { return conditional_draw(prepared, salt, fixed, opts.max_attempts); },
      [&](std::size_t, const TreatmentVector& zs, std::span<const double> ts) { return focal_stat(zs, ts); });
  auto r = detail::make_result("conditional_no_spillovers", tallies[0], observed[0], opts, prepared,
                               detail::statistic_name(stat));
  r.focal_units = m;
  return r;
}

}  // namespace netexp
