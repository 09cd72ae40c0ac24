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

// Peer exposure T_i = sum_j Abar_ij x_j and Monte Carlo summaries of its
// distribution under a design.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netexp/common.hpp"
#include "netexp/graph.hpp"
#include "netexp/parallel.hpp"
#include "netexp/randomizer.hpp"

namespace netexp {

// Per-node exposure; zero for nodes without peers.
struct ExposureVector {
  std::vector<double> t;

  std::size_t size() const noexcept { return t.size(); }
  double operator[](std::size_t i) const { return t[i]; }
  std::span<const double> values() const noexcept { return t; }
};

enum class ExposureKind {
  kFractionTreated,  // sum_j Abar_ij z_j
  kTreatedCount,     // sum_j A_ij z_j
};

namespace detail {

// Numerator accumulated in neighbour order and divided once, so a node whose
// peers all have x = 1 gets exactly 1.
template <typename T>
void weighted_peer_mean(const Graph& graph, std::span<const T> x, bool normalize, std::vector<double>& out) {
  if (x.size() != graph.n()) {
    throw InvalidArgument("vector of length " + std::to_string(x.size()) + " does not match graph size " +
                          std::to_string(graph.n()));
  }
  out.resize(graph.n());
  for (NodeId i = 0; i < graph.n(); ++i) {
    double num = 0.0;
    for (const Neighbor& nb : graph.neighbors(i)) num += nb.weight * static_cast<double>(x[nb.node]);
    if (normalize) {
      double s = graph.row_sum(i);
      out[i] = s > 0.0 ? num / s : 0.0;
    } else {
      out[i] = num;
    }
  }
}

}  // namespace detail

inline void compute_exposure(const Graph& graph, std::span<const std::uint8_t> z, ExposureKind kind,
                             std::vector<double>& out) {
  detail::weighted_peer_mean(graph, z, kind == ExposureKind::kFractionTreated, out);
}

inline ExposureVector fraction_treated_peers(const Graph& graph, const TreatmentVector& z) {
  ExposureVector e;
  detail::weighted_peer_mean(graph, z.values(), true, e.t);
  return e;
}

// Number (total edge weight) of treated peers.
inline ExposureVector treated_peer_count(const Graph& graph, const TreatmentVector& z) {
  ExposureVector e;
  detail::weighted_peer_mean(graph, z.values(), false, e.t);
  return e;
}

// Weighted mean of peers' behaviours d (binary or real-valued).
inline ExposureVector fraction_adopting_peers(const Graph& graph, std::span<const double> d) {
  ExposureVector e;
  detail::weighted_peer_mean(graph, d, true, e.t);
  return e;
}

inline ExposureVector fraction_adopting_peers(const Graph& graph, std::span<const std::uint8_t> d) {
  ExposureVector e;
  detail::weighted_peer_mean(graph, d, true, e.t);
  return e;
}

// ---------------------------------------------------------------------------

inline constexpr std::size_t kExactSupportMaxDegree = 20;
inline constexpr std::size_t kHistogramBins = 50;

struct NodeExposureSummary {
  double mean = 0.0;
  double variance = 0.0;
  double p0 = 0.0;  // Pr(T_i = 0)
  double p1 = 0.0;  // Pr(T_i = 1)
  // Exact support (value -> probability) when degree <= 20, otherwise
  // (left bin edge -> probability) over 50 uniform bins on [0, 1].
  bool exact_support = true;
  std::map<double, double> histogram;
};

struct ExposureDistribution {
  std::size_t replications = 0;
  std::vector<NodeExposureSummary> nodes;
};

namespace detail {

struct ExposureAccumulator {
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::vector<std::uint64_t> zero;
  std::vector<std::uint64_t> one;
  std::vector<std::map<double, std::uint64_t>> hist;

  explicit ExposureAccumulator(std::size_t n) : sum(n), sum_sq(n), zero(n), one(n), hist(n) {}

  void merge(const ExposureAccumulator& o) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sum_sq[i] += o.sum_sq[i];
      zero[i] += o.zero[i];
      one[i] += o.one[i];
      for (auto& [k, v] : o.hist[i]) hist[i][k] += v;
    }
  }
};

inline double histogram_key(double t, bool exact) {
  if (exact) return t;
  auto bin = static_cast<std::size_t>(std::floor(t * static_cast<double>(kHistogramBins)));
  bin = std::min(bin, kHistogramBins - 1);
  return static_cast<double>(bin) / static_cast<double>(kHistogramBins);
}

}  // namespace detail

// Monte Carlo over draw(design, graph, salt#r), r = 1..R. Results depend only on
// the inputs, not on `threads`.
inline ExposureDistribution exposure_distribution(const Design& design, const Graph& graph, std::size_t replications,
                                                  std::string_view salt, unsigned threads = 0,
                                                  ExposureKind kind = ExposureKind::kFractionTreated) {
  if (replications == 0) throw InvalidArgument("replications must be at least 1");
  PreparedDesign prepared(design, graph);
  const std::size_t n = graph.n();
  std::vector<char> exact(n);
  for (NodeId i = 0; i < n; ++i) exact[i] = graph.degree(i) <= kExactSupportMaxDegree;

  constexpr std::size_t kBlock = 1024;
  const std::size_t blocks = num_blocks_for(replications, kBlock);
  std::vector<detail::ExposureAccumulator> partial(blocks, detail::ExposureAccumulator(0));
  parallel_blocks(blocks, threads, [&](std::size_t b) {
    detail::ExposureAccumulator acc(n);
    std::vector<double> t;
    auto range = block_range(b, replications, kBlock);
    for (std::size_t r = range.begin; r < range.end; ++r) {
      TreatmentVector z = draw_nodes(prepared, replication_salt(salt, r + 1));
      compute_exposure(graph, z.values(), kind, t);
      for (std::size_t i = 0; i < n; ++i) {
        acc.sum[i] += t[i];
        acc.sum_sq[i] += t[i] * t[i];
        acc.zero[i] += t[i] == 0.0;
        acc.one[i] += t[i] == 1.0;
        ++acc.hist[i][detail::histogram_key(t[i], exact[i])];
      }
    }
    partial[b] = std::move(acc);
  });
  detail::ExposureAccumulator total(n);
  for (auto& p : partial) total.merge(p);

  ExposureDistribution out;
  out.replications = replications;
  out.nodes.resize(n);
  const double r = static_cast<double>(replications);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out.nodes[i];
    s.mean = total.sum[i] / r;
    s.variance = replications > 1 ? std::max(0.0, (total.sum_sq[i] - r * s.mean * s.mean) / (r - 1.0)) : 0.0;
    s.p0 = static_cast<double>(total.zero[i]) / r;
    s.p1 = static_cast<double>(total.one[i]) / r;
    s.exact_support = exact[i];
    for (auto& [k, v] : total.hist[i]) s.histogram[k] = static_cast<double>(v) / r;
  }
  return out;
}

struct OverdispersionReport {
  // Var_design(T_i) / Var_baseline(T_i); empty where the baseline variance is 0.
  std::vector<std::optional<double>> ratio;
  // Mean of the defined per-node ratios; empty if none are defined.
  std::optional<double> mean_ratio;
  std::size_t undefined = 0;
};

inline OverdispersionReport overdispersion_check(const Design& design, const Design& baseline, const Graph& graph,
                                                 std::size_t replications, std::string_view salt,
                                                 unsigned threads = 0) {
  auto a = exposure_distribution(design, graph, replications, std::string(salt) + ".design", threads);
  auto b = exposure_distribution(baseline, graph, replications, std::string(salt) + ".baseline", threads);
  OverdispersionReport rep;
  rep.ratio.resize(graph.n());
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < graph.n(); ++i) {
    if (b.nodes[i].variance > 0.0) {
      rep.ratio[i] = a.nodes[i].variance / b.nodes[i].variance;
      sum += *rep.ratio[i];
      ++defined;
    } else {
      ++rep.undefined;
    }
  }
  if (defined > 0) rep.mean_ratio = sum / static_cast<double>(defined);
  return rep;
}

}  // namespace netexp
