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

// Hash-based treatment assignment. Every draw is a pure function of
// (design, graph, salt); Monte Carlo replication r uses replication_salt(salt, r).

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "netexp/common.hpp"
#include "netexp/design.hpp"
#include "netexp/graph.hpp"
#include "netexp/hash.hpp"

namespace netexp {

inline constexpr std::size_t kDefaultMaxAttempts = 10000;

// Per-node treatment Z in {0, 1}.
class TreatmentVector {
 public:
  TreatmentVector() = default;
  explicit TreatmentVector(std::size_t n) : z_(n, 0) {}
  explicit TreatmentVector(std::vector<std::uint8_t> z) : z_(std::move(z)) {
    for (auto v : z_) {
      if (v > 1) throw InvalidArgument("treatment values must be 0 or 1");
    }
  }

  std::size_t size() const noexcept { return z_.size(); }
  std::uint8_t operator[](std::size_t i) const { return z_[i]; }
  std::uint8_t& operator[](std::size_t i) { return z_[i]; }
  std::span<const std::uint8_t> values() const noexcept { return z_; }
  const std::vector<std::uint8_t>& vector() const noexcept { return z_; }
  std::size_t count_treated() const { return static_cast<std::size_t>(std::count(z_.begin(), z_.end(), 1)); }

  friend bool operator==(const TreatmentVector&, const TreatmentVector&) = default;

 private:
  std::vector<std::uint8_t> z_;
};

// Per-edge treatment W, aligned with Graph::edges().
class EdgeTreatment {
 public:
  EdgeTreatment() = default;
  explicit EdgeTreatment(std::vector<std::uint8_t> w) : w_(std::move(w)) {}

  std::size_t size() const noexcept { return w_.size(); }
  std::uint8_t operator[](std::size_t edge) const { return w_[edge]; }
  std::span<const std::uint8_t> values() const noexcept { return w_; }

  std::uint8_t at(const Graph& graph, NodeId src, NodeId dst) const {
    auto idx = graph.edge_index(src, dst);
    if (!idx) throw InvalidArgument("no edge " + std::to_string(src) + "," + std::to_string(dst));
    return w_[*idx];
  }

  friend bool operator==(const EdgeTreatment&, const EdgeTreatment&) = default;

 private:
  std::vector<std::uint8_t> w_;
};

using Assignment = std::variant<TreatmentVector, EdgeTreatment>;

inline std::string replication_salt(std::string_view salt, std::uint64_t r) {
  return std::string(salt) + "#" + std::to_string(r);
}

inline std::string cluster_unit(std::size_t c) { return "c" + std::to_string(c); }

inline std::string edge_unit(NodeId src, NodeId dst) {
  return std::to_string(src) + "-" + std::to_string(dst);
}

// A design bound to a graph: validated, with graph-cluster partitions resolved
// once so repeated draws are cheap.
class PreparedDesign {
 public:
  PreparedDesign(const Design& design, const Graph& graph) : original_(design), graph_(&graph) {
    validate(design);
    if (auto* gc = std::get_if<GraphCluster>(&design)) {
      resolved_ = ClusterBernoulli{partition(graph, gc->k, gc->partition_seed), gc->p};
    } else {
      resolved_ = design;
    }
    if (auto* c = cluster_assignment()) {
      if (c->size() != graph.n()) {
        throw InvalidArgument("cluster labels cover " + std::to_string(c->size()) + " nodes, graph has " +
                              std::to_string(graph.n()));
      }
      members_ = c->members();
    }
    if (auto* cr = std::get_if<CompleteRandomization>(&resolved_)) {
      if (cr->n1 > graph.n()) throw InvalidArgument("n1 exceeds node count");
    }
    if (is_edge_design(design) && graph.num_edges() == 0) {
      throw InvalidArgument("edge-level design requires a graph with edges");
    }
  }

  const Design& original() const noexcept { return original_; }
  const Design& resolved() const noexcept { return resolved_; }
  const Graph& graph() const noexcept { return *graph_; }
  bool edge_level() const { return is_edge_design(original_); }

  const ClusterAssignment* cluster_assignment() const {
    if (auto* cb = std::get_if<ClusterBernoulli>(&resolved_)) return &cb->clusters;
    if (auto* ts = std::get_if<TwoStageUniform>(&resolved_)) return &ts->clusters;
    return nullptr;
  }
  const std::vector<std::vector<NodeId>>& cluster_members() const noexcept { return members_; }

 private:
  Design original_;
  Design resolved_;
  const Graph* graph_;
  std::vector<std::vector<NodeId>> members_;
};

namespace detail {

inline std::vector<NodeId> rank_by_hash(std::string_view salt, std::span<const NodeId> units) {
  std::vector<std::pair<double, NodeId>> keyed;
  keyed.reserve(units.size());
  for (NodeId j : units) keyed.emplace_back(hash_uniform(salt, j), j);
  std::sort(keyed.begin(), keyed.end());
  std::vector<NodeId> out;
  out.reserve(keyed.size());
  for (auto& [u, j] : keyed) out.push_back(j);
  return out;
}

inline std::vector<NodeId> all_nodes(std::size_t n) {
  std::vector<NodeId> v(n);
  std::iota(v.begin(), v.end(), NodeId{0});
  return v;
}

inline std::uint8_t cluster_bernoulli_value(std::string_view salt, std::size_t c, double p) {
  return hash_uniform(salt, cluster_unit(c)) < p ? 1 : 0;
}

inline void two_stage_cluster(std::string_view salt, std::size_t c, std::span<const NodeId> members,
                              std::vector<std::uint8_t>& z) {
  const double pc = hash_uniform(salt, cluster_unit(c));
  const std::string inner = std::string(salt) + ".u";
  for (NodeId j : members) z[j] = hash_uniform(inner, j) < pc ? 1 : 0;
}

}  // namespace detail

// Subject-level draw Z ~ pi(Z).
inline TreatmentVector draw_nodes(const PreparedDesign& prepared, std::string_view salt) {
  if (prepared.edge_level()) throw InvalidArgument("design assigns edges, not nodes");
  const std::size_t n = prepared.graph().n();
  std::vector<std::uint8_t> z(n, 0);
  std::visit(
      [&]<typename T>(const T& d) {
        if constexpr (std::is_same_v<T, IidBernoulli>) {
          for (std::size_t j = 0; j < n; ++j) z[j] = hash_uniform(salt, j) < d.p ? 1 : 0;
        } else if constexpr (std::is_same_v<T, CompleteRandomization>) {
          auto nodes = detail::all_nodes(n);
          auto ranked = detail::rank_by_hash(salt, nodes);
          for (std::size_t r = 0; r < d.n1; ++r) z[ranked[r]] = 1;
        } else if constexpr (std::is_same_v<T, ClusterBernoulli>) {
          const auto& members = prepared.cluster_members();
          for (std::size_t c = 0; c < members.size(); ++c) {
            auto v = detail::cluster_bernoulli_value(salt, c, d.p);
            for (NodeId j : members[c]) z[j] = v;
          }
        } else if constexpr (std::is_same_v<T, TwoStageUniform>) {
          const auto& members = prepared.cluster_members();
          for (std::size_t c = 0; c < members.size(); ++c) detail::two_stage_cluster(salt, c, members[c], z);
        }
      },
      prepared.resolved());
  return TreatmentVector(std::move(z));
}

// Edge-level draw W ~ pi(W), aligned with graph.edges().
inline EdgeTreatment draw_edges(const PreparedDesign& prepared, std::string_view salt) {
  if (!prepared.edge_level()) throw InvalidArgument("design assigns nodes, not edges");
  const auto& edges = prepared.graph().edges();
  std::vector<std::uint8_t> w(edges.size(), 0);
  std::visit(
      [&]<typename T>(const T& d) {
        if constexpr (std::is_same_v<T, EdgeIid>) {
          for (std::size_t k = 0; k < edges.size(); ++k) {
            w[k] = hash_uniform(salt, edge_unit(edges[k].src, edges[k].dst)) < d.p ? 1 : 0;
          }
        } else if constexpr (std::is_same_v<T, SenderClustered> || std::is_same_v<T, RecipientClustered>) {
          std::map<NodeId, std::uint8_t> cache;
          for (std::size_t k = 0; k < edges.size(); ++k) {
            NodeId key = std::is_same_v<T, SenderClustered> ? edges[k].src : edges[k].dst;
            auto it = cache.find(key);
            if (it == cache.end()) it = cache.emplace(key, hash_uniform(salt, key) < d.p ? 1 : 0).first;
            w[k] = it->second;
          }
        }
      },
      prepared.resolved());
  return EdgeTreatment(std::move(w));
}

inline Assignment draw(const PreparedDesign& prepared, std::string_view salt) {
  if (prepared.edge_level()) return draw_edges(prepared, salt);
  return draw_nodes(prepared, salt);
}

inline Assignment draw(const Design& design, const Graph& graph, std::string_view salt) {
  return draw(PreparedDesign(design, graph), salt);
}

// Per-node constraint: -1 free, otherwise the required value.
class FixedTreatments {
 public:
  FixedTreatments() = default;
  explicit FixedTreatments(std::size_t n) : values_(n, -1) {}

  FixedTreatments(std::size_t n, const std::map<NodeId, std::uint8_t>& fixed) : values_(n, -1) {
    for (auto [node, v] : fixed) set(node, v);
  }

  void set(NodeId node, std::uint8_t v) {
    if (node >= values_.size()) throw InvalidArgument("fixed node " + std::to_string(node) + " out of range");
    if (v > 1) throw InvalidArgument("fixed treatment must be 0 or 1");
    if (values_[node] < 0) ++count_;
    values_[node] = static_cast<std::int8_t>(v);
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t count() const noexcept { return count_; }
  bool is_fixed(NodeId node) const { return values_[node] >= 0; }
  std::int8_t operator[](NodeId node) const { return values_[node]; }

 private:
  std::vector<std::int8_t> values_;
  std::size_t count_ = 0;
};

// Draw from pi(Z | Z_i = fixed_i for the constrained nodes).
//
// Designs with independent coordinates (i.i.d., complete randomization, and
// cluster Bernoulli at the cluster level) are sampled directly. Two-stage
// designs use rejection sampling per constrained cluster; attempt a uses the
// salt `salt#a<a>`.
inline TreatmentVector conditional_draw(const PreparedDesign& prepared, std::string_view salt,
                                        const FixedTreatments& fixed,
                                        std::size_t max_attempts = kDefaultMaxAttempts) {
  if (prepared.edge_level()) throw InvalidArgument("conditional draws are defined for subject-level designs");
  const std::size_t n = prepared.graph().n();
  if (fixed.size() != n) throw InvalidArgument("fixed-treatment vector does not match graph size");
  std::vector<std::uint8_t> z(n, 0);

  std::visit(
      [&]<typename T>(const T& d) {
        if constexpr (std::is_same_v<T, IidBernoulli>) {
          for (NodeId j = 0; j < n; ++j) {
            if (fixed.is_fixed(j)) {
              z[j] = static_cast<std::uint8_t>(fixed[j]);
              if ((z[j] == 1 && d.p == 0.0) || (z[j] == 0 && d.p == 1.0)) {
                throw InfeasibleConstraint("node " + std::to_string(j) + " cannot take the fixed value when p=" +
                                           format_double(d.p));
              }
            } else {
              z[j] = hash_uniform(salt, j) < d.p ? 1 : 0;
            }
          }
        } else if constexpr (std::is_same_v<T, CompleteRandomization>) {
          std::size_t ones = 0;
          std::vector<NodeId> free_nodes;
          for (NodeId j = 0; j < n; ++j) {
            if (fixed.is_fixed(j)) {
              z[j] = static_cast<std::uint8_t>(fixed[j]);
              ones += z[j];
            } else {
              free_nodes.push_back(j);
            }
          }
          if (ones > d.n1 || d.n1 - ones > free_nodes.size()) {
            throw InfeasibleConstraint("fixed treatments are incompatible with n1=" + std::to_string(d.n1));
          }
          auto ranked = detail::rank_by_hash(salt, free_nodes);
          for (std::size_t r = 0; r < d.n1 - ones; ++r) z[ranked[r]] = 1;
        } else if constexpr (std::is_same_v<T, ClusterBernoulli>) {
          const auto& members = prepared.cluster_members();
          for (std::size_t c = 0; c < members.size(); ++c) {
            std::int8_t forced = -1;
            for (NodeId j : members[c]) {
              if (!fixed.is_fixed(j)) continue;
              if (forced >= 0 && forced != fixed[j]) {
                throw InfeasibleConstraint("cluster " + std::to_string(c) +
                                           " has fixed nodes with different treatments");
              }
              forced = fixed[j];
            }
            std::uint8_t v;
            if (forced >= 0) {
              v = static_cast<std::uint8_t>(forced);
              if ((v == 1 && d.p == 0.0) || (v == 0 && d.p == 1.0)) {
                throw InfeasibleConstraint("cluster " + std::to_string(c) + " cannot take the fixed value");
              }
            } else {
              v = detail::cluster_bernoulli_value(salt, c, d.p);
            }
            for (NodeId j : members[c]) z[j] = v;
          }
        } else if constexpr (std::is_same_v<T, TwoStageUniform>) {
          const auto& members = prepared.cluster_members();
          for (std::size_t c = 0; c < members.size(); ++c) {
            bool constrained = std::any_of(members[c].begin(), members[c].end(),
                                           [&](NodeId j) { return fixed.is_fixed(j); });
            if (!constrained) {
              detail::two_stage_cluster(salt, c, members[c], z);
              continue;
            }
            bool accepted = false;
            for (std::size_t a = 0; a < max_attempts && !accepted; ++a) {
              const std::string attempt_salt = std::string(salt) + "#a" + std::to_string(a);
              detail::two_stage_cluster(attempt_salt, c, members[c], z);
              accepted = std::all_of(members[c].begin(), members[c].end(), [&](NodeId j) {
                return !fixed.is_fixed(j) || z[j] == static_cast<std::uint8_t>(fixed[j]);
              });
            }
            if (!accepted) {
              throw InfeasibleConstraint("rejection budget of " + std::to_string(max_attempts) +
                                         " attempts exhausted for cluster " + std::to_string(c) +
                                         " (estimated acceptance rate < " +
                                         format_double(1.0 / static_cast<double>(std::max<std::size_t>(max_attempts, 1))) +
                                         ")");
            }
          }
        }
      },
      prepared.resolved());
  return TreatmentVector(std::move(z));
}

inline TreatmentVector conditional_draw(const Design& design, const Graph& graph, std::string_view salt,
                                        const std::map<NodeId, std::uint8_t>& fixed,
                                        std::size_t max_attempts = kDefaultMaxAttempts) {
  PreparedDesign prepared(design, graph);
  return conditional_draw(prepared, salt, FixedTreatments(graph.n(), fixed), max_attempts);
}

}  // namespace netexp
