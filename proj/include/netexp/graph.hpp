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

// Interaction networks: storage, CSV ingestion, synthetic generators,
// partitioning and row-normalized adjacency weights.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "netexp/common.hpp"
#include "netexp/counter_rng.hpp"

namespace netexp {

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  NodeId node = 0;
  double weight = 0.0;
};

// Partition of the nodes into k non-empty clusters labelled 0..k-1.
class ClusterAssignment {
 public:
  ClusterAssignment() = default;

  explicit ClusterAssignment(std::vector<int> labels) : labels_(std::move(labels)) {
    int max_label = -1;
    for (int l : labels_) {
      if (l < 0) throw InvalidArgument("cluster label must be non-negative");
      max_label = std::max(max_label, l);
    }
    k_ = static_cast<std::size_t>(max_label + 1);
    sizes_.assign(k_, 0);
    for (int l : labels_) ++sizes_[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k_; ++c) {
      if (sizes_[c] == 0) throw InvalidArgument("cluster " + std::to_string(c) + " is empty");
    }
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return labels_.size(); }
  int operator[](std::size_t node) const { return labels_[node]; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  std::size_t cluster_size(std::size_t c) const { return sizes_[c]; }

  // Members of each cluster in ascending node order.
  std::vector<std::vector<NodeId>> members() const {
    std::vector<std::vector<NodeId>> out(k_);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      out[static_cast<std::size_t>(labels_[i])].push_back(static_cast<NodeId>(i));
    }
    return out;
  }

  friend bool operator==(const ClusterAssignment& a, const ClusterAssignment& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<int> labels_;
  std::vector<std::size_t> sizes_;
  std::size_t k_ = 0;
};

// Immutable weighted network on nodes 0..n-1.
//
// For a directed graph an edge (i, j) makes j a peer of i, i.e. A_ij = w.
// Undirected graphs store each edge once and expose it from both endpoints.
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t n, std::vector<Edge> edges, bool directed = false,
        std::optional<std::vector<int>> cluster_labels = std::nullopt,
        std::vector<std::vector<double>> covariates = {})
      : n_(n),
        directed_(directed),
        edges_(std::move(edges)),
        cluster_labels_(std::move(cluster_labels)),
        covariates_(std::move(covariates)) {
    validate();
    build_adjacency();
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  bool directed() const noexcept { return directed_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::optional<std::vector<int>>& cluster_labels() const noexcept { return cluster_labels_; }
  const std::vector<std::vector<double>>& covariates() const noexcept { return covariates_; }

  // Peers j of node i with A_ij > 0 or an explicit zero-weight edge, sorted by j.
  std::span<const Neighbor> neighbors(NodeId i) const {
    check_node(i);
    return {adj_.data() + offsets_[i], adj_.data() + offsets_[i + 1]};
  }

  // Nodes sharing an edge with i in either direction, sorted by id.
  std::span<const Neighbor> undirected_neighbors(NodeId i) const {
    check_node(i);
    if (!directed_) return neighbors(i);
    return {sym_adj_.data() + sym_offsets_[i], sym_adj_.data() + sym_offsets_[i + 1]};
  }

  std::size_t degree(NodeId i) const { return neighbors(i).size(); }

  // Sum_j A_ij.
  double row_sum(NodeId i) const {
    check_node(i);
    return row_sum_[i];
  }

  double weight(NodeId i, NodeId j) const {
    check_node(j);
    auto nb = neighbors(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), j,
                               [](const Neighbor& a, NodeId b) { return a.node < b; });
    return (it != nb.end() && it->node == j) ? it->weight : 0.0;
  }

  // Row-normalized adjacency entry; zero for nodes without positive row sum.
  double row_weight(NodeId i, NodeId j) const {
    double s = row_sum(i);
    if (s <= 0.0) return 0.0;
    return weight(i, j) / s;
  }

  // Copy with every edge weight set to 1.
  Graph binarized() const {
    auto edges = edges_;
    for (auto& e : edges) e.weight = 1.0;
    return Graph(n_, std::move(edges), directed_, cluster_labels_, covariates_);
  }

  Graph with_cluster_labels(std::vector<int> labels) const {
    return Graph(n_, edges_, directed_, std::move(labels), covariates_);
  }

  // Index of edge (src, dst) in edges(), if present. Undirected lookups match either orientation.
  std::optional<std::size_t> edge_index(NodeId src, NodeId dst) const {
    auto key = directed_ ? std::pair{src, dst} : std::pair{std::min(src, dst), std::max(src, dst)};
    auto it = edge_lookup_.find(pack(key.first, key.second));
    if (it == edge_lookup_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.directed_ == b.directed_ && a.edges_ == b.edges_ &&
           a.cluster_labels_ == b.cluster_labels_ && a.covariates_ == b.covariates_;
  }

 private:
  static std::uint64_t pack(NodeId a, NodeId b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }

  void check_node(NodeId i) const {
    if (i >= n_) {
      throw InvalidArgument("node id " + std::to_string(i) + " out of range [0, " + std::to_string(n_) + ")");
    }
  }

  void validate() {
    if (n_ > std::numeric_limits<NodeId>::max()) throw InvalidArgument("too many nodes");
    edge_lookup_.reserve(edges_.size());
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const Edge& e = edges_[k];
      if (e.src >= n_ || e.dst >= n_) {
        throw InvalidArgument("edge " + std::to_string(k) + ": node id out of range");
      }
      if (e.src == e.dst) throw InvalidArgument("edge " + std::to_string(k) + ": self-loop");
      if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
        throw InvalidArgument("edge " + std::to_string(k) + ": weight must be finite and non-negative");
      }
      NodeId a = directed_ ? e.src : std::min(e.src, e.dst);
      NodeId b = directed_ ? e.dst : std::max(e.src, e.dst);
      if (!edge_lookup_.emplace(pack(a, b), k).second) {
        throw InvalidArgument("duplicate edge " + std::to_string(e.src) + "," + std::to_string(e.dst));
      }
    }
    if (cluster_labels_) {
      if (cluster_labels_->size() != n_) throw InvalidArgument("cluster labels must cover every node");
      for (int l : *cluster_labels_) {
        if (l < 0) throw InvalidArgument("cluster label must be non-negative");
      }
    }
    if (!covariates_.empty() && covariates_.size() != n_) {
      throw InvalidArgument("covariates must cover every node");
    }
  }

  static void fill_csr(std::size_t n, const std::vector<std::tuple<NodeId, NodeId, double>>& arcs,
                       std::vector<std::size_t>& offsets, std::vector<Neighbor>& adj) {
    offsets.assign(n + 1, 0);
    for (auto& [s, d, w] : arcs) ++offsets[s + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    adj.assign(arcs.size(), Neighbor{});
    std::vector<std::size_t> pos(offsets.begin(), offsets.end() - 1);
    for (auto& [s, d, w] : arcs) adj[pos[s]++] = Neighbor{d, w};
    for (std::size_t i = 0; i < n; ++i) {
      std::sort(adj.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                adj.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]),
                [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    }
  }

  void build_adjacency() {
    std::vector<std::tuple<NodeId, NodeId, double>> arcs;
    arcs.reserve(directed_ ? edges_.size() : 2 * edges_.size());
    for (const Edge& e : edges_) {
      arcs.emplace_back(e.src, e.dst, e.weight);
      if (!directed_) arcs.emplace_back(e.dst, e.src, e.weight);
    }
    fill_csr(n_, arcs, offsets_, adj_);
    row_sum_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) s += adj_[k].weight;
      row_sum_[i] = s;
    }
    if (directed_) {
      // Symmetrized view; reciprocal arcs are merged by summing weights.
      std::map<std::pair<NodeId, NodeId>, double> merged;
      for (const Edge& e : edges_) {
        merged[{e.src, e.dst}] += e.weight;
        merged[{e.dst, e.src}] += e.weight;
      }
      std::vector<std::tuple<NodeId, NodeId, double>> sym;
      sym.reserve(merged.size());
      for (auto& [key, w] : merged) sym.emplace_back(key.first, key.second, w);
      fill_csr(n_, sym, sym_offsets_, sym_adj_);
    }
  }

  std::size_t n_ = 0;
  bool directed_ = false;
  std::vector<Edge> edges_;
  std::optional<std::vector<int>> cluster_labels_;
  std::vector<std::vector<double>> covariates_;

  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adj_;
  std::vector<double> row_sum_;
  std::vector<std::size_t> sym_offsets_;
  std::vector<Neighbor> sym_adj_;
  std::unordered_map<std::uint64_t, std::size_t> edge_lookup_;
};

inline double row_weight(const Graph& graph, NodeId i, NodeId j) { return graph.row_weight(i, j); }

// ---------------------------------------------------------------------------
// Edge-list CSV
//
//   # n=<count> directed=<0|1>      (optional header, first line)
//   src,dst[,weight]
//
// Other lines starting with '#' are comments.

struct EdgeListHeader {
  std::optional<std::size_t> n;
  std::optional<bool> directed;
};

namespace detail {

inline std::optional<EdgeListHeader> parse_edge_list_header(std::string_view line) {
  line = trim(line);
  if (line.empty() || line.front() != '#') return std::nullopt;
  line.remove_prefix(1);
  EdgeListHeader header;
  bool any = false;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    std::size_t end = line.find_first_of(" \t", pos);
    if (end == std::string_view::npos) end = line.size();
    auto token = line.substr(pos, end - pos);
    pos = end;
    auto eq = token.find('=');
    if (eq == std::string_view::npos) continue;
    auto key = token.substr(0, eq);
    auto value = token.substr(eq + 1);
    if (key == "n") {
      auto v = parse_number<std::size_t>(value);
      if (!v) throw ParseError("invalid n in header", 1);
      header.n = *v;
      any = true;
    } else if (key == "directed") {
      if (value != "0" && value != "1") throw ParseError("directed must be 0 or 1", 1);
      header.directed = value == "1";
      any = true;
    }
  }
  return any ? std::optional(header) : std::nullopt;
}

struct RawEdge {
  std::string_view src;
  std::string_view dst;
  double weight = 1.0;
};

inline RawEdge parse_edge_fields(std::string_view line, std::size_t line_no) {
  auto fields = split(line, ',');
  if (fields.size() != 2 && fields.size() != 3) {
    throw ParseError("expected \"src,dst\" or \"src,dst,weight\"", line_no);
  }
  RawEdge e{trim(fields[0]), trim(fields[1]), 1.0};
  if (e.src.empty() || e.dst.empty()) throw ParseError("empty node id", line_no);
  if (fields.size() == 3) {
    auto w = parse_number<double>(fields[2]);
    if (!w || !std::isfinite(*w)) throw ParseError("invalid weight", line_no);
    if (*w < 0.0) throw ParseError("negative weight", line_no);
    e.weight = *w;
  }
  return e;
}

template <typename ResolveId>
Graph read_edges(std::istream& in, std::optional<std::size_t> n, std::optional<bool> directed,
                 ResolveId&& resolve, std::size_t& max_id_plus_one) {
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  bool seen_edge = false;
  std::vector<Edge> edges;
  std::set<std::pair<NodeId, NodeId>> seen;
  EdgeListHeader header;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (!seen_content) {
        if (auto h = parse_edge_list_header(view)) header = *h;
      }
      seen_content = true;
      continue;
    }
    if (!seen_edge && (view == "src,dst" || view == "src,dst,weight")) {
      seen_content = true;
      continue;
    }
    seen_content = true;
    seen_edge = true;
    auto raw = parse_edge_fields(view, line_no);
    NodeId s = resolve(raw.src, line_no);
    NodeId d = resolve(raw.dst, line_no);
    if (s == d) throw ParseError("self-loop on node " + std::string(raw.src), line_no);
    bool is_directed = directed.value_or(header.directed.value_or(false));
    auto key = is_directed ? std::pair{s, d} : std::pair{std::min(s, d), std::max(s, d)};
    if (!seen.insert(key).second) throw ParseError("duplicate edge " + std::string(raw.src) + "," + std::string(raw.dst), line_no);
    std::size_t limit = n.value_or(header.n.value_or(std::numeric_limits<std::size_t>::max()));
    if (s >= limit || d >= limit) throw ParseError("node id exceeds n=" + std::to_string(limit), line_no);
    max_id_plus_one = std::max<std::size_t>(max_id_plus_one, std::max(s, d) + std::size_t{1});
    edges.push_back(Edge{s, d, raw.weight});
  }
  std::size_t count = n.value_or(header.n.value_or(max_id_plus_one));
  return Graph(count, std::move(edges), directed.value_or(header.directed.value_or(false)));
}

}  // namespace detail

// Reads an edge list with dense integer node ids. `n` and `directed` override the header.
inline Graph load_edge_list(std::istream& in, std::optional<std::size_t> n = std::nullopt,
                            std::optional<bool> directed = std::nullopt) {
  std::size_t max_id = 0;
  return detail::read_edges(
      in, n, directed,
      [](std::string_view token, std::size_t line_no) -> NodeId {
        auto v = parse_number<std::uint64_t>(token);
        if (!v) throw ParseError("invalid node id \"" + std::string(token) + "\"", line_no);
        if (*v >= std::numeric_limits<NodeId>::max()) throw ParseError("node id too large", line_no);
        return static_cast<NodeId>(*v);
      },
      max_id);
}

// Graph plus the external string id of every node (index = dense id).
struct LabeledGraph {
  Graph graph;
  std::vector<std::string> names;
};

// Reads an edge list whose node ids are arbitrary strings; dense ids follow
// first appearance.
inline LabeledGraph load_labeled_edge_list(std::istream& in, std::optional<bool> directed = std::nullopt) {
  std::unordered_map<std::string, NodeId> ids;
  std::vector<std::string> names;
  std::size_t max_id = 0;
  Graph g = detail::read_edges(
      in, std::nullopt, directed,
      [&](std::string_view token, std::size_t) -> NodeId {
        auto [it, inserted] = ids.emplace(std::string(token), static_cast<NodeId>(names.size()));
        if (inserted) names.emplace_back(token);
        return it->second;
      },
      max_id);
  return {Graph(names.size(), g.edges(), g.directed()), std::move(names)};
}

inline void write_edge_list(std::ostream& out, const Graph& graph) {
  out << "# n=" << graph.n() << " directed=" << (graph.directed() ? 1 : 0) << '\n';
  for (const Edge& e : graph.edges()) {
    out << e.src << ',' << e.dst;
    if (e.weight != 1.0) out << ',' << format_double(e.weight);
    out << '\n';
  }
}

inline void write_node_map(std::ostream& out, const std::vector<std::string>& names) {
  out << "node,id\n";
  for (std::size_t i = 0; i < names.size(); ++i) out << i << ',' << names[i] << '\n';
}

// Cluster CSV: "node,label" rows, optional header line.
inline ClusterAssignment load_clusters(std::istream& in, std::size_t n) {
  std::vector<int> labels(n, -1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty() || view.front() == '#' || view == "node,label") continue;
    auto fields = split(view, ',');
    if (fields.size() != 2) throw ParseError("expected \"node,label\"", line_no);
    auto node = parse_number<std::size_t>(fields[0]);
    auto label = parse_number<int>(fields[1]);
    if (!node || !label || *label < 0) throw ParseError("invalid node or label", line_no);
    if (*node >= n) throw ParseError("node id out of range", line_no);
    if (labels[*node] != -1) throw ParseError("node labelled twice", line_no);
    labels[*node] = *label;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) throw InvalidArgument("node " + std::to_string(i) + " has no cluster label");
  }
  return ClusterAssignment(std::move(labels));
}

inline void write_clusters(std::ostream& out, const ClusterAssignment& clusters) {
  out << "node,label\n";
  for (std::size_t i = 0; i < clusters.size(); ++i) out << i << ',' << clusters[i] << '\n';
}

// ---------------------------------------------------------------------------
// Generators

// g disjoint cliques of m nodes; node i belongs to clique i / m.
inline Graph generate_disjoint_cliques(std::size_t g, std::size_t m) {
  if (g == 0 || m == 0) throw InvalidArgument("clique count and size must be positive");
  std::vector<Edge> edges;
  edges.reserve(g * m * (m - 1) / 2);
  std::vector<int> labels(g * m);
  for (std::size_t c = 0; c < g; ++c) {
    auto base = static_cast<NodeId>(c * m);
    for (std::size_t a = 0; a < m; ++a) {
      labels[base + a] = static_cast<int>(c);
      for (std::size_t b = a + 1; b < m; ++b) {
        edges.push_back(Edge{static_cast<NodeId>(base + a), static_cast<NodeId>(base + b), 1.0});
      }
    }
  }
  return Graph(g * m, std::move(edges), false, std::move(labels));
}

// Undirected G(n, p) with geometric skipping over node pairs (Batagelj & Brandes).
inline Graph generate_random_graph(std::size_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("edge probability must lie in [0, 1]");
  std::vector<Edge> edges;
  if (n < 2 || p == 0.0) return Graph(n, std::move(edges));
  if (p == 1.0) {
    for (NodeId v = 1; v < n; ++v)
      for (NodeId w = 0; w < v; ++w) edges.push_back(Edge{w, v, 1.0});
    return Graph(n, std::move(edges));
  }
  const CounterRng rng(seed, 0x45524e59ULL);
  const double log_q = std::log1p(-p);
  std::uint64_t draw = 0;
  std::int64_t v = 1;
  std::int64_t w = -1;
  const auto nn = static_cast<std::int64_t>(n);
  while (v < nn) {
    double u = rng.uniform(draw++);
    w += 1 + static_cast<std::int64_t>(std::floor(std::log(u) / log_q));
    while (w >= v && v < nn) {
      w -= v;
      ++v;
    }
    if (v < nn) edges.push_back(Edge{static_cast<NodeId>(w), static_cast<NodeId>(v), 1.0});
  }
  return Graph(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// Partitioning

namespace detail {

// Relabels so that clusters are numbered by first appearance in node order.
inline std::vector<int> compact_labels(const std::vector<int>& labels) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

inline std::vector<int> label_propagation(const Graph& graph, std::uint64_t seed, int max_iterations) {
  const std::size_t n = graph.n();
  // Initial labels: a seeded permutation of 0..n-1, so the smallest-label tie
  // rule depends on the seed.
  const CounterRng rng(seed, 0x4c50ULL);
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = rng.bits(i);
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : a < b;
  });
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) labels[order[r]] = static_cast<int>(r);

  std::vector<int> next(n);
  std::unordered_map<int, double> score;
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (NodeId i = 0; i < n; ++i) {
      auto nb = graph.undirected_neighbors(i);
      if (nb.empty()) {
        next[i] = labels[i];
        continue;
      }
      score.clear();
      for (const Neighbor& x : nb) score[labels[x.node]] += x.weight;
      int best = labels[i];
      double best_score = -1.0;
      for (auto& [label, s] : score) {
        if (s > best_score || (s == best_score && label < best)) {
          best = label;
          best_score = s;
        }
      }
      next[i] = best;
      changed |= best != labels[i];
    }
    labels.swap(next);
    if (!changed) break;
  }
  return compact_labels(labels);
}

}  // namespace detail

// Synchronous label propagation followed by greedy merging (smallest cluster
// into its most strongly connected neighbour) or splitting (largest cluster
// halved by BFS) until exactly k clusters remain.
inline ClusterAssignment partition(const Graph& graph, std::size_t k, std::uint64_t seed) {
  const std::size_t n = graph.n();
  if (k == 0) throw InvalidArgument("cluster count must be at least 1");
  if (k > n) throw InvalidArgument("cluster count " + std::to_string(k) + " exceeds node count " + std::to_string(n));
  if (k == 1) return ClusterAssignment(std::vector<int>(n, 0));
  if (k == n) {
    std::vector<int> labels(n);
    std::iota(labels.begin(), labels.end(), 0);
    return ClusterAssignment(std::move(labels));
  }

  std::vector<int> labels = detail::label_propagation(graph, seed, 50);
  std::size_t count = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);

  std::vector<std::vector<NodeId>> members(count);
  for (NodeId i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  if (count > k) {
    // Inter-cluster connection weights.
    std::vector<std::map<int, double>> links(count);
    for (const Edge& e : graph.edges()) {
      int a = labels[e.src];
      int b = labels[e.dst];
      if (a == b) continue;
      links[static_cast<std::size_t>(a)][b] += e.weight;
      links[static_cast<std::size_t>(b)][a] += e.weight;
    }
    std::set<std::pair<std::size_t, int>> by_size;
    for (std::size_t c = 0; c < count; ++c) by_size.emplace(members[c].size(), static_cast<int>(c));
    std::size_t live = count;
    while (live > k) {
      auto [size, small] = *by_size.begin();
      by_size.erase(by_size.begin());
      auto& small_links = links[static_cast<std::size_t>(small)];
      int target = -1;
      double best = -1.0;
      for (auto& [c, w] : small_links) {
        if (w > best) {
          best = w;
          target = c;
        }
      }
      if (target < 0) target = by_size.begin()->second;  // isolated cluster: join the smallest
      auto& tgt_members = members[static_cast<std::size_t>(target)];
      by_size.erase({tgt_members.size(), target});
      for (NodeId v : members[static_cast<std::size_t>(small)]) {
        labels[v] = target;
        tgt_members.push_back(v);
      }
      members[static_cast<std::size_t>(small)].clear();
      for (auto& [c, w] : small_links) {
        auto& other = links[static_cast<std::size_t>(c)];
        other.erase(small);
        if (c != target) {
          other[target] += w;
          links[static_cast<std::size_t>(target)][c] += w;
        }
      }
      links[static_cast<std::size_t>(target)].erase(small);
      small_links.clear();
      by_size.emplace(tgt_members.size(), target);
      --live;
    }
  } else if (count < k) {
    std::set<std::pair<std::size_t, int>, std::greater<>> by_size;
    for (std::size_t c = 0; c < count; ++c) by_size.emplace(members[c].size(), static_cast<int>(c));
    std::vector<char> in_cluster(n, 0);
    while (count < k) {
      // Largest cluster; on ties the smallest label.
      auto largest_size = by_size.begin()->first;
      int big = by_size.begin()->second;
      for (auto it = by_size.begin(); it != by_size.end() && it->first == largest_size; ++it) {
        big = std::min(big, it->second);
      }
      by_size.erase({largest_size, big});
      auto& nodes = members[static_cast<std::size_t>(big)];
      std::sort(nodes.begin(), nodes.end());
      for (NodeId v : nodes) in_cluster[v] = 1;
      const std::size_t take = nodes.size() / 2;
      std::vector<NodeId> moved;
      std::vector<char> visited(n, 0);
      std::size_t next_seed = 0;
      while (moved.size() < take) {
        while (visited[nodes[next_seed]]) ++next_seed;
        std::vector<NodeId> queue{nodes[next_seed]};
        visited[nodes[next_seed]] = 1;
        for (std::size_t q = 0; q < queue.size() && moved.size() < take; ++q) {
          NodeId v = queue[q];
          moved.push_back(v);
          for (const Neighbor& x : graph.undirected_neighbors(v)) {
            if (in_cluster[x.node] && !visited[x.node]) {
              visited[x.node] = 1;
              queue.push_back(x.node);
            }
          }
        }
      }
      for (NodeId v : nodes) in_cluster[v] = 0;
      const int fresh = static_cast<int>(members.size());
      std::vector<char> is_moved(n, 0);
      for (NodeId v : moved) {
        is_moved[v] = 1;
        labels[v] = fresh;
      }
      std::vector<NodeId> kept;
      for (NodeId v : nodes) {
        if (!is_moved[v]) kept.push_back(v);
      }
      nodes = std::move(kept);
      members.push_back(std::move(moved));
      by_size.emplace(members[static_cast<std::size_t>(big)].size(), big);
      by_size.emplace(members.back().size(), fresh);
      ++count;
    }
  }
  return ClusterAssignment(detail::compact_labels(labels));
}

// Fraction of edges whose endpoints lie in different clusters.
inline double cut_fraction(const Graph& graph, const ClusterAssignment& clusters) {
  if (clusters.size() != graph.n()) throw InvalidArgument("cluster labels do not match graph size");
  if (graph.num_edges() == 0) return 0.0;
  std::size_t cut = 0;
  for (const Edge& e : graph.edges()) {
    if (clusters[e.src] != clusters[e.dst]) ++cut;
  }
  return static_cast<double>(cut) / static_cast<double>(graph.num_edges());
}

}  // namespace netexp
