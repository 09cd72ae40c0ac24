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

// Randomization strategies for subject-level (Z) and edge-level (W) treatments.
//
// Text form, one line: "<type> key=value ...", e.g.
//   iid_bernoulli p=0.5
//   cluster_bernoulli p=0.5 k=2 labels=0,0,1,1
// JSON form: {"type": "<type>", <key>: <value>, ...}; cluster labels are a JSON array.

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"
#include "netexp/common.hpp"
#include "netexp/graph.hpp"

namespace netexp {

struct IidBernoulli {
  double p = 0.5;
  friend bool operator==(const IidBernoulli&, const IidBernoulli&) = default;
};

// Exactly n1 units treated: those with the n1 smallest hash values.
struct CompleteRandomization {
  std::size_t n1 = 0;
  friend bool operator==(const CompleteRandomization&, const CompleteRandomization&) = default;
};

// Whole clusters treated together with probability p.
struct ClusterBernoulli {
  ClusterAssignment clusters;
  double p = 0.5;
  friend bool operator==(const ClusterBernoulli&, const ClusterBernoulli&) = default;
};

// Per-cluster probability P_c ~ Uniform(0, 1), then Z_j ~ Bernoulli(P_c(j)).
struct TwoStageUniform {
  ClusterAssignment clusters;
  friend bool operator==(const TwoStageUniform&, const TwoStageUniform&) = default;
};

// Partition the graph into k clusters, then ClusterBernoulli(p).
struct GraphCluster {
  std::size_t k = 1;
  double p = 0.5;
  std::uint64_t partition_seed = 0;
  friend bool operator==(const GraphCluster&, const GraphCluster&) = default;
};

struct EdgeIid {
  double p = 0.5;
  friend bool operator==(const EdgeIid&, const EdgeIid&) = default;
};

// All out-edges of a sender share one draw.
struct SenderClustered {
  double p = 0.5;
  friend bool operator==(const SenderClustered&, const SenderClustered&) = default;
};

// All in-edges of a recipient share one draw.
struct RecipientClustered {
  double p = 0.5;
  friend bool operator==(const RecipientClustered&, const RecipientClustered&) = default;
};

using Design = std::variant<IidBernoulli, CompleteRandomization, ClusterBernoulli, TwoStageUniform,
                            GraphCluster, EdgeIid, SenderClustered, RecipientClustered>;

inline bool is_edge_design(const Design& d) {
  return std::holds_alternative<EdgeIid>(d) || std::holds_alternative<SenderClustered>(d) ||
         std::holds_alternative<RecipientClustered>(d);
}

inline std::string design_type_name(const Design& d) {
  return std::visit(
      []<typename T>(const T&) -> std::string {
        if constexpr (std::is_same_v<T, IidBernoulli>) return "iid_bernoulli";
        else if constexpr (std::is_same_v<T, CompleteRandomization>) return "complete_randomization";
        else if constexpr (std::is_same_v<T, ClusterBernoulli>) return "cluster_bernoulli";
        else if constexpr (std::is_same_v<T, TwoStageUniform>) return "two_stage_uniform";
        else if constexpr (std::is_same_v<T, GraphCluster>) return "graph_cluster";
        else if constexpr (std::is_same_v<T, EdgeIid>) return "edge_iid";
        else if constexpr (std::is_same_v<T, SenderClustered>) return "sender_clustered";
        else return "recipient_clustered";
      },
      d);
}

namespace detail {

inline void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("probability " + format_double(p) + " outside [0, 1]");
}

inline std::string labels_to_text(const ClusterAssignment& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(c[i]);
  }
  return s;
}

}  // namespace detail

inline void validate(const Design& design) {
  std::visit(
      [](const auto& d) {
        if constexpr (requires { d.p; }) detail::check_probability(d.p);
        if constexpr (requires { d.k; }) {
          if (d.k == 0) throw InvalidArgument("graph_cluster needs k >= 1");
        }
      },
      design);
}

// Human-readable one-line summary with every parameter; parse_design_description inverts it.
inline std::string design_description(const Design& design) {
  return std::visit(
      [&]<typename T>(const T& d) -> std::string {
        std::string s = design_type_name(design);
        if constexpr (std::is_same_v<T, CompleteRandomization>) {
          s += " n1=" + std::to_string(d.n1);
        } else if constexpr (std::is_same_v<T, GraphCluster>) {
          s += " k=" + std::to_string(d.k) + " p=" + format_double(d.p) +
               " partition_seed=" + std::to_string(d.partition_seed);
        } else if constexpr (std::is_same_v<T, ClusterBernoulli>) {
          s += " p=" + format_double(d.p) + " k=" + std::to_string(d.clusters.k()) +
               " labels=" + detail::labels_to_text(d.clusters);
        } else if constexpr (std::is_same_v<T, TwoStageUniform>) {
          s += " k=" + std::to_string(d.clusters.k()) + " labels=" + detail::labels_to_text(d.clusters);
        } else {
          s += " p=" + format_double(d.p);
        }
        return s;
      },
      design);
}

namespace detail {

inline ClusterAssignment parse_label_list(std::string_view text) {
  std::vector<int> labels;
  if (!trim(text).empty()) {
    for (auto tok : split(text, ',')) {
      auto v = parse_number<int>(tok);
      if (!v) throw InvalidArgument("invalid cluster label \"" + std::string(tok) + "\"");
      labels.push_back(*v);
    }
  }
  return ClusterAssignment(std::move(labels));
}

class DesignFields {
 public:
  explicit DesignFields(std::map<std::string, std::string> fields) : fields_(std::move(fields)) {}

  const std::string& raw(const std::string& key) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) throw InvalidArgument("design is missing \"" + key + "\"");
    return it->second;
  }
  double real(const std::string& key) const {
    auto v = parse_number<double>(raw(key));
    if (!v) throw InvalidArgument("design field \"" + key + "\" is not a number");
    return *v;
  }
  std::uint64_t integer(const std::string& key) const {
    auto v = parse_number<std::uint64_t>(raw(key));
    if (!v) throw InvalidArgument("design field \"" + key + "\" is not a non-negative integer");
    return *v;
  }
  bool has(const std::string& key) const { return fields_.count(key) != 0; }

 private:
  std::map<std::string, std::string> fields_;
};

inline Design build_design(const std::string& type, const DesignFields& f) {
  Design d;
  if (type == "iid_bernoulli") {
    d = IidBernoulli{f.real("p")};
  } else if (type == "complete_randomization") {
    d = CompleteRandomization{f.integer("n1")};
  } else if (type == "cluster_bernoulli") {
    auto clusters = parse_label_list(f.raw("labels"));
    if (f.has("k") && f.integer("k") != clusters.k()) throw InvalidArgument("k does not match labels");
    d = ClusterBernoulli{std::move(clusters), f.real("p")};
  } else if (type == "two_stage_uniform") {
    auto clusters = parse_label_list(f.raw("labels"));
    if (f.has("k") && f.integer("k") != clusters.k()) throw InvalidArgument("k does not match labels");
    d = TwoStageUniform{std::move(clusters)};
  } else if (type == "graph_cluster") {
    d = GraphCluster{f.integer("k"), f.real("p"), f.has("partition_seed") ? f.integer("partition_seed") : 0};
  } else if (type == "edge_iid") {
    d = EdgeIid{f.real("p")};
  } else if (type == "sender_clustered") {
    d = SenderClustered{f.real("p")};
  } else if (type == "recipient_clustered") {
    d = RecipientClustered{f.real("p")};
  } else {
    throw InvalidArgument("unknown design type \"" + type + "\"");
  }
  validate(d);
  return d;
}

}  // namespace detail

inline Design parse_design_description(std::string_view text) {
  std::istringstream in{std::string(trim(text))};
  std::string type;
  in >> type;
  if (type.empty()) throw InvalidArgument("empty design description");
  std::map<std::string, std::string> fields;
  std::string token;
  while (in >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos) throw InvalidArgument("expected key=value, got \"" + token + "\"");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return detail::build_design(type, detail::DesignFields(std::move(fields)));
}

inline nlohmann::json design_to_json(const Design& design) {
  nlohmann::json j;
  j["type"] = design_type_name(design);
  std::visit(
      [&]<typename T>(const T& d) {
        if constexpr (std::is_same_v<T, CompleteRandomization>) {
          j["n1"] = d.n1;
        } else if constexpr (std::is_same_v<T, GraphCluster>) {
          j["k"] = d.k;
          j["p"] = d.p;
          j["partition_seed"] = d.partition_seed;
        } else if constexpr (std::is_same_v<T, ClusterBernoulli>) {
          j["p"] = d.p;
          j["labels"] = d.clusters.labels();
        } else if constexpr (std::is_same_v<T, TwoStageUniform>) {
          j["labels"] = d.clusters.labels();
        } else {
          j["p"] = d.p;
        }
      },
      design);
  return j;
}

inline Design design_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw InvalidArgument("design JSON needs a string \"type\" field");
  }
  std::map<std::string, std::string> fields;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    if (it.key() == "type") continue;
    if (it.key() == "labels") {
      if (!v.is_array()) throw InvalidArgument("\"labels\" must be an array of integers");
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) throw InvalidArgument("\"labels\" must be an array of integers");
        if (i) s += ',';
        s += std::to_string(v[i].get<long long>());
      }
      fields["labels"] = s;
    } else if (v.is_number_integer()) {
      fields[it.key()] = std::to_string(v.get<long long>());
    } else if (v.is_number()) {
      fields[it.key()] = format_double(v.get<double>());
    } else if (v.is_string()) {
      fields[it.key()] = v.get<std::string>();
    }
  }
  return detail::build_design(j["type"].get<std::string>(), detail::DesignFields(std::move(fields)));
}

}  // namespace netexp
