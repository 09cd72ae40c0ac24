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

// netexp command-line driver. run() is the whole program; main() only adapts
// argv, so tests can drive every subcommand in-process.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "netexp/netexp.hpp"

namespace netexp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Meta = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs fn on the file contents, prefixing any parse error with the path.
template <typename Fn>
auto with_file(const std::string& path, Fn&& fn) {
  std::string text = read_file(path);
  std::istringstream in(text);
  try {
    return fn(in);
  } catch (const Error& e) {
    throw DataError(path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline nlohmann::json read_json(const std::string& path) {
  return with_file(path, [](std::istream& in) { return nlohmann::json::parse(in); });
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot write file");
  out << content;
}

// "a:b:step" (inclusive) or "v1,v2,...".
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  auto fail = [&] { return UsageError("invalid grid \"" + text + "\""); };
  if (text.find(':') != std::string::npos) {
    auto parts = split(text, ':');
    if (parts.size() != 3) throw fail();
    auto a = parse_number<double>(parts[0]), b = parse_number<double>(parts[1]), s = parse_number<double>(parts[2]);
    if (!a || !b || !s || !(*s > 0.0) || *b < *a) throw fail();
    const auto count = static_cast<std::size_t>(std::floor((*b - *a) / *s + 1e-9)) + 1;
    if (count > 100000) throw fail();
    for (std::size_t i = 0; i < count; ++i) out.push_back(*a + static_cast<double>(i) * *s);
  } else {
    for (auto tok : split(text, ',')) {
      auto v = parse_number<double>(tok);
      if (!v) throw fail();
      out.push_back(*v);
    }
  }
  if (out.empty()) throw fail();
  return out;
}

inline Graph load_graph(const std::string& path) {
  return with_file(path, [](std::istream& in) { return load_edge_list(in); });
}

// Design JSON; "clusters_file" is resolved relative to the design file.
inline Design load_design(const std::string& path, const Graph& graph) {
  auto j = read_json(path);
  if (j.is_object() && j.contains("clusters_file")) {
    if (!j["clusters_file"].is_string()) throw DataError(path + ": \"clusters_file\" must be a string");
    std::filesystem::path cpath(j["clusters_file"].get<std::string>());
    if (cpath.is_relative()) cpath = std::filesystem::path(path).parent_path() / cpath;
    auto clusters = with_file(cpath.string(), [&](std::istream& in) { return load_clusters(in, graph.n()); });
    j.erase("clusters_file");
    j["labels"] = clusters.labels();
  }
  try {
    return design_from_json(j);
  } catch (const Error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline CsvTable load_table(const std::string& path) {
  return with_file(path, [](std::istream& in) { return read_csv(in); });
}

inline std::vector<double> load_column(const std::string& path, const std::string& column, std::size_t n) {
  auto table = load_table(path);
  try {
    return read_node_column(table, column, n);
  } catch (const Error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline TreatmentVector load_treatment(const std::string& path, const std::string& column, std::size_t n) {
  auto table = load_table(path);
  try {
    return read_treatment(table, n, column);
  } catch (const Error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline double json_number(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw DataError(std::string("\"") + key + "\" must be a number");
  return j[key].get<double>();
}

inline std::vector<double> json_grid(const nlohmann::json& j, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (j[key].is_string()) return parse_grid(j[key].get<std::string>());
  if (!j[key].is_array()) throw DataError(std::string("\"") + key + "\" must be an array or grid string");
  for (const auto& v : j[key]) {
    if (!v.is_number()) throw DataError(std::string("\"") + key + "\" must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline FocalStrategy focal_strategy_from_name(const std::string& s) {
  if (s == "random") return FocalStrategy::kRandom;
  if (s == "independent_set") return FocalStrategy::kIndependentSet;
  if (s == "provided") return FocalStrategy::kProvided;
  throw UsageError("unknown focal strategy \"" + s + "\"");
}

inline Statistic statistic_from_name(const std::string& s) {
  try {
    return Statistic::from_name(s);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

}  // namespace detail

// Simulation study read from a JSON spec:
//   {"graph": {"model": "erdos_renyi", "n": 500, "p": 0.02} | {"model": "cliques", "groups": 50, "group_size": 10},
//    "fixed_graph": false, "design": {...}, "influence": false,
//    "params": {"tau": 1, "rho": 0, ...}, "master_seed": 1,
//    "test": {"kind": "sharp_null", "statistic": "score", "tau0": 1, "replications": 500, ...},
//    "n_sims": 1000}
struct StudySpec {
  SimSpec sim;
  TestSpec test;
  std::size_t n_sims = 100;
  bool has_replications = false;
  bool has_seed = false;
};

inline StudySpec parse_study_spec(const nlohmann::json& j) {
  using detail::json_number;
  if (!j.is_object()) throw DataError("simulation spec must be a JSON object");
  StudySpec s;
  if (j.contains("graph")) {
    const auto& g = j["graph"];
    std::string model = g.value("model", "erdos_renyi");
    if (model == "erdos_renyi") {
      s.sim.graph_model = GraphModel::kErdosRenyi;
      s.sim.n = static_cast<std::size_t>(json_number(g, "n", 500));
      s.sim.edge_p = json_number(g, "p", 0.02);
    } else if (model == "cliques") {
      s.sim.graph_model = GraphModel::kCliques;
      s.sim.groups = static_cast<std::size_t>(json_number(g, "groups", 50));
      s.sim.group_size = static_cast<std::size_t>(json_number(g, "group_size", 10));
    } else {
      throw DataError("unknown graph model \"" + model + "\"");
    }
  }
  s.sim.fixed_graph = j.value("fixed_graph", false);
  s.sim.influence = j.value("influence", false);
  if (j.contains("design")) s.sim.design = design_from_json(j["design"]);
  if (j.contains("params")) {
    for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
      if (!it.value().is_number()) throw DataError("parameter \"" + it.key() + "\" must be a number");
      sim_parameter(s.sim.params, it.key()) = it.value().get<double>();
    }
  }
  if (j.contains("master_seed")) {
    s.sim.master_seed = j["master_seed"].get<std::uint64_t>();
    s.has_seed = true;
  }
  if (j.contains("test")) {
    const auto& t = j["test"];
    s.test.kind = test_kind_from_name(t.value("kind", "sharp_null"));
    s.test.statistic = Statistic::from_name(t.value("statistic", s.test.kind == TestKind::kRegion ? "F" : "score"));
    s.test.tau0 = json_number(t, "tau0", 0.0);
    s.test.rho0 = json_number(t, "rho0", 0.0);
    s.test.theta0 = json_number(t, "theta0", 0.0);
    s.test.tau_grid = detail::json_grid(t, "tau_grid");
    s.test.rho_grid = detail::json_grid(t, "rho_grid");
    s.test.focal_fraction = json_number(t, "focal_fraction", s.test.focal_fraction);
    if (t.contains("focal_strategy")) s.test.focal_strategy = detail::focal_strategy_from_name(t["focal_strategy"]);
    if (t.contains("replications")) {
      s.test.replications = t["replications"].get<std::size_t>();
      s.has_replications = true;
    }
  }
  s.n_sims = static_cast<std::size_t>(json_number(j, "n_sims", 100));
  return s;
}

class App {
 public:
  App(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(std::vector<std::string> args) {
    CLI::App app{"Design and analysis of networked experiments", "netexp"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--threads", threads_, "Worker threads (0 = hardware concurrency)");
    app.add_option("--R", replications_, "Monte Carlo replications")->check(CLI::PositiveNumber);
    app.add_option("--alpha", alpha_, "Significance level")->check(CLI::Range(0.0, 1.0));
    app.add_option("--salt", salt_, "Randomization salt");
    app.add_option("--seed", seed_, "Master seed");
    app.add_option("--json", json_path_, "Write the result envelope here instead of stdout");

    register_commands(app);

    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    seed_given_ = app.get_option("--seed")->count() > 0;
    r_given_ = app.get_option("--R")->count() > 0;
    try {
      nlohmann::json results = handlers_.at(sub->get_name())();
      nlohmann::json envelope = {{"command", sub->get_name()}, {"config_hash", config_hash_}, {"results", results}};
      std::string text = envelope.dump(2) + "\n";
      if (json_path_.empty()) {
        out_ << text;
      } else {
        detail::write_file(json_path_, text);
      }
      return kExitOk;
    } catch (const UsageError& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const DataError& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitData;
    } catch (const Error& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitData;
    } catch (const nlohmann::json::exception& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitData;
    }
  }

 private:
  // Inputs contribute their content digest, outputs nothing, everything else its value.
  void compute_config_hash(const CLI::App& app, const CLI::App& sub) {
    nlohmann::json cfg;
    cfg["command"] = sub.get_name();
    auto record = [&](const CLI::App& a, nlohmann::json& into) {
      for (const CLI::Option* opt : a.get_options()) {
        if (opt->count() == 0) continue;
        const std::string name = opt->get_name();
        if (outputs_.count(name) || name == "--json" || name == "--threads") continue;
        if (inputs_.count(name)) {
          into[name] = to_hex(sha256(detail::read_file(opt->as<std::string>())));
        } else {
          into[name] = opt->results();
        }
      }
    };
    record(app, cfg["global"]);
    record(sub, cfg["options"]);
    config_hash_ = to_hex(sha256(cfg.dump())).substr(0, 16);
  }

  Meta meta(std::initializer_list<std::pair<std::string, std::string>> extra = {}) const {
    Meta m{{"config_hash", config_hash_}};
    m.insert(m.end(), extra.begin(), extra.end());
    return m;
  }

  std::string csv_with_meta(const Meta& m, const std::function<void(std::ostream&)>& body) const {
    std::ostringstream ss;
    write_comment(ss, m);
    body(ss);
    return ss.str();
  }

  CLI::Option* input(CLI::App* sub, const std::string& name, std::string& target, const std::string& help) {
    inputs_.insert(name);
    return sub->add_option(name, target, help);
  }

  CLI::Option* output(CLI::App* sub, const std::string& name, std::string& target, const std::string& help) {
    outputs_.insert(name);
    return sub->add_option(name, target, help);
  }

  void on(CLI::App* sub, CLI::App& app, std::function<nlohmann::json()> fn) {
    handlers_[sub->get_name()] = [this, sub, &app, fn = std::move(fn)] {
      compute_config_hash(app, *sub);
      return fn();
    };
  }

  void register_commands(CLI::App& app) {
    register_gen_graph(app);
    register_partition(app);
    register_assign(app);
    register_dsl_run(app);
    register_expose(app);
    register_test(app);
    register_region(app);
    register_simulate(app);
    register_calibrate(app);
  }

  void register_gen_graph(CLI::App& app) {
    auto* sub = app.add_subcommand("gen-graph", "Generate a synthetic graph");
    sub->add_option("--model", s_.model, "erdos_renyi or cliques")->check(CLI::IsMember({"erdos_renyi", "cliques"}));
    sub->add_option("--n", s_.n, "Node count (erdos_renyi)");
    sub->add_option("--p", s_.p, "Edge probability (erdos_renyi)")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--groups", s_.groups, "Clique count (cliques)");
    sub->add_option("--group-size", s_.group_size, "Clique size (cliques)");
    output(sub, "--out", s_.out, "Edge-list CSV")->required();
    on(sub, app, [this] {
      Graph g = s_.model == "cliques" ? generate_disjoint_cliques(s_.groups, s_.group_size)
                                      : generate_random_graph(s_.n, s_.p, seed_);
      std::ostringstream ss;
      write_edge_list(ss, g);
      std::string text = ss.str();
      auto nl = text.find('\n');
      std::ostringstream meta_line;
      write_comment(meta_line, meta({{"model", s_.model}, {"seed", std::to_string(seed_)}}));
      text.insert(nl + 1, meta_line.str());
      detail::write_file(s_.out, text);
      if (s_.model == "cliques" && !s_.clusters_out.empty()) {
        detail::write_file(s_.clusters_out, csv_with_meta(meta(), [&](std::ostream& o) {
                             write_clusters(o, netexp::ClusterAssignment(*g.cluster_labels()));
                           }));
      }
      return nlohmann::json{{"n", g.n()}, {"edges", g.num_edges()}, {"directed", g.directed()}, {"out", s_.out}};
    });
    output(sub, "--clusters-out", s_.clusters_out, "Clique membership CSV (cliques model)");
  }

  void register_partition(CLI::App& app) {
    auto* sub = app.add_subcommand("partition", "Partition a graph into k clusters");
    input(sub, "--graph", s_.graph, "Edge-list CSV")->required();
    sub->add_option("--k", s_.k, "Cluster count")->required()->check(CLI::PositiveNumber);
    output(sub, "--out", s_.out, "Cluster CSV (node,label)")->required();
    on(sub, app, [this] {
      Graph g = detail::load_graph(s_.graph);
      auto clusters = partition(g, s_.k, seed_);
      detail::write_file(s_.out, csv_with_meta(meta({{"seed", std::to_string(seed_)}}),
                                               [&](std::ostream& o) { write_clusters(o, clusters); }));
      std::vector<std::size_t> sizes;
      for (const auto& m : clusters.members()) sizes.push_back(m.size());
      return nlohmann::json{{"k", clusters.k()}, {"cut_fraction", cut_fraction(g, clusters)}, {"sizes", sizes}};
    });
  }

  void register_assign(CLI::App& app) {
    auto* sub = app.add_subcommand("assign", "Draw one treatment assignment from a design");
    input(sub, "--graph", s_.graph, "Edge-list CSV")->required();
    input(sub, "--design", s_.design, "Design JSON")->required();
    output(sub, "--out", s_.out, "Assignment CSV (unit,z or src,dst,w)")->required();
    on(sub, app, [this] {
      Graph g = detail::load_graph(s_.graph);
      Design d = detail::load_design(s_.design, g);
      PreparedDesign prepared(d, g);
      auto m = meta({{"salt", salt_}, {"design", design_type_name(d)}});
      nlohmann::json res = {{"design", design_to_json(d)}, {"salt", salt_}, {"out", s_.out}};
      if (prepared.edge_level()) {
        auto w = draw_edges(prepared, salt_);
        detail::write_file(s_.out, csv_with_meta({}, [&](std::ostream& o) { write_edge_treatment(o, g, w, m); }));
        std::size_t treated = 0;
        for (std::size_t k = 0; k < w.size(); ++k) treated += w[k];
        res["units"] = w.size();
        res["treated"] = treated;
      } else {
        auto z = draw_nodes(prepared, salt_);
        detail::write_file(s_.out, csv_with_meta({}, [&](std::ostream& o) { write_treatment(o, z, m); }));
        res["units"] = z.size();
        res["treated"] = z.count_treated();
      }
      return res;
    });
  }

  void register_dsl_run(CLI::App& app) {
    auto* sub = app.add_subcommand("dsl-run", "Evaluate an assignment program for every row of a units CSV");
    input(sub, "--program", s_.program, "Program source")->required();
    input(sub, "--units", s_.units, "CSV whose columns name the program's units")->required();
    sub->add_option("--experiment", s_.experiment, "Experiment name (defaults to --salt)");
    output(sub, "--out", s_.out, "Output CSV")->required();
    on(sub, app, [this] {
      const std::string experiment = s_.experiment.empty() ? salt_ : s_.experiment;
      if (experiment.empty()) throw UsageError("experiment name must be nonempty");
      auto program = detail::with_file(s_.program, [](std::istream& in) {
        std::ostringstream ss;
        ss << in.rdbuf();
        return dsl::parse(ss.str());
      });
      auto table = detail::load_table(s_.units);
      for (const auto& u : program.units()) {
        if (!table.column(u)) throw DataError(s_.units + ": no column for unit \"" + u + "\"");
      }
      auto vars = program.variables();
      std::ostringstream ss;
      write_comment(ss, meta({{"experiment", experiment}}));
      std::vector<std::string> header = table.header;
      for (const auto& v : vars) {
        if (!table.column(v)) header.push_back(v);
      }
      for (std::size_t c = 0; c < header.size(); ++c) ss << (c ? "," : "") << header[c];
      ss << '\n';
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        dsl::Bindings bindings;
        for (std::size_t c = 0; c < table.header.size(); ++c) bindings[table.header[c]] = table.rows[r][c];
        dsl::Values values;
        try {
          values = dsl::evaluate(program, experiment, bindings);
        } catch (const Error& e) {
          throw DataError(s_.units + ": line " + std::to_string(table.row_lines[r]) + ": " + e.what());
        }
        for (std::size_t c = 0; c < header.size(); ++c) {
          auto it = values.find(header[c]);
          ss << (c ? "," : "") << (it != values.end() ? format_double(it->second) : table.rows[r][c]);
        }
        ss << '\n';
      }
      detail::write_file(s_.out, ss.str());
      return nlohmann::json{{"experiment", experiment}, {"variables", vars}, {"rows", table.rows.size()}, {"out", s_.out}};
    });
  }

  void register_expose(CLI::App& app) {
    auto* sub = app.add_subcommand("expose", "Monte Carlo distribution of peer exposure under a design");
    input(sub, "--graph", s_.graph, "Edge-list CSV")->required();
    input(sub, "--design", s_.design, "Design JSON")->required();
    input(sub, "--baseline", s_.baseline, "Baseline design JSON for a variance-ratio check");
    sub->add_option("--kind", s_.exposure_kind, "fraction or count")->check(CLI::IsMember({"fraction", "count"}));
    output(sub, "--out", s_.out, "Per-node CSV (node,mean,var,p0,p1)")->required();
    on(sub, app, [this] {
      Graph g = detail::load_graph(s_.graph);
      Design d = detail::load_design(s_.design, g);
      if (is_edge_design(d)) throw DataError(s_.design + ": exposure needs a subject-level design");
      auto kind = s_.exposure_kind == "count" ? ExposureKind::kTreatedCount : ExposureKind::kFractionTreated;
      auto dist = exposure_distribution(d, g, replications_, salt_, threads_, kind);
      std::ostringstream ss;
      write_comment(ss, meta({{"salt", salt_}, {"R", std::to_string(replications_)}}));
      ss << "node,mean,var,p0,p1\n";
      double mean_var = 0.0;
      for (std::size_t i = 0; i < g.n(); ++i) {
        const auto& s = dist.nodes[i];
        ss << i << ',' << format_double(s.mean) << ',' << format_double(s.variance) << ',' << format_double(s.p0)
           << ',' << format_double(s.p1) << '\n';
        mean_var += s.variance;
      }
      detail::write_file(s_.out, ss.str());
      nlohmann::json res = {{"replications", replications_},
                            {"salt", salt_},
                            {"mean_variance", g.n() ? mean_var / static_cast<double>(g.n()) : 0.0},
                            {"out", s_.out}};
      if (!s_.baseline.empty()) {
        Design b = detail::load_design(s_.baseline, g);
        auto rep = overdispersion_check(d, b, g, replications_, salt_, threads_);
        res["variance_ratio"] = rep.mean_ratio ? nlohmann::json(*rep.mean_ratio) : nlohmann::json(nullptr);
        res["variance_ratio_undefined"] = rep.undefined;
      }
      return res;
    });
  }

  RandomizationOptions options() const {
    RandomizationOptions o;
    o.replications = replications_;
    o.salt = salt_;
    o.threads = threads_;
    return o;
  }

  void register_test(CLI::App& app) {
    auto* sub = app.add_subcommand("test", "Randomization test of a sharp or composite null");
    input(sub, "--graph", s_.graph, "Edge-list CSV")->required();
    input(sub, "--y", s_.y, "Outcome CSV (node,y)")->required();
    input(sub, "--z", s_.z, "Assignment CSV (unit,z)")->required();
    input(sub, "--design", s_.design, "Design JSON (not needed for --kind naive)");
    input(sub, "--d", s_.d, "Behaviour CSV (node,d) for --kind influence");
    input(sub, "--focal", s_.focal, "Focal units CSV (node column)");
    sub->add_option("--kind", s_.kind, "sharp_null, composite, conditional, influence or naive")
        ->check(CLI::IsMember({"sharp_null", "composite", "conditional", "influence", "naive"}));
    sub->add_option("--stat", s_.stat, "score, score_upper, score_lower, F or slope");
    sub->add_option("--tau0", s_.tau0, "Hypothesized direct effect");
    sub->add_option("--theta0", s_.theta0, "Hypothesized influence effect");
    sub->add_option("--tau-grid", s_.tau_grid, "Grid for the composite null (a:b:step or list)");
    sub->add_option("--focal-fraction", s_.focal_fraction, "Focal budget as a fraction of nodes");
    sub->add_option("--focal-strategy", s_.focal_strategy, "random, independent_set or provided");
    on(sub, app, [this] { return do_test(); });
  }

  nlohmann::json do_test() {
    Graph g = detail::load_graph(s_.graph);
    auto y = detail::load_column(s_.y, "y", g.n());
    auto z = detail::load_treatment(s_.z, "z", g.n());
    Statistic stat = detail::statistic_from_name(s_.stat.empty() ? "score" : s_.stat);
    auto opts = options();
    auto need_design = [&] {
      if (s_.design.empty()) throw UsageError("--design is required for --kind " + s_.kind);
      return detail::load_design(s_.design, g);
    };
    if (s_.kind == "naive") return to_json(naive_permutation_test(y, z, g, stat, opts));
    Design d = need_design();
    if (s_.kind == "sharp_null") return to_json(test_sharp_null(y, z, d, g, s_.tau0, stat, opts));
    if (s_.kind == "composite") {
      if (s_.tau_grid.empty()) throw UsageError("--tau-grid is required for --kind composite");
      auto res = test_composite_no_spillovers(y, z, d, g, detail::parse_grid(s_.tau_grid), stat, opts);
      auto j = to_json(res.result);
      j["argmax_tau"] = res.argmax_tau;
      j["tau_grid"] = res.tau_grid;
      j["grid_p_values"] = res.p_values;
      return j;
    }
    if (s_.kind == "influence") {
      if (s_.d.empty()) throw UsageError("--d is required for --kind influence");
      auto dv = detail::load_column(s_.d, "d", g.n());
      return to_json(test_influence_sharp_null(y, z, dv, d, g, s_.tau0, s_.theta0, stat, opts));
    }
    auto strategy = detail::focal_strategy_from_name(s_.focal.empty() ? s_.focal_strategy : "provided");
    std::vector<NodeId> provided;
    if (strategy == FocalStrategy::kProvided) {
      if (s_.focal.empty()) throw UsageError("--focal is required for --focal-strategy provided");
      auto table = detail::load_table(s_.focal);
      auto col = table.column("node");
      if (!col) throw DataError(s_.focal + ": needs a \"node\" column");
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto v = parse_number<NodeId>(table.rows[r][*col]);
        if (!v) throw DataError(s_.focal + ": line " + std::to_string(table.row_lines[r]) + ": invalid node id");
        provided.push_back(*v);
      }
    }
    auto sel = select_focal_units(g, s_.focal_fraction, strategy, salt_ + ".focal", provided);
    auto j = to_json(conditional_test_no_spillovers(y, z, d, g, sel.focal, stat, opts));
    j["focal_budget"] = sel.budget;
    j["focal_budget_met"] = sel.budget_met;
    return j;
  }

  void register_region(CLI::App& app) {
    auto* sub = app.add_subcommand("region", "Acceptance region over a (tau, rho) grid");
    input(sub, "--graph", s_.graph, "Edge-list CSV")->required();
    input(sub, "--y", s_.y, "Outcome CSV (node,y)")->required();
    input(sub, "--z", s_.z, "Assignment CSV (unit,z)")->required();
    input(sub, "--design", s_.design, "Design JSON")->required();
    sub->add_option("--tau-grid", s_.tau_grid, "tau grid (a:b:step or list)")->required();
    sub->add_option("--rho-grid", s_.rho_grid, "rho grid (a:b:step or list)")->required();
    sub->add_option("--stat", s_.stat, "Test statistic (default F)");
    output(sub, "--out", s_.out, "Region CSV (tau,rho,p,accepted)");
    on(sub, app, [this] {
      Statistic stat = detail::statistic_from_name(s_.stat.empty() ? "F" : s_.stat);
      auto taus = detail::parse_grid(s_.tau_grid), rhos = detail::parse_grid(s_.rho_grid);
      Graph g = detail::load_graph(s_.graph);
      auto y = detail::load_column(s_.y, "y", g.n());
      auto z = detail::load_treatment(s_.z, "z", g.n());
      Design d = detail::load_design(s_.design, g);
      auto region = acceptance_region(y, z, d, g, taus, rhos, alpha_, stat, options());
      std::ostringstream ss;
      write_comment(ss, meta({{"salt", salt_}, {"R", std::to_string(replications_)}, {"stat", stat.name()}}));
      ss << "tau,rho,p,accepted\n";
      std::size_t accepted = 0;
      for (std::size_t a = 0; a < taus.size(); ++a) {
        for (std::size_t b = 0; b < rhos.size(); ++b) {
          ss << format_double(taus[a]) << ',' << format_double(rhos[b]) << ',' << format_double(region.p[a][b]) << ','
             << (region.accepted[a][b] ? 1 : 0) << '\n';
          accepted += region.accepted[a][b];
        }
      }
      if (!s_.out.empty()) detail::write_file(s_.out, ss.str());
      return nlohmann::json{{"statistic", region.statistic}, {"alpha", alpha_},       {"replications", replications_},
                            {"salt", salt_},                 {"cells", taus.size() * rhos.size()},
                            {"accepted_cells", accepted},    {"design", design_description(d)}};
    });
  }

  StudySpec load_study() {
    auto spec = [&] {
      try {
        return parse_study_spec(detail::read_json(s_.spec));
      } catch (const Error& e) {
        throw DataError(s_.spec + ": " + e.what());
      } catch (const nlohmann::json::exception& e) {
        throw DataError(s_.spec + ": " + e.what());
      }
    }();
    if (seed_given_ || !spec.has_seed) spec.sim.master_seed = seed_;
    if (r_given_ || !spec.has_replications) spec.test.replications = replications_;
    return spec;
  }

  void register_simulate(CLI::App& app) {
    auto* sub = app.add_subcommand("simulate", "Generate one dataset from a simulation spec");
    input(sub, "--spec", s_.spec, "Simulation spec JSON")->required();
    sub->add_option("--index", s_.index, "Dataset index within the study");
    output(sub, "--out", s_.out, "Dataset CSV (node,z,d,y)")->required();
    output(sub, "--graph-out", s_.graph_out, "Edge-list CSV of the simulated graph");
    output(sub, "--design-out", s_.design_out, "Design JSON matching the dataset");
    on(sub, app, [this] {
      auto study = load_study();
      auto ds = simulate_dataset(study.sim, s_.index);
      std::ostringstream ss;
      write_comment(ss, meta({{"master_seed", std::to_string(study.sim.master_seed)},
                              {"index", std::to_string(s_.index)},
                              {"z_salt", "sim:" + std::to_string(study.sim.master_seed) + ":" + std::to_string(s_.index)}}));
      ss << "node,z,d,y\n";
      for (std::size_t i = 0; i < ds.graph.n(); ++i) {
        ss << i << ',' << static_cast<int>(ds.z[i]) << ',' << format_double(ds.d[i]) << ',' << format_double(ds.y[i])
           << '\n';
      }
      detail::write_file(s_.out, ss.str());
      if (!s_.graph_out.empty()) {
        std::ostringstream gs;
        write_edge_list(gs, ds.graph);
        detail::write_file(s_.graph_out, gs.str());
      }
      if (!s_.design_out.empty()) detail::write_file(s_.design_out, design_to_json(study.sim.design).dump(2) + "\n");
      return nlohmann::json{{"index", s_.index},
                            {"master_seed", study.sim.master_seed},
                            {"n", ds.graph.n()},
                            {"edges", ds.graph.num_edges()},
                            {"treated", ds.z.count_treated()},
                            {"out", s_.out}};
    });
  }

  void register_calibrate(CLI::App& app) {
    auto* sub = app.add_subcommand("calibrate", "Rejection rate of a test over simulated datasets");
    input(sub, "--spec", s_.spec, "Simulation spec JSON with a \"test\" section")->required();
    sub->add_option("--n-sims", s_.n_sims, "Number of simulated datasets (overrides the spec)");
    sub->add_option("--power-param", s_.power_param, "Simulation parameter to sweep");
    sub->add_option("--power-grid", s_.power_grid, "Values of the swept parameter (a:b:step or list)");
    output(sub, "--out", s_.out, "Long-format CSV of per-simulation p-values (or power points)");
    on(sub, app, [this] {
      auto study = load_study();
      std::size_t n_sims = s_.n_sims ? s_.n_sims : study.n_sims;
      nlohmann::json res;
      std::ostringstream ss;
      write_comment(ss, meta({{"master_seed", std::to_string(study.sim.master_seed)}}));
      if (!s_.power_param.empty()) {
        if (s_.power_grid.empty()) throw UsageError("--power-grid is required with --power-param");
        auto points = power_curve(study.test, study.sim, s_.power_param, detail::parse_grid(s_.power_grid), n_sims,
                                  alpha_, threads_);
        ss << "effect,rejection_rate,ci_low,ci_high\n";
        res["parameter"] = s_.power_param;
        res["points"] = nlohmann::json::array();
        for (const auto& p : points) {
          auto j = to_json(p.calibration);
          j["effect"] = p.effect;
          res["points"].push_back(j);
          ss << format_double(p.effect) << ',' << format_double(p.calibration.rejection_rate) << ','
             << format_double(p.calibration.ci_low) << ',' << format_double(p.calibration.ci_high) << '\n';
        }
      } else {
        auto cal = calibrate(study.test, study.sim, n_sims, alpha_, threads_);
        res = to_json(cal);
        ss << "sim,p\n";
        for (std::size_t s = 0; s < cal.p_values.size(); ++s) ss << s << ',' << format_double(cal.p_values[s]) << '\n';
      }
      res["test"] = test_kind_name(study.test.kind);
      res["statistic"] = study.test.statistic.name();
      res["replications"] = study.test.replications;
      res["master_seed"] = study.sim.master_seed;
      if (!s_.out.empty()) detail::write_file(s_.out, ss.str());
      return res;
    });
  }

  struct Settings {
    std::string model = "erdos_renyi";
    std::size_t n = 500;
    double p = 0.02;
    std::size_t groups = 50;
    std::size_t group_size = 10;
    std::size_t k = 2;
    std::string graph, design, baseline, out, clusters_out, program, units, experiment, exposure_kind = "fraction";
    std::string y, z, d, focal, kind = "sharp_null", stat, tau_grid, rho_grid, focal_strategy = "independent_set";
    double tau0 = 0.0, theta0 = 0.0, focal_fraction = 0.2;
    std::string spec, graph_out, design_out, power_param, power_grid;
    std::size_t index = 0, n_sims = 0;
  };

  std::ostream& out_;
  std::ostream& err_;
  unsigned threads_ = 0;
  std::size_t replications_ = 1000;
  double alpha_ = 0.05;
  std::string salt_ = "netexp";
  std::uint64_t seed_ = 1;
  bool seed_given_ = false;  // --seed and --R override spec files only when given
  bool r_given_ = false;
  std::string json_path_;
  std::string config_hash_;
  Settings s_;
  std::set<std::string> inputs_, outputs_;
  std::map<std::string, std::function<nlohmann::json()>> handlers_;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return App(out, err).run(args);
}

}  // namespace netexp::cli
