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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli_app.hpp"

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("netexp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
  }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static netexp::CsvTable read_table(const std::string& p) {
    std::istringstream in(read(p));
    return netexp::read_csv(in);
  }

  static Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = netexp::cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

  static nlohmann::json results(const Outcome& o) { return nlohmann::json::parse(o.out)["results"]; }

  fs::path dir_;
};

TEST_F(CliTest, AssignIsByteIdentical) {
  ASSERT_EQ(run({"gen-graph", "--model", "erdos_renyi", "--n", "200", "--p", "0.03", "--out", path("g.csv")}).code, 0);
  write("design.json", R"({"type": "iid_bernoulli", "p": 0.3})");
  auto a = run({"--salt", "exp1", "assign", "--graph", path("g.csv"), "--design", path("design.json"), "--out",
                path("z1.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  const std::string first = read(path("z1.csv"));
  auto b = run({"--salt", "exp1", "assign", "--graph", path("g.csv"), "--design", path("design.json"), "--out",
                path("z1.csv")});
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(first, read(path("z1.csv")));
  auto c = run({"--salt", "exp2", "assign", "--graph", path("g.csv"), "--design", path("design.json"), "--out",
                path("z3.csv")});
  EXPECT_NE(read(path("z1.csv")), read(path("z3.csv")));
  EXPECT_NE(nlohmann::json::parse(a.out)["config_hash"], nlohmann::json::parse(c.out)["config_hash"]);
  EXPECT_EQ(nlohmann::json::parse(a.out)["command"], "assign");
}

TEST_F(CliTest, GraphPartitionDesignAssignPipeline) {
  auto gen = run({"gen-graph", "--model", "cliques", "--groups", "12", "--group-size", "5", "--out", path("g.csv"),
                  "--clusters-out", path("cliques.csv")});
  ASSERT_EQ(gen.code, 0) << gen.err;
  EXPECT_EQ(results(gen)["edges"], 120);
  auto part = run({"partition", "--graph", path("g.csv"), "--k", "12", "--out", path("clusters.csv")});
  ASSERT_EQ(part.code, 0) << part.err;
  EXPECT_EQ(results(part)["k"], 12);
  EXPECT_EQ(results(part)["cut_fraction"], 0.0);
  write("design.json", R"({"type": "cluster_bernoulli", "p": 0.5, "clusters_file": "clusters.csv"})");
  auto as = run({"assign", "--graph", path("g.csv"), "--design", path("design.json"), "--out", path("z.csv")});
  ASSERT_EQ(as.code, 0) << as.err;
  auto table = read_table(path("z.csv"));
  auto z = netexp::read_treatment(table, 60, "z");
  for (std::size_t c = 0; c < 12; ++c) {
    for (std::size_t k = 1; k < 5; ++k) EXPECT_EQ(z[c * 5 + k], z[c * 5]);
  }
  write("two_stage.json", R"({"type": "two_stage_uniform", "clusters_file": "cliques.csv"})");
  write("iid.json", R"({"type": "iid_bernoulli", "p": 0.5})");
  auto ex = run({"--R", "4000", "expose", "--graph", path("g.csv"), "--design", path("two_stage.json"), "--baseline",
                 path("iid.json"), "--out", path("exp.csv")});
  ASSERT_EQ(ex.code, 0) << ex.err;
  // Degree 4: (1/12 + 1/24) / (1/16) = 2.
  EXPECT_NEAR(results(ex)["variance_ratio"].get<double>(), 2.0, 0.2);
  EXPECT_NE(read(path("exp.csv")).find("node,mean,var,p0,p1\n"), std::string::npos);
}

TEST_F(CliTest, EdgeDesignAssign) {
  write("g.csv", "# n=4 directed=1\nsrc,dst\n0,1\n0,2\n3,1\n");
  write("design.json", R"({"type": "sender_clustered", "p": 0.5})");
  auto as = run({"assign", "--graph", path("g.csv"), "--design", path("design.json"), "--out", path("w.csv")});
  ASSERT_EQ(as.code, 0) << as.err;
  EXPECT_EQ(results(as)["units"], 3);
  auto text = read(path("w.csv"));
  EXPECT_NE(text.find("src,dst,w"), std::string::npos);
}

TEST_F(CliTest, SimulateThenTestAndRegion) {
  write("spec.json", R"({"graph": {"model": "erdos_renyi", "n": 150, "p": 0.04},
                         "design": {"type": "iid_bernoulli", "p": 0.5},
                         "params": {"tau": 1.0, "rho": 0.0}, "master_seed": 9})");
  std::vector<std::string> sim_args{"simulate",    "--spec", path("spec.json"), "--index", "2", "--out",
                                    path("d1.csv"), "--graph-out", path("g.csv"), "--design-out",
                                    path("design.json")};
  auto s1 = run(sim_args);
  ASSERT_EQ(s1.code, 0) << s1.err;
  const std::string first = read(path("d1.csv"));
  auto s2 = run(sim_args);
  EXPECT_EQ(first, read(path("d1.csv")));
  EXPECT_EQ(s1.out, s2.out);
  EXPECT_NE(read(path("d1.csv")).find("node,z,d,y\n"), std::string::npos);

  std::vector<std::string> test_args{"--R",       "99",          "--salt", "t",   "test",     "--graph",
                                     path("g.csv"), "--y",       path("d1.csv"), "--z", path("d1.csv"), "--design",
                                     path("design.json"), "--tau0", "1"};
  auto t1 = run(test_args);
  ASSERT_EQ(t1.code, 0) << t1.err;
  auto t2 = run(test_args);
  EXPECT_EQ(t1.out, t2.out);
  auto r = results(t1);
  EXPECT_EQ(r["test"], "sharp_null");
  EXPECT_GE(r["p_value"].get<double>(), 0.01);
  EXPECT_EQ(r["replications"], 99);

  auto with_threads = test_args;
  with_threads.insert(with_threads.begin(), {"--threads", "3"});
  EXPECT_EQ(run(with_threads).out, t1.out);

  auto reg = run({"--R", "49", "region", "--graph", path("g.csv"), "--y", path("d1.csv"), "--z", path("d1.csv"),
                  "--design", path("design.json"), "--tau-grid", "0:2:1", "--rho-grid", "0,1", "--out",
                  path("region.csv")});
  ASSERT_EQ(reg.code, 0) << reg.err;
  EXPECT_EQ(results(reg)["cells"], 6);
  auto region = read(path("region.csv"));
  EXPECT_NE(region.find("tau,rho,p,accepted\n"), std::string::npos);
  EXPECT_EQ(std::count(region.begin(), region.end(), '\n'), 8);

  for (const char* kind : {"composite", "conditional", "influence", "naive"}) {
    std::vector<std::string> args{"--R", "49", "test", "--graph", path("g.csv"), "--y", path("d1.csv"), "--z",
                                  path("d1.csv"), "--design", path("design.json"), "--kind", kind, "--tau-grid",
                                  "0:2:0.5", "--d", path("d1.csv")};
    auto o = run(args);
    EXPECT_EQ(o.code, 0) << kind << ": " << o.err;
  }
}

TEST_F(CliTest, CalibrateAndPowerCurve) {
  write("spec.json", R"({"graph": {"model": "erdos_renyi", "n": 60, "p": 0.08},
                         "params": {"tau": 1.0}, "master_seed": 3,
                         "test": {"kind": "sharp_null", "tau0": 1.0, "replications": 19}, "n_sims": 100})");
  auto c = run({"calibrate", "--spec", path("spec.json"), "--out", path("cal.csv")});
  ASSERT_EQ(c.code, 0) << c.err;
  auto r = results(c);
  EXPECT_EQ(r["n_sims"], 100);
  EXPECT_EQ(r["replications"], 19);
  EXPECT_LE(r["ci_low"].get<double>(), r["rejection_rate"].get<double>());
  auto again = run({"calibrate", "--spec", path("spec.json"), "--out", path("cal2.csv")});
  EXPECT_EQ(read(path("cal.csv")), read(path("cal2.csv")));
  auto pc = run({"calibrate", "--spec", path("spec.json"), "--power-param", "rho", "--power-grid", "0,4", "--out",
                 path("power.csv")});
  ASSERT_EQ(pc.code, 0) << pc.err;
  EXPECT_EQ(results(pc)["points"].size(), 2u);
  EXPECT_NE(read(path("power.csv")).find("effect,rejection_rate,ci_low,ci_high\n"), std::string::npos);
  auto overridden = run({"--R", "9", "calibrate", "--spec", path("spec.json")});
  EXPECT_EQ(results(overridden)["replications"], 9);
}

TEST_F(CliTest, DslRun) {
  write("program.planout", "smoking_program = uniformChoice(choices=[0,1], unit=subject_id);\n");
  std::string units = "subject_id,subject_group_id\n";
  for (int i = 0; i < 50; ++i) units += std::to_string(i) + "," + std::to_string(i / 10) + "\n";
  write("units.csv", units);
  auto o = run({"dsl-run", "--program", path("program.planout"), "--units", path("units.csv"), "--experiment",
                "smoking", "--out", path("out.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  auto table = read_table(path("out.csv"));
  auto col = table.column("smoking_program");
  ASSERT_TRUE(col);
  ASSERT_EQ(table.rows.size(), 50u);
  for (auto& row : table.rows) EXPECT_TRUE(row[*col] == "0" || row[*col] == "1");
  for (std::size_t r = 0; r < 50; ++r) {
    auto v = netexp::dsl::evaluate(netexp::dsl::parse(read(path("program.planout"))), "smoking",
                                   {{"subject_id", std::to_string(r)}});
    EXPECT_EQ(std::stod(table.rows[r][*col]), v["smoking_program"]);
  }

  write("full.planout", read(std::string(NETEXP_TEST_DATA_DIR) + "/listing_full.planout"));
  EXPECT_EQ(run({"dsl-run", "--program", path("full.planout"), "--units", path("units.csv"), "--out",
                 path("full.csv")})
                .code,
            0);

  write("bad.planout", "x = uniformChoice(choices=[0,1], unit=subject_id);\ny = mystery(unit=subject_id);\n");
  auto bad = run({"dsl-run", "--program", path("bad.planout"), "--units", path("units.csv"), "--out",
                  path("bad.csv")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find(path("bad.planout")), std::string::npos);
  EXPECT_NE(bad.err.find("line 2, column 5"), std::string::npos) << bad.err;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"assign", "--graph", path("missing.csv")}).code, 1);
  write("design.json", R"({"type": "iid_bernoulli", "p": 0.5})");
  auto missing = run({"assign", "--graph", path("missing.csv"), "--design", path("design.json"), "--out",
                      path("z.csv")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("missing.csv"), std::string::npos);

  write("g.csv", "0,1\n1,x\n");
  auto malformed = run({"assign", "--graph", path("g.csv"), "--design", path("design.json"), "--out", path("z.csv")});
  EXPECT_EQ(malformed.code, 2);
  EXPECT_NE(malformed.err.find("line 2"), std::string::npos) << malformed.err;

  write("g2.csv", "0,1\n1,2\n");
  write("bad_design.json", R"({"type": "iid_bernoulli", "p": 1.5})");
  EXPECT_EQ(run({"assign", "--graph", path("g2.csv"), "--design", path("bad_design.json"), "--out", path("z.csv")})
                .code,
            2);
  EXPECT_EQ(run({"--R", "0", "assign", "--graph", path("g2.csv"), "--design", path("design.json"), "--out",
                 path("z.csv")})
                .code,
            1);
  EXPECT_EQ(run({"region", "--graph", path("g2.csv"), "--y", path("g2.csv"), "--z", path("g2.csv"), "--design",
                 path("design.json"), "--tau-grid", "2:1:1", "--rho-grid", "0"})
                .code,
            1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, JsonOutputPath) {
  ASSERT_EQ(run({"gen-graph", "--n", "20", "--p", "0.2", "--out", path("g.csv")}).code, 0);
  auto o = run({"--json", path("env.json"), "partition", "--graph", path("g.csv"), "--k", "3", "--out",
                path("c.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(o.out.empty());
  auto env = nlohmann::json::parse(read(path("env.json")));
  EXPECT_EQ(env["command"], "partition");
  EXPECT_EQ(env["config_hash"].get<std::string>().size(), 16u);
}

}  // namespace
