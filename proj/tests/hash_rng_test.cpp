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

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "netexp/counter_rng.hpp"
#include "netexp/hash.hpp"
#include "netexp/io.hpp"

namespace {

using netexp::hash_uniform;

TEST(HashUniform, MatchesPublishedVectors) {
  std::ifstream in(std::string(NETEXP_TEST_DATA_DIR) + "/hash_vectors.csv");
  ASSERT_TRUE(in) << "missing hash_vectors.csv";
  auto table = netexp::read_csv(in);
  auto salt = *table.column("salt"), unit = *table.column("unit");
  auto prefix = *table.column("digest_prefix"), value = *table.column("value");
  ASSERT_GE(table.rows.size(), 30u);
  for (const auto& row : table.rows) {
    auto digest = netexp::sha256(row[salt], ":", row[unit]);
    EXPECT_EQ(netexp::to_hex(digest).substr(0, 16), row[prefix]) << row[salt] << ":" << row[unit];
    double expected = std::stod(row[value]);
    EXPECT_EQ(hash_uniform(row[salt], row[unit]), expected) << row[salt] << ":" << row[unit];
  }
}

TEST(HashUniform, KnownDigest) {
  // SHA-256("abc") is the FIPS 180-2 example.
  EXPECT_EQ(netexp::to_hex(netexp::sha256("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(HashUniform, Deterministic) {
  EXPECT_EQ(hash_uniform("s", "unit-7"), hash_uniform("s", "unit-7"));
  EXPECT_EQ(hash_uniform("s", 7), hash_uniform("s", "7"));
}

TEST(HashUniform, InUnitInterval) {
  for (int i = 0; i < 10000; ++i) {
    double u = hash_uniform("range", i);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(HashUniform, MeanOfManyUnits) {
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += hash_uniform("mean-check", i);
  double mean = sum / n;
  EXPECT_GE(mean, 0.497);
  EXPECT_LE(mean, 0.503);
}

TEST(HashUniform, DistinctSaltsUncorrelated) {
  const int n = 100000;
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = hash_uniform("salt-a", i);
    b[i] = hash_uniform("salt-b", i);
  }
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 0.01);
}

TEST(HashUniform, UniformHistogram) {
  // Chi-square goodness of fit over 20 bins; critical value at 0.001 with 19 df.
  const int n = 200000, bins = 20;
  std::vector<int> count(bins, 0);
  for (int i = 0; i < n; ++i) ++count[static_cast<int>(hash_uniform("bins", i) * bins)];
  double chi2 = 0.0, expected = static_cast<double>(n) / bins;
  for (int c : count) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 43.82);
}

TEST(CounterRng, ReplayableByIndex) {
  netexp::CounterRng a(42, 1), b(42, 1), c(42, 2);
  EXPECT_EQ(a.bits(10, 0), b.bits(10, 0));
  EXPECT_NE(a.bits(10, 0), c.bits(10, 0));
  EXPECT_NE(a.bits(10, 0), a.bits(11, 0));
  EXPECT_EQ(a.normal(5), b.normal(5));
}

TEST(CounterRng, NormalMoments) {
  netexp::CounterRng rng(7, 3);
  const int n = 200000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal(i);
    s += x;
    ss += x * x;
  }
  double mean = s / n, var = ss / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(CounterRng, LogisticCdf) {
  netexp::CounterRng rng(9, 4);
  const int n = 200000;
  int below = 0;
  for (int i = 0; i < n; ++i) below += rng.logistic(i) < 2.0;
  double expected = 1.0 / (1.0 + std::exp(-2.0));
  EXPECT_NEAR(static_cast<double>(below) / n, expected, 4.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST(CounterRng, UniformOpenInterval) {
  netexp::CounterRng rng(1, 1);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform(i);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

}  // namespace
