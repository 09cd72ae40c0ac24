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

// CSV artifacts: assignments ("unit,z" / "src,dst,w"), outcomes ("node,y"),
// simulated datasets ("node,z,d,y"). Lines starting with '#' are metadata
// comments and are skipped on read.

#include <cmath>
#include <cstdint>
#include <optional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "netexp/common.hpp"
#include "netexp/graph.hpp"
#include "netexp/randomizer.hpp"

namespace netexp {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    return std::nullopt;
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::vector<std::string> fields;
    for (auto f : split(view, ',')) fields.emplace_back(trim(f));
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    table.rows.push_back(std::move(fields));
    table.row_lines.push_back(line_no);
  }
  if (!have_header) throw ParseError("missing CSV header", line_no == 0 ? 1 : line_no);
  return table;
}

// Column `value_column` indexed by the node id in the "node" or "unit" column.
inline std::vector<double> read_node_column(const CsvTable& table, std::string_view value_column, std::size_t n) {
  auto key = table.column("node");
  if (!key) key = table.column("unit");
  if (!key) throw ParseError("CSV needs a \"node\" or \"unit\" column", 1);
  auto col = table.column(value_column);
  if (!col) throw ParseError("CSV has no \"" + std::string(value_column) + "\" column", 1);
  std::vector<double> out(n, 0.0);
  std::vector<char> seen(n, 0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto node = parse_number<std::size_t>(table.rows[r][*key]);
    if (!node || *node >= n) throw ParseError("invalid node id \"" + table.rows[r][*key] + "\"", table.row_lines[r]);
    auto v = parse_number<double>(table.rows[r][*col]);
    if (!v || !std::isfinite(*v)) throw ParseError("invalid value \"" + table.rows[r][*col] + "\"", table.row_lines[r]);
    if (seen[*node]) throw ParseError("node " + std::to_string(*node) + " listed twice", table.row_lines[r]);
    seen[*node] = 1;
    out[*node] = *v;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) throw ParseError("node " + std::to_string(i) + " has no \"" + std::string(value_column) + "\" value", 1);
  }
  return out;
}

inline TreatmentVector read_treatment(const CsvTable& table, std::size_t n, std::string_view column = "z") {
  auto values = read_node_column(table, column, n);
  std::vector<std::uint8_t> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] != 0.0 && values[i] != 1.0) {
      throw ParseError("treatment of node " + std::to_string(i) + " must be 0 or 1", 1);
    }
    z[i] = static_cast<std::uint8_t>(values[i]);
  }
  return TreatmentVector(std::move(z));
}

inline void write_comment(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta) {
  if (meta.empty()) return;
  out << '#';
  for (const auto& [k, v] : meta) out << ' ' << k << '=' << v;
  out << '\n';
}

inline void write_treatment(std::ostream& out, const TreatmentVector& z,
                            const std::vector<std::pair<std::string, std::string>>& meta = {}) {
  write_comment(out, meta);
  out << "unit,z\n";
  for (std::size_t i = 0; i < z.size(); ++i) out << i << ',' << static_cast<int>(z[i]) << '\n';
}

inline void write_edge_treatment(std::ostream& out, const Graph& graph, const EdgeTreatment& w,
                                 const std::vector<std::pair<std::string, std::string>>& meta = {}) {
  write_comment(out, meta);
  out << "src,dst,w\n";
  for (std::size_t k = 0; k < graph.num_edges(); ++k) {
    out << graph.edges()[k].src << ',' << graph.edges()[k].dst << ',' << static_cast<int>(w[k]) << '\n';
  }
}

inline EdgeTreatment read_edge_treatment(const CsvTable& table, const Graph& graph) {
  auto s = table.column("src"), d = table.column("dst"), w = table.column("w");
  if (!s || !d || !w) throw ParseError("edge assignment CSV needs src,dst,w columns", 1);
  std::vector<std::uint8_t> out(graph.num_edges(), 0);
  std::vector<char> seen(graph.num_edges(), 0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto src = parse_number<NodeId>(table.rows[r][*s]);
    auto dst = parse_number<NodeId>(table.rows[r][*d]);
    auto val = parse_number<int>(table.rows[r][*w]);
    if (!src || !dst || !val || (*val != 0 && *val != 1)) throw ParseError("invalid edge assignment row", table.row_lines[r]);
    if (*src >= graph.n() || *dst >= graph.n()) throw ParseError("node id out of range", table.row_lines[r]);
    auto idx = graph.edge_index(*src, *dst);
    if (!idx) throw ParseError("edge not in graph", table.row_lines[r]);
    if (seen[*idx]) throw ParseError("edge listed twice", table.row_lines[r]);
    seen[*idx] = 1;
    out[*idx] = static_cast<std::uint8_t>(*val);
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) throw ParseError("edge " + std::to_string(k) + " has no assignment", 1);
  }
  return EdgeTreatment(std::move(out));
}

}  // namespace netexp
