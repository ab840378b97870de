/*
 * Copyright (c) the bvqo authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bvqo/executor.hpp"
#include "bvqo/oracle.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bvqo;
using bvqo::tests::star_catalog;
using bvqo::tests::workload_path;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("bvqo_test_" + std::to_string(++counter));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::vector<int64_t>> sorted_rows(const ExecResult& r) {
  auto rows = r.rows;
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

TEST_CASE("table accessors and csv round-trip") {
  Table t;
  t.name = "T";
  t.columns = {"a", "b"};
  t.cells = {1, 2, 3, 4, 5, 6};
  CHECK(t.rows() == 3);
  CHECK(t.width() == 2);
  CHECK(t.at(1, 0) == 3);
  CHECK(t.col_index("b") == 1);
  CHECK_THROWS_AS(t.col_index("z"), ValidationError);

  TempDir tmp;
  std::string path = (tmp.path / "t.csv").string();
  save_table_csv(t, path);
  Table back = load_table_csv(path, "T");
  CHECK(back.columns == t.columns);
  CHECK(back.cells == t.cells);
}

TEST_CASE("csv loading survives CRLF and rejects bad cells") {
  TempDir tmp;
  std::string crlf = (tmp.path / "crlf.csv").string();
  std::ofstream(crlf) << "a,b\r\n1,2\r\n3,4\r\n";
  Table t = load_table_csv(crlf, "X");
  CHECK(t.columns == std::vector<std::string>{"a", "b"});
  CHECK(t.cells == std::vector<int64_t>{1, 2, 3, 4});

  std::string bad = (tmp.path / "bad.csv").string();
  std::ofstream(bad) << "a,b\n1,two\n";
  CHECK_THROWS_AS(load_table_csv(bad, "X"), ParseError);

  std::string ragged = (tmp.path / "ragged.csv").string();
  std::ofstream(ragged) << "a,b\n1,2\n3\n";
  CHECK_THROWS_AS(load_table_csv(ragged, "X"), ParseError);

  CHECK_THROWS_AS(load_table_csv((tmp.path / "absent.csv").string(), "X"),
                  ParseError);
}

TEST_CASE("load_table_dir needs one csv per relation") {
  Catalog c = load_catalog_file(workload_path("star3.json"));
  TempDir tmp;
  TableSet tables = generate_tables(c, 3);
  for (const auto& [name, t] : tables)
    save_table_csv(t, (tmp.path / (name + ".csv")).string());

  TableSet back = load_table_dir(tmp.path.string(), c);
  REQUIRE(back.size() == tables.size());
  for (const auto& [name, t] : tables) CHECK(back.at(name).cells == t.cells);

  fs::remove(tmp.path / "B.csv");
  CHECK_THROWS_AS(load_table_dir(tmp.path.string(), c), ParseError);
}

TEST_CASE("generated data realizes stored selectivities exactly") {
  Catalog c = load_catalog_file(workload_path("star3.json"));
  TableSet tables = generate_tables(c, 42);
  const Table& f = tables.at("F");
  REQUIRE(f.rows() == 2400);

  auto live_count = [&](const std::string& fk, uint64_t dim_card) {
    size_t col = f.col_index(fk);
    size_t n = 0;
    for (size_t r = 0; r < f.rows(); ++r) {
      int64_t v = f.at(r, col);
      if (v >= 0 && v < static_cast<int64_t>(dim_card)) ++n;
    }
    return n;
  };
  CHECK(live_count("fka", 30) == 1800);  // .75 * 2400
  CHECK(live_count("fkb", 40) == 1200);  // .50 * 2400
  CHECK(live_count("fkc", 24) == 600);   // .25 * 2400

  // Key columns enumerate 0..n-1.
  const Table& a = tables.at("A");
  std::set<int64_t> keys;
  for (size_t r = 0; r < a.rows(); ++r) keys.insert(a.at(r, a.col_index("pk")));
  CHECK(keys.size() == 30);
  CHECK(*keys.begin() == 0);
  CHECK(*keys.rbegin() == 29);

  // Same seed, same bytes; another seed differs somewhere.
  CHECK(generate_tables(c, 42).at("F").cells == f.cells);
  CHECK(generate_tables(c, 43).at("F").cells != f.cells);
}

TEST_CASE("measured selectivities match the generated fractions") {
  Catalog c = load_catalog_file(workload_path("star3.json"));
  TableSet tables = generate_tables(c, 42);
  Catalog measured = c;
  measure_edge_selectivities(measured, tables);
  CHECK(measured.find_edge("F", "A")->sel_lr == 0.75);
  CHECK(measured.find_edge("F", "B")->sel_lr == 0.5);
  CHECK(measured.find_edge("F", "C")->sel_lr == 0.25);
  for (const auto& e : measured.edges) {
    CHECK(e.sel_rl >= 0.0);
    CHECK(e.sel_rl <= 1.0);
  }
}

TEST_CASE("infeasible or contradictory statistics are rejected") {
  // 0.5 of 3 rows is not realizable within the 0.02 tolerance.
  Catalog c = star_catalog(3, {{2, 0.5}});
  CHECK_THROWS_AS(generate_tables(c, 1), ValidationError);

  // One column cannot be a unique key here and a foreign key there.
  Catalog chain = bvqo::tests::chain_catalog(100, {{10, 0.5}, {5, 0.6}});
  chain.edges[1].left_cols = {"pk"};
  CHECK_THROWS_AS(generate_tables(chain, 1), ValidationError);
}

TEST_CASE("filters never change the result, only the work") {
  Catalog c = load_catalog_file(workload_path("star3.json"));
  JoinGraph g(c);
  TableSet tables = generate_tables(c, 42);

  Plan bare = right_deep(g, {"F", "A", "B", "C"});
  Plan pushed = push_down_bitvectors(bare);
  ExecResult plain = execute(bare, tables);
  ExecResult filtered = execute(pushed, tables);

  CHECK(plain.columns == filtered.columns);
  CHECK(sorted_rows(plain) == sorted_rows(filtered));
  CHECK(filtered.metrics.result_rows == filtered.rows.size());

  // The filtered run probes with fewer tuples but pays filter checks.
  FilterCostModel m;
  CHECK(filtered.metrics.simulated_cost(m) < plain.metrics.simulated_cost(m));
  uint64_t plain_checks = 0, filtered_checks = 0;
  for (const auto& n : plain.metrics.nodes) plain_checks += n.filter_checks;
  for (const auto& n : filtered.metrics.nodes)
    filtered_checks += n.filter_checks;
  CHECK(plain_checks == 0);
  CHECK(filtered_checks > 0);

  auto breakdown = filtered.metrics.tuple_breakdown();
  uint64_t total = 0;
  for (const auto& n : filtered.metrics.nodes) total += n.output;
  CHECK(breakdown.at("Leaf") + breakdown.at("Join") == total);
}

TEST_CASE("lossy filters lose nothing from the final result") {
  Catalog c = load_catalog_file(workload_path("snowflake5.json"));
  JoinGraph g(c);
  TableSet tables = generate_tables(c, 9);
  Plan perfect = push_down_bitvectors(right_deep(g, {"F", "A1", "A2", "B1", "B2"}));
  Plan lossy = push_down_bitvectors(right_deep(g, {"F", "A1", "A2", "B1", "B2"}),
                                    FilterMode::Lossy, 0.05);
  ExecResult a = execute(perfect, tables);
  ExecResult b = execute(lossy, tables);
  CHECK(sorted_rows(a) == sorted_rows(b));
}

TEST_CASE("provider and executor agree on every node count") {
  for (const char* file :
       {"star3.json", "chain3.json", "snowflake5.json", "fig_pushdown.json"}) {
    Catalog c = load_catalog_file(workload_path(file));
    JoinGraph g(c);
    TableSet tables = generate_tables(c, 37);
    ExactProvider prov(g, tables);
    auto orders = enumerate_orders(g);
    // Two structurally different orders per workload keep this cheap.
    for (size_t idx : {size_t{0}, orders.size() / 2}) {
      Plan p = push_down_bitvectors(right_deep(g, orders[idx]));
      auto want = prov.plan_cardinalities(p);
      auto got = execute(p, tables).metrics.node_cards();
      CHECK(want == got);
    }
  }
}

TEST_CASE("filtered_rows matches a hand count") {
  Catalog c = load_catalog_file(workload_path("star3.json"));
  JoinGraph g(c);
  TableSet tables = generate_tables(c, 42);
  ExactProvider prov(g, tables);

  CHECK(prov.base_cardinality("F") == 2400.0);
  CHECK(prov.filtered_rows("F", {}).size() == 2400);
  CHECK(prov.filtered_rows("F", {{"A", {}}}).size() == 1800);

  const Table& f = tables.at("F");
  size_t want = 0;
  for (size_t r = 0; r < f.rows(); ++r)
    if (f.at(r, 0) < 30 && f.at(r, 1) < 40) ++want;  // fka and fkb live
  CHECK(prov.filtered_rows("F", {{"A", {}}, {"B", {}}}).size() == want);
  CHECK(prov.filtered_cardinality({{"F"}}, {{"A", {}}, {"B", {}}}) ==
        doctest::Approx(static_cast<double>(want)));
}

TEST_CASE("runtime bitvectors: perfect is exact, lossy never false-negative") {
  // Perfect, arity 2.
  std::vector<int64_t> tuples = {1, 2, 3, 4, 5, 6};
  RuntimeBitvector perfect =
      RuntimeBitvector::build(FilterMode::Perfect, 0.0, 2, tuples, 17);
  CHECK(perfect.arity() == 2);
  CHECK(perfect.mode() == FilterMode::Perfect);
  int64_t yes[2] = {3, 4};
  int64_t swapped[2] = {4, 3};
  int64_t no[2] = {1, 4};
  CHECK(perfect.contains(yes));
  CHECK_FALSE(perfect.contains(swapped));
  CHECK_FALSE(perfect.contains(no));

  std::vector<int64_t> flat = {1, 2, 4, 3, 5, 6, 0, 0};
  std::vector<uint8_t> mask(4, 9);
  perfect.contains_batch(flat.data(), 4, mask.data());
  CHECK(mask == std::vector<uint8_t>{1, 0, 1, 0});

  // Lossy, arity 1: every member hits; non-members rarely do.
  std::mt19937_64 rng(3);
  std::vector<int64_t> members(2000);
  for (auto& v : members) v = static_cast<int64_t>(rng() % 1000000);
  RuntimeBitvector lossy =
      RuntimeBitvector::build(FilterMode::Lossy, 0.01, 1, members, 17);
  CHECK(lossy.mode() == FilterMode::Lossy);
  std::vector<uint8_t> memb_mask(members.size());
  lossy.contains_batch(members.data(), members.size(), memb_mask.data());
  for (uint8_t m : memb_mask) REQUIRE(m == 1);

  std::set<int64_t> member_set(members.begin(), members.end());
  size_t fps = 0, probes = 0;
  for (int64_t v = 1000000; v < 1020000; ++v) {
    ++probes;
    int64_t key = v;
    if (lossy.contains(&key)) ++fps;
  }
  // Allow generous noise above the configured 1% rate.
  CHECK(static_cast<double>(fps) / static_cast<double>(probes) < 0.03);

  // Batch and single-probe paths agree.
  std::vector<int64_t> mixed(members.begin(), members.begin() + 100);
  for (int64_t v = 1000000; v < 1000100; ++v) mixed.push_back(v);
  std::vector<uint8_t> got(mixed.size());
  lossy.contains_batch(mixed.data(), mixed.size(), got.data());
  for (size_t i = 0; i < mixed.size(); ++i)
    CHECK(got[i] == (lossy.contains(&mixed[i]) ? 1 : 0));
}

TEST_CASE("materialization is capped") {
  Catalog c;
  c.relations = {{"A", 2500, {"x"}, {}}, {"B", 2500, {"y"}, {}}};
  JoinGraph g(c);
  TableSet tables = generate_tables(c, 5);
  Plan cross = right_deep(g, {"A", "B"});
  CHECK(has_cross_product(cross));
  CHECK_THROWS_AS(execute(cross, tables), LimitError);
}

TEST_CASE("snowflake data generation covers only the shape") {
  Catalog c = load_catalog_file(workload_path("snowflake5.json"));
  JoinGraph g(c);
  SnowflakeShape s = shape_around_fact(g, "F", {"F", "A1", "A2"});
  TableSet tables = generate_snowflake_data(s, c, 11);
  CHECK(tables.size() == 3);
  CHECK(tables.count("F") == 1);
  CHECK(tables.count("A1") == 1);
  CHECK(tables.count("A2") == 1);
}

TEST_CASE("break-even sweep crosses where the algebra says") {
  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(0.05 * i);
  FilterCostModel m;
  BreakevenResult r = breakeven_benchmark(20000, 512, grid, m, 42);
  REQUIRE(r.rows.size() == grid.size());

  // No elimination: the filter is pure overhead.
  CHECK(r.rows[0].eliminated == 0.0);
  CHECK(r.rows[0].cost_with > r.rows[0].cost_without);
  for (size_t i = 1; i < r.rows.size(); ++i)
    CHECK(r.rows[i].cost_with <= r.rows[i - 1].cost_with + 1e-9);
  CHECK(r.breakeven > 0.0);
  CHECK(r.breakeven < 0.3);
  CHECK(r.breakeven == doctest::Approx(elimination_breakeven(m)).epsilon(0.05));

  std::string csv = breakeven_csv(r);
  CHECK(csv.rfind("e,cost_with,cost_without,wall_with_ns,wall_without_ns\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
}
