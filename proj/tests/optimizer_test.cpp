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
#include <set>
#include <string>
#include <vector>

#include "bvqo/executor.hpp"
#include "bvqo/optimizer.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bvqo;
using bvqo::tests::star_catalog;
using bvqo::tests::workload_path;

TEST_CASE("star candidates: hub-rightmost plus one rotation per dimension") {
  Catalog c = load_catalog_file(workload_path("star3.json"));
  JoinGraph g(c);
  CandidateSet cs = star_candidates(g);
  REQUIRE(cs.plans.size() == 4);  // n + 1
  REQUIRE(cs.labels.size() == 4);

  std::set<std::string> first_leaves;
  for (const auto& p : cs.plans) {
    CHECK_FALSE(has_cross_product(p));
    CHECK(p.leaf_order().size() == 4);
    CHECK(p.filters.size() == 3);  // push-down already applied
    first_leaves.insert(p.leaf_order().front());
  }
  CHECK(first_leaves == std::set<std::string>{"F", "A", "B", "C"});
  CHECK(cs.plans[0].leaf_order().front() == "F");
}

TEST_CASE("branch candidates: suffix rotations of the chain") {
  Catalog c = load_catalog_file(workload_path("chain3.json"));
  JoinGraph g(c);
  CandidateSet cs = branch_candidates(g);
  REQUIRE(cs.plans.size() == 3);  // n + 1 for a 2-link chain

  std::set<std::vector<std::string>> orders;
  for (const auto& p : cs.plans) orders.insert(p.leaf_order());
  CHECK(orders == std::set<std::vector<std::string>>{
                      {"F", "D1", "D2"}, {"D1", "D2", "F"}, {"D2", "D1", "F"}});

  Catalog single = load_catalog_file(workload_path("singleton.json"));
  JoinGraph sg(single);
  CHECK(branch_candidates(sg).plans.size() == 1);
}

TEST_CASE("snowflake candidates: one entry rotation per chain table") {
  Catalog c = load_catalog_file(workload_path("snowflake5.json"));
  JoinGraph g(c);
  SnowflakeShape s = extract_snowflake(g);
  CandidateSet cs = snowflake_candidates(g, s);
  REQUIRE(cs.plans.size() == 5);  // 1 + (2 + 2)

  CHECK(cs.plans[0].leaf_order().front() == "F");
  std::multiset<std::string> entries;
  for (const auto& p : cs.plans) {
    entries.insert(p.leaf_order().front());
    CHECK_FALSE(has_cross_product(p));
    // Every candidate is pure right-deep: each build side is a leaf.
    for (const PlanNode* n = p.root.get(); !n->is_leaf(); n = n->probe.get())
      CHECK(n->build->is_leaf());
  }
  CHECK(entries ==
        std::multiset<std::string>{"F", "A1", "A2", "B1", "B2"});
}

TEST_CASE("sort_branches ranks by compound chain elimination") {
  Catalog c = load_catalog_file(workload_path("snowflake5.json"));
  JoinGraph g(c);
  SnowflakeShape s = extract_snowflake(g);
  // Chain A keeps .75*.5, chain B keeps .5*.5; B eliminates more.
  std::vector<size_t> order = sort_branches(s, g);
  REQUIRE(order.size() == 2);
  CHECK(s.branches[order[0]].front() == "B1");
  CHECK(s.branches[order[1]].front() == "A1");

  // A deep selective chain beats a head with a better single edge.
  Catalog c9 = load_catalog_file(workload_path("compare/q09_snow31.json"));
  JoinGraph g9(c9);
  SnowflakeShape s9 = extract_snowflake(g9);
  std::vector<size_t> o9 = sort_branches(s9, g9);
  REQUIRE(o9.size() == 2);
  CHECK(s9.branches[o9[0]].front() == "C1");  // 1-.6*.8*.5 > 1-.5
  CHECK(s9.branches[o9[1]].front() == "E");
}

TEST_CASE("oversized tables sort first and join with roles swapped") {
  Catalog c = star_catalog(600, {{2400, 1.0}, {15, 0.4}});
  JoinGraph g(c);
  SnowflakeShape s = extract_snowflake(g);
  std::vector<size_t> order = sort_branches(s, g);
  REQUIRE(order.size() == 2);
  CHECK(s.branches[order[0]].front() == "D1");  // P3 before P1

  Plan p = join_branches(g, s, order, make_leaf("F"));
  CHECK(p.leaf_order() == std::vector<std::string>{"D1", "F", "D2"});
  // The oversized table probes; the accumulated plan feeds the build side.
  const PlanNode* lower = p.root->probe.get();
  REQUIRE_FALSE(lower->is_leaf());
  CHECK(lower->probe->relation == "D1");
  CHECK(lower->build->relation == "F");
  CHECK(p.root->build->relation == "D2");
}

TEST_CASE("residual-connected groups stay adjacent and can be reordered") {
  Catalog c = load_catalog_file(workload_path("compare/q06_resid.json"));
  JoinGraph g(c);
  SnowflakeShape s = extract_snowflake(g);
  REQUIRE(s.branches.size() == 2);
  std::vector<size_t> order = sort_branches(s, g);
  CHECK(order.size() == 2);  // one P2 group holding both branches

  // Flipping group ordering only permutes whole groups, so a single group
  // is unaffected.
  SortOptions flipped;
  flipped.larger_groups_first = false;
  CHECK(sort_branches(s, g, flipped) == order);
}

TEST_CASE("optimize_snowflake returns the cheapest candidate, first on ties") {
  Catalog c = load_catalog_file(workload_path("snowflake5.json"));
  JoinGraph g(c);
  SnowflakeShape s = extract_snowflake(g);
  StatisticalProvider prov(g);

  OptimizeResult best = optimize_snowflake(g, s, prov);
  CandidateSet cs = snowflake_candidates(g, s);
  double min_cost = 1e300;
  for (auto& p : cs.plans)
    min_cost = std::min(min_cost, cost_out(p, prov).total);
  CHECK(best.report.total == doctest::Approx(min_cost));
  CHECK_FALSE(best.label.empty());

  // All-equal costs keep generation order: the hub-rightmost plan.
  Catalog flat = star_catalog(100, {{10, 1.0}, {10, 1.0}});
  JoinGraph fg(flat);
  SnowflakeShape fs = extract_snowflake(fg);
  StatisticalProvider fprov(fg);
  OptimizeResult tie = optimize_snowflake(fg, fs, fprov);
  CHECK(tie.plan.leaf_order().front() == "F");
}

TEST_CASE("optimize_join_graph covers general graphs via clustering") {
  for (const char* file :
       {"fig_pushdown.json", "compare/q06_resid.json",
        "compare/q07_multifact.json"}) {
    Catalog c = load_catalog_file(workload_path(file));
    JoinGraph g(c);
    StatisticalProvider prov(g);
    OptimizeResult r = optimize_join_graph(g, prov);
    REQUIRE(r.plan.root != nullptr);
    auto rels = r.plan.leaf_order();
    CHECK(rels.size() == c.relations.size());
    CHECK_FALSE(has_cross_product(r.plan));
    CHECK(r.report.total > 0.0);
  }
}

TEST_CASE("clustered plans execute to the same rows as a baseline") {
  Catalog c = load_catalog_file(workload_path("compare/q07_multifact.json"));
  JoinGraph g(c);
  TableSet tables = generate_tables(c, 77);
  ExactProvider prov(g, tables);

  OptimizeResult r = optimize_join_graph(g, prov);
  ExecResult aware = execute(r.plan, tables);

  Plan base = push_down_bitvectors(right_deep(g, {"F2", "D", "F1"}));
  ExecResult want = execute(base, tables);
  CHECK(aware.metrics.result_rows == want.metrics.result_rows);
}

TEST_CASE("gate_bitvectors drops only filters below the threshold") {
  Catalog c = load_catalog_file(workload_path("compare/q10_gate.json"));
  JoinGraph g(c);
  TableSet tables = generate_tables(c, 42);
  ExactProvider prov(g, tables);
  FilterCostModel model;

  Plan full = push_down_bitvectors(right_deep(g, {"F", "N", "M"}));
  REQUIRE(full.filters.size() == 2);
  Plan gated = gate_bitvectors(full, prov, model, 0.05);

  // N joins every hub row (no elimination); M removes half. Surviving
  // filters keep their original ids.
  REQUIRE(gated.filters.size() == 1);
  CHECK(gated.filters[0].build_label == "M");
  const PlanNode* landing = gated.node(gated.filters[0].landing);
  REQUIRE(landing != nullptr);
  CHECK(landing->filters == std::vector<int>{gated.filters[0].id});
  // No node still references the dropped filter.
  for (int id = 0;; ++id) {
    const PlanNode* n = gated.node(id);
    if (!n) break;
    for (int f : n->filters) CHECK(gated.filter(f) != nullptr);
  }

  // Threshold at the exact elimination keeps the filter.
  Plan exact_keep = gate_bitvectors(full, prov, model, 0.5);
  bool kept_m = false;
  for (const auto& f : exact_keep.filters) kept_m |= f.build_label == "M";
  CHECK(kept_m);

  CHECK_THROWS_AS(gate_bitvectors(full, prov, model, -0.1), ValidationError);
  CHECK_THROWS_AS(gate_bitvectors(full, prov, model, 1.5), ValidationError);
}

TEST_CASE("gating keeps executed results identical") {
  Catalog c = load_catalog_file(workload_path("compare/q10_gate.json"));
  JoinGraph g(c);
  TableSet tables = generate_tables(c, 42);
  ExactProvider prov(g, tables);

  Plan full = push_down_bitvectors(right_deep(g, {"F", "N", "M"}));
  Plan gated = gate_bitvectors(full, prov, FilterCostModel{}, 0.05);
  ExecResult a = execute(full, tables);
  ExecResult b = execute(gated, tables);
  CHECK(a.rows == b.rows);
  // Dropping the useless filter saves its checks.
  CHECK(b.metrics.simulated_cost(FilterCostModel{}) <
        a.metrics.simulated_cost(FilterCostModel{}));
}
