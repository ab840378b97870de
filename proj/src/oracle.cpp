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
#include "bvqo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "bvqo/error.hpp"
#include "bvqo/plan.hpp"
#include "bvqo/util.hpp"

namespace bvqo {

namespace {

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) out += ",";
    out += names[i];
  }
  return out;
}

std::string branches_desc(const SnowflakeShape& shape) {
  if (shape.branches.empty()) return "branches=none";
  std::string out = "branches=";
  for (size_t i = 0; i < shape.branches.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape.branches[i].size());
  }
  return out;
}

bool nearly_equal(double a, double b) {
  double tol = 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= tol;
}

}  // namespace

std::vector<std::vector<std::string>> enumerate_orders(const JoinGraph& g,
                                                       size_t cap) {
  const size_t n = g.size();
  if (n == 0) throw ValidationError("enumerate_orders: empty catalog");
  if (n > cap)
    throw LimitError("enumerate_orders: " + std::to_string(n) +
                     " relations exceed the enumeration cap of " +
                     std::to_string(cap));
  std::vector<std::string> names;
  names.reserve(n);
  for (const auto& r : g.catalog().relations) names.push_back(r.name);

  std::vector<std::vector<std::string>> out;
  std::vector<std::string> prefix;
  std::set<std::string> used;
  // Grow orders left to right; each relation after the first must join the
  // prefix, so no completed order contains a cross product.
  std::function<void()> rec = [&]() {
    if (prefix.size() == n) {
      out.push_back(prefix);
      return;
    }
    for (const auto& name : names) {
      if (used.count(name)) continue;
      if (!prefix.empty() && g.edges_between(name, used).empty()) continue;
      used.insert(name);
      prefix.push_back(name);
      rec();
      prefix.pop_back();
      used.erase(name);
    }
  };
  rec();
  return out;
}

std::string to_string(Verdict v) {
  return v == Verdict::Holds ? "holds" : "counterexample";
}

VerificationReport verify_theorem(const JoinGraph& g,
                                  CardinalityProvider& provider,
                                  const TableSet* tables, FilterMode mode,
                                  double fp_rate, size_t enumeration_cap) {
  VerificationReport rep;
  rep.kind = classify(g);
  SnowflakeShape shape = extract_snowflake(g);
  rep.shape_desc = branches_desc(shape);

  CandidateSet cands;
  switch (rep.kind) {
    case ShapeKind::Star:
      cands = star_candidates(g, mode, fp_rate);
      break;
    case ShapeKind::Branch:
      cands = branch_candidates(g, mode, fp_rate);
      break;
    case ShapeKind::Snowflake:
      cands = snowflake_candidates(g, shape, mode, fp_rate);
      break;
    case ShapeKind::General:
      throw ValidationError(
          "verify_theorem: shape must be a star, branch, or snowflake");
  }
  rep.candidate_count = cands.plans.size();

  const bool lossy = (mode == FilterMode::Lossy);
  if (lossy && tables == nullptr)
    throw ValidationError("verify_theorem: lossy mode needs tables");

  auto cost_of = [&](const Plan& p) {
    if (lossy) {
      // Bloom misses are a data effect, so lossy plans are costed by running
      // them and summing every node's output.
      ExecResult res = execute(p, *tables);
      double total = 0.0;
      for (const auto& m : res.metrics.nodes)
        total += static_cast<double>(m.output);
      return total;
    }
    return cost_out(p, provider).total;
  };

  bool cmin_set = false;
  for (size_t i = 0; i < cands.plans.size(); ++i) {
    double c = cost_of(cands.plans[i]);
    if (!cmin_set || c < rep.candidate_min) {
      rep.candidate_min = c;
      rep.candidate_best = cands.labels[i];
      cmin_set = true;
    }
    if (tables && !lossy && provider.exact()) {
      ExecResult res = execute(cands.plans[i], *tables);
      if (res.metrics.node_cards() != provider.plan_cardinalities(cands.plans[i]))
        rep.crosscheck_ok = false;
    }
  }

  auto orders = enumerate_orders(g, enumeration_cap);
  rep.enumerated = orders.size();
  bool gmin_set = false;
  std::vector<double> po_costs;
  for (const auto& order : orders) {
    Plan p = push_down_bitvectors(right_deep(g, order), mode, fp_rate);
    double c = cost_of(p);
    if (!gmin_set || c < rep.global_min) {
      rep.global_min = c;
      rep.global_best = join_names(order);
      gmin_set = true;
    }
    if (!lossy && order.front() == shape.fact && is_partially_ordered(p, shape))
      po_costs.push_back(c);
  }

  rep.equal_cost_class = po_costs.size();
  for (double c : po_costs)
    if (!nearly_equal(c, po_costs.front())) rep.equal_cost_ok = false;

  bool contains_min =
      cmin_set && gmin_set &&
      (rep.candidate_min <= rep.global_min ||
       nearly_equal(rep.candidate_min, rep.global_min));
  rep.verdict = (contains_min && rep.equal_cost_ok && rep.crosscheck_ok)
                    ? Verdict::Holds
                    : Verdict::Counterexample;
  return rep;
}

GeneratedWorkload random_snowflake_workload(
    const std::vector<int>& branch_lengths, uint64_t seed) {
  if (branch_lengths.empty())
    throw ValidationError("random_snowflake_workload: need at least one branch");
  for (int len : branch_lengths)
    if (len < 1)
      throw ValidationError(
          "random_snowflake_workload: branch lengths must be positive");

  std::mt19937_64 rng(seed);
  Catalog cat;

  Relation fact;
  fact.name = "F";
  fact.cardinality = 120 + rng() % 241;
  for (size_t b = 0; b < branch_lengths.size(); ++b)
    fact.columns.push_back("fk" + std::to_string(b + 1));
  fact.columns.push_back("pay");
  cat.relations.push_back(fact);

  // Selectivities are exact fractions m/rows so the generator can realize
  // them without rounding drift.
  auto pick_sel = [&rng](uint64_t parent_rows) {
    uint64_t pct = 30 + rng() % 71;
    auto m = static_cast<uint64_t>(
        std::llround(static_cast<double>(parent_rows) * pct / 100.0));
    m = std::max<uint64_t>(1, std::min(m, parent_rows));
    return static_cast<double>(m) / static_cast<double>(parent_rows);
  };

  for (size_t b = 0; b < branch_lengths.size(); ++b) {
    std::string prev = "F";
    std::string prev_fk = "fk" + std::to_string(b + 1);
    uint64_t prev_rows = fact.cardinality;
    for (int j = 1; j <= branch_lengths[b]; ++j) {
      Relation d;
      d.name = "D" + std::to_string(b + 1) + std::to_string(j);
      d.cardinality = 4 + rng() % 21;
      d.columns = {"pk"};
      if (j < branch_lengths[b]) d.columns.push_back("fk");
      d.key_columns = {"pk"};
      cat.relations.push_back(d);

      JoinEdge e;
      e.left = prev;
      e.right = d.name;
      e.left_cols = {prev_fk};
      e.right_cols = {"pk"};
      e.pkfk = PkFk::LeftToRight;
      e.sel_lr = pick_sel(prev_rows);
      e.sel_rl = 1.0;
      cat.edges.push_back(e);

      prev = d.name;
      prev_fk = "fk";
      prev_rows = d.cardinality;
    }
  }

  GeneratedWorkload wl;
  wl.tables = generate_tables(cat, hash_combine(seed, 0x6f7261636c65ull));
  measure_edge_selectivities(cat, wl.tables);
  wl.catalog = std::move(cat);
  wl.seed = seed;
  wl.desc = "branches=";
  for (size_t b = 0; b < branch_lengths.size(); ++b) {
    if (b) wl.desc += ",";
    wl.desc += std::to_string(branch_lengths[b]);
  }
  return wl;
}

std::vector<std::vector<int>> chain_partitions(int total_dims) {
  std::vector<std::vector<int>> out;
  if (total_dims <= 0) return out;
  std::vector<int> cur;
  std::function<void(int, int)> rec = [&](int rest, int max_part) {
    if (rest == 0) {
      out.push_back(cur);
      return;
    }
    for (int p = std::min(rest, max_part); p >= 1; --p) {
      cur.push_back(p);
      rec(rest - p, p);
      cur.pop_back();
    }
  };
  rec(total_dims, total_dims);
  return out;
}

}  // namespace bvqo
