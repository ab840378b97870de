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
#include "bvqo/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace bvqo {

namespace {

void check_model(const FilterCostModel& m) {
  if (!(m.probe_cost > 0.0))
    throw ValidationError("FilterCostModel: probe_cost must be positive");
  if (m.filter_cost < 0.0)
    throw ValidationError("FilterCostModel: filter_cost must be >= 0");
}

}  // namespace

double lambda_threshold(const FilterCostModel& m) {
  check_model(m);
  return std::clamp(1.0 - m.filter_cost / m.probe_cost, 0.0, 1.0);
}

double elimination_breakeven(const FilterCostModel& m) {
  check_model(m);
  return std::clamp(m.filter_cost / m.probe_cost, 0.0, 1.0);
}

double filter_benefit(double probe_card, double eliminated,
                      const FilterCostModel& m) {
  check_model(m);
  if (probe_card < 0.0)
    throw ValidationError("filter_benefit: negative cardinality");
  if (eliminated < 0.0 || eliminated > 1.0)
    throw ValidationError("filter_benefit: eliminated fraction out of [0,1]");
  return probe_card * (m.filter_cost - eliminated * m.probe_cost);
}

double StatisticalProvider::base_cardinality(const std::string& rel) const {
  return static_cast<double>(graph_->catalog().relation(rel).cardinality);
}

namespace {

// Join size factor for one edge: |L join R| ~= rho * |L| * |R|. Exact for
// unique-key edges (the fk side times its match fraction), a floor otherwise.
double edge_rho(const Catalog& c, const JoinEdge& e) {
  const double nl = static_cast<double>(c.relation(e.left).cardinality);
  const double nr = static_cast<double>(c.relation(e.right).cardinality);
  if (nl <= 0.0 || nr <= 0.0) return 0.0;
  return std::max(e.sel_lr * nl, e.sel_rl * nr) / (nl * nr);
}

double joint_estimate(const JoinGraph& g, const std::set<std::string>& rels) {
  double est = 1.0;
  for (const auto& r : rels) est *= static_cast<double>(g.catalog().relation(r).cardinality);
  for (const auto& e : g.catalog().edges)
    if (rels.count(e.left) && rels.count(e.right)) est *= edge_rho(g.catalog(), e);
  return est;
}

// Retained fraction of one filter on a target relation set: the product of
// stored semi-join selectivities over the distinct (target rel, source rel)
// column pairs the filter spans. Sources already inside the target are
// redundant and contribute nothing.
double retained_fraction(const JoinGraph& g, const BitvectorFilter& f,
                         const std::set<std::string>& target) {
  std::set<std::string> sources;
  for (const auto& c : f.build_cols) sources.insert(c.rel);
  bool all_inside = true;
  for (const auto& s : sources) all_inside = all_inside && target.count(s);
  if (all_inside) return 1.0;

  std::set<std::pair<std::string, std::string>> pairs;
  for (size_t i = 0; i < f.probe_cols.size(); ++i)
    pairs.insert({f.probe_cols[i].rel, f.build_cols[i].rel});
  double retained = 1.0;
  for (const auto& [trel, srel] : pairs) {
    if (target.count(srel)) continue;
    retained *= semijoin_selectivity(g.catalog(), trel, srel);
  }
  if (f.mode == FilterMode::Lossy)
    retained = retained + f.fp_rate * (1.0 - retained);
  return retained;
}

void subtree_rels(const PlanNode* n, std::set<std::string>& out) {
  if (!n) return;
  if (n->is_leaf()) {
    out.insert(n->relation);
    return;
  }
  subtree_rels(n->build.get(), out);
  subtree_rels(n->probe.get(), out);
}

void subtree_filters(const PlanNode* n, std::vector<int>& out) {
  if (!n) return;
  out.insert(out.end(), n->filters.begin(), n->filters.end());
  if (!n->is_leaf()) {
    subtree_filters(n->build.get(), out);
    subtree_filters(n->probe.get(), out);
  }
}

void estimate_nodes(const JoinGraph& g, const Plan& p, const PlanNode* n,
                    std::map<int, double>& out) {
  std::set<std::string> rels;
  subtree_rels(n, rels);
  std::vector<int> fids;
  subtree_filters(n, fids);
  double est = joint_estimate(g, rels);
  for (int fid : fids) est *= retained_fraction(g, *p.filter(fid), rels);
  out[n->id] = est;
  if (!n->is_leaf()) {
    estimate_nodes(g, p, n->build.get(), out);
    estimate_nodes(g, p, n->probe.get(), out);
  }
}

}  // namespace

std::map<int, double> StatisticalProvider::plan_cardinalities(const Plan& p) {
  if (!p.root) throw ValidationError("plan_cardinalities: empty plan");
  std::map<int, double> out;
  estimate_nodes(*graph_, p, p.root.get(), out);
  return out;
}

double StatisticalProvider::filtered_cardinality(
    const TargetSpec& target, const std::vector<FilterFrom>& filters) {
  if (target.relations.empty())
    throw ValidationError("filtered_cardinality: empty target");
  std::set<std::string> rels(target.relations.begin(), target.relations.end());
  double est = joint_estimate(*graph_, rels);
  for (const auto& f : filters) {
    if (rels.count(f.source)) continue;  // redundant: already joined in
    double retained = 1.0;
    bool touched = false;
    for (const auto& rel : target.relations) {
      if (graph_->catalog().find_edge(rel, f.source)) {
        retained *= semijoin_selectivity(graph_->catalog(), rel, f.source);
        touched = true;
      }
    }
    if (!touched)
      throw ValidationError("filtered_cardinality: no edge between target and '" +
                            f.source + "'");
    // A reduced source thins its filter in proportion to the rows it kept.
    if (!f.source_filters.empty()) {
      double base = base_cardinality(f.source);
      if (base > 0.0)
        retained *= filtered_cardinality({{f.source}}, f.source_filters) / base;
    }
    est *= retained;
  }
  return est;
}

CostReport cost_out(const Plan& p, CardinalityProvider& provider) {
  CostReport r;
  r.per_node = provider.plan_cardinalities(p);
  for (const auto& [id, card] : r.per_node) r.total += card;
  return r;
}

}  // namespace bvqo
