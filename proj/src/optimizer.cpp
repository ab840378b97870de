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
#include "bvqo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace bvqo {

namespace {

std::string order_label(const std::vector<std::string>& order) {
  std::string out = "T(";
  for (size_t i = 0; i < order.size(); ++i) {
    if (i) out += ",";
    out += order[i];
  }
  return out + ")";
}

// The fact-to-tail walk of a single dependent chain graph.
std::vector<std::string> chain_from_fact(const JoinGraph& g,
                                         const std::string& fact) {
  std::vector<std::string> chain{fact};
  std::string prev, cur = fact;
  while (true) {
    std::string next;
    for (const JoinEdge* e : g.edges_of(cur)) {
      const std::string& o = e->other(cur);
      if (o != prev) {
        next = o;
        break;
      }
    }
    if (next.empty()) break;
    chain.push_back(next);
    prev = cur;
    cur = next;
  }
  return chain;
}

// Suffix rotation: [c[k-1], c[k], .., c.back(), c[k-2], .., c[0]].
std::vector<std::string> rotate_entry(const std::vector<std::string>& c,
                                      size_t k) {
  std::vector<std::string> out;
  for (size_t j = k - 1; j < c.size(); ++j) out.push_back(c[j]);
  for (size_t j = k - 1; j-- > 0;) out.push_back(c[j]);
  return out;
}

// True when branch bi is a dependent chain hanging off the fact: every link
// including the fact edge joins the child on its unique key.
bool chain_conforms(const JoinGraph& g, const SnowflakeShape& shape,
                    size_t bi) {
  std::string prev = shape.fact;
  for (const std::string& t : shape.branches[bi]) {
    const JoinEdge* e = g.catalog().find_edge(prev, t);
    if (!e || e->pkfk == PkFk::None || !e->key_side_is(t)) return false;
    prev = t;
  }
  return true;
}

}  // namespace

CandidateSet star_candidates(const JoinGraph& g, FilterMode mode,
                             double fp_rate) {
  if (classify(g) != ShapeKind::Star)
    throw ValidationError("star candidate set needs a star-shaped graph");
  const std::string fact = find_fact_tables(g).front();
  std::vector<std::string> dims;
  for (const Relation& r : g.catalog().relations)
    if (r.name != fact) dims.push_back(r.name);

  CandidateSet cs;
  auto add = [&](const std::vector<std::string>& order) {
    cs.plans.push_back(push_down_bitvectors(right_deep(g, order), mode, fp_rate));
    cs.labels.push_back(order_label(order));
  };
  std::vector<std::string> base{fact};
  base.insert(base.end(), dims.begin(), dims.end());
  add(base);
  for (size_t k = 0; k < dims.size(); ++k) {
    std::vector<std::string> o{dims[k], fact};
    for (size_t j = 0; j < dims.size(); ++j)
      if (j != k) o.push_back(dims[j]);
    add(o);
  }
  return cs;
}

CandidateSet branch_candidates(const JoinGraph& g, FilterMode mode,
                               double fp_rate) {
  if (classify(g) != ShapeKind::Branch)
    throw ValidationError("branch candidate set needs a single chain");
  const std::string fact = find_fact_tables(g).front();
  const std::vector<std::string> chain = chain_from_fact(g, fact);

  CandidateSet cs;
  for (size_t k = 0; k < chain.size(); ++k) {
    std::vector<std::string> o;
    for (size_t j = k; j < chain.size(); ++j) o.push_back(chain[j]);
    for (size_t j = k; j-- > 0;) o.push_back(chain[j]);
    cs.plans.push_back(push_down_bitvectors(right_deep(g, o), mode, fp_rate));
    cs.labels.push_back(order_label(o));
  }
  return cs;
}

CandidateSet snowflake_candidates(const JoinGraph& g,
                                  const SnowflakeShape& shape, FilterMode mode,
                                  double fp_rate) {
  {
    std::set<std::string> in_shape;
    for (const std::string& r : shape.relations())
      if (!in_shape.insert(r).second)
        throw ValidationError("shape lists relation '" + r + "' twice");
    for (const Relation& r : g.catalog().relations)
      if (!in_shape.count(r.name))
        throw ValidationError("shape does not cover relation '" + r.name + "'");
    for (size_t bi = 0; bi < shape.branches.size(); ++bi)
      if (!chain_conforms(g, shape, bi))
        throw ValidationError(
            "snowflake candidate set needs dependent chains off the hub");
  }

  CandidateSet cs;
  auto rest_of = [&](size_t skip) {
    std::vector<std::string> out;
    for (size_t bi = 0; bi < shape.branches.size(); ++bi) {
      if (bi == skip) continue;
      out.insert(out.end(), shape.branches[bi].begin(),
                 shape.branches[bi].end());
    }
    return out;
  };
  auto add = [&](const std::vector<std::string>& order) {
    cs.plans.push_back(push_down_bitvectors(right_deep(g, order), mode, fp_rate));
    cs.labels.push_back(order_label(order));
  };

  std::vector<std::string> base{shape.fact};
  {
    std::vector<std::string> rest = rest_of(shape.branches.size());
    base.insert(base.end(), rest.begin(), rest.end());
  }
  add(base);
  for (size_t bi = 0; bi < shape.branches.size(); ++bi) {
    const auto& c = shape.branches[bi];
    for (size_t k = 1; k <= c.size(); ++k) {
      std::vector<std::string> o = rotate_entry(c, k);
      o.push_back(shape.fact);
      std::vector<std::string> rest = rest_of(bi);
      o.insert(o.end(), rest.begin(), rest.end());
      add(o);
    }
  }
  return cs;
}

std::vector<size_t> sort_branches(const SnowflakeShape& shape,
                                  const JoinGraph& g, const SortOptions& opts) {
  std::vector<BranchGroup> groups = group_branches(shape, g);
  const Catalog& cat = g.catalog();
  // A branch's filter on the fact is cut from its whole chain, so its
  // elimination compounds every link's semijoin selectivity.
  auto elim = [&](size_t bi) {
    if (shape.branches[bi].empty()) return 0.0;
    const std::string& head = shape.branches[bi].front();
    if (!cat.find_edge(shape.fact, head)) return 0.0;
    double sel = semijoin_selectivity(cat, shape.fact, head);
    for (size_t j = 1; j < shape.branches[bi].size(); ++j) {
      const std::string& rel = shape.branches[bi][j];
      const std::string parent = shape.parent_of(rel);
      if (!cat.find_edge(parent, rel)) continue;
      sel *= semijoin_selectivity(cat, parent, rel);
    }
    return 1.0 - sel;
  };

  struct GroupKey {
    int cls = 0;
    int rank = 0;
    double elim = 0.0;
    size_t min_branch = 0;
    size_t index = 0;
  };
  std::vector<GroupKey> keys;
  for (size_t i = 0; i < groups.size(); ++i) {
    GroupKey k;
    k.cls = static_cast<int>(groups[i].priority);
    k.rank = groups[i].rank;
    k.index = i;
    k.min_branch = *std::min_element(groups[i].branches.begin(),
                                     groups[i].branches.end());
    for (size_t bi : groups[i].branches) k.elim = std::max(k.elim, elim(bi));
    keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end(), [&](const GroupKey& a, const GroupKey& b) {
    if (a.cls != b.cls) return a.cls > b.cls;
    if (a.cls == static_cast<int>(BranchPriority::P2) && a.rank != b.rank)
      return opts.larger_groups_first ? a.rank > b.rank : a.rank < b.rank;
    if (a.elim != b.elim) return a.elim > b.elim;
    return a.min_branch < b.min_branch;
  });

  std::vector<size_t> out;
  for (const GroupKey& k : keys) {
    std::vector<size_t> bs = groups[k.index].branches;
    std::sort(bs.begin(), bs.end(), [&](size_t a, size_t b) {
      const double ea = elim(a), eb = elim(b);
      return ea != eb ? ea > eb : a < b;
    });
    out.insert(out.end(), bs.begin(), bs.end());
  }
  return out;
}

Plan join_branches(const JoinGraph& g, const SnowflakeShape& shape,
                   const std::vector<size_t>& branch_order, Plan partial) {
  Plan p = std::move(partial);
  if (!p.root) {
    p = make_leaf(shape.fact);
  } else {
    const std::vector<std::string> rels = p.relations();
    if (std::find(rels.begin(), rels.end(), shape.fact) == rels.end())
      throw ValidationError("join_branches: partial plan must contain the hub");
  }
  const double hub_card =
      static_cast<double>(g.catalog().relation(shape.fact).cardinality);
  for (size_t bi : branch_order) {
    if (bi >= shape.branches.size())
      throw ValidationError("join_branches: branch index out of range");
    for (const std::string& t : shape.branches[bi]) {
      const double tcard =
          static_cast<double>(g.catalog().relation(t).cardinality);
      // Oversized tables probe instead of building, so the accumulated
      // side's filter can cut their scan.
      if (tcard > hub_card)
        p = join_plans(std::move(p), make_leaf(t), g);
      else
        p = join_plans(make_leaf(t), std::move(p), g);
    }
  }
  return p;
}

namespace {

struct StructuralCandidate {
  Plan plan;
  std::string label;
};

// The algorithmic candidate set for one shape: the sorted hub-first plan plus
// the entry rotations of every conforming chain. Unlike the theorem sets these
// use join_branches, so oversized tables get role-swapped joins.
std::vector<StructuralCandidate> structural_candidates(
    const JoinGraph& g, const SnowflakeShape& shape,
    const std::vector<size_t>& order) {
  std::vector<StructuralCandidate> out;
  out.push_back({join_branches(g, shape, order, Plan{}), "hub-first"});
  for (size_t bi : order) {
    if (!chain_conforms(g, shape, bi)) continue;
    const auto& c = shape.branches[bi];
    for (size_t k = 1; k <= c.size(); ++k) {
      std::vector<std::string> pre = rotate_entry(c, k);
      pre.push_back(shape.fact);
      Plan p = right_deep(g, pre);
      std::vector<size_t> rest;
      for (size_t q : order)
        if (q != bi) rest.push_back(q);
      p = join_branches(g, shape, rest, std::move(p));
      out.push_back({std::move(p), "entry=" + c[k - 1]});
    }
  }
  return out;
}

using Finalize = std::function<Plan(Plan)>;

OptimizeResult pick_cheapest(std::vector<StructuralCandidate> candidates,
                             CardinalityProvider& provider,
                             const Finalize& finalize) {
  OptimizeResult best;
  bool first = true;
  for (StructuralCandidate& c : candidates) {
    Plan full = finalize(std::move(c.plan));
    CostReport rep = cost_out(full, provider);
    if (first || rep.total < best.report.total) {
      best.plan = std::move(full);
      best.report = std::move(rep);
      best.label = c.label;
      first = false;
    }
  }
  if (first) throw Error("no candidate plans generated");
  return best;
}

}  // namespace

OptimizeResult optimize_snowflake(const JoinGraph& g,
                                  const SnowflakeShape& shape,
                                  CardinalityProvider& provider,
                                  const SortOptions& opts, FilterMode mode,
                                  double fp_rate) {
  const std::vector<size_t> order = sort_branches(shape, g, opts);
  auto finalize = [&](Plan p) {
    return push_down_bitvectors(p, mode, fp_rate);
  };
  return pick_cheapest(structural_candidates(g, shape, order), provider,
                       finalize);
}

namespace {

struct Cluster {
  std::string name;
  std::vector<std::string> members;  // base relations, catalog order
  Plan subplan;                      // base-level plan
  double card = 0.0;
  bool optimized = false;
  size_t min_index = 0;

  bool composite() const { return members.size() > 1; }
};

std::string cluster_col(const Cluster& c, const std::string& base_rel,
                        const std::string& col) {
  return c.composite() ? base_rel + "." + col : col;
}

// Splice every composite leaf's subplan into the cluster-level tree and remap
// predicate columns from "cluster"."member.col" back to base references.
Plan expand_clusters(const Plan& p,
                     const std::map<std::string, const Cluster*>& by_name) {
  auto fix = [&](ColumnRef& cr) {
    auto it = by_name.find(cr.rel);
    if (it == by_name.end() || !it->second->composite()) return;
    const size_t dot = cr.col.find('.');
    if (dot == std::string::npos)
      throw Error("composite column '" + cr.col + "' is not qualified");
    cr.rel = cr.col.substr(0, dot);
    cr.col = cr.col.substr(dot + 1);
  };
  std::function<std::unique_ptr<PlanNode>(const PlanNode*)> rec =
      [&](const PlanNode* n) -> std::unique_ptr<PlanNode> {
    if (n->is_leaf()) {
      auto it = by_name.find(n->relation);
      if (it != by_name.end() && it->second->composite())
        return it->second->subplan.root->clone();
      auto leaf = std::make_unique<PlanNode>();
      leaf->kind = PlanNode::Kind::Leaf;
      leaf->relation = n->relation;
      return leaf;
    }
    auto j = std::make_unique<PlanNode>();
    j->kind = PlanNode::Kind::HashJoin;
    for (JoinPred pr : n->preds) {
      fix(pr.build);
      fix(pr.probe);
      j->preds.push_back(std::move(pr));
    }
    j->build = rec(n->build.get());
    j->probe = rec(n->probe.get());
    return j;
  };
  Plan out;
  out.root = rec(p.root.get());
  assign_ids(out);
  return out;
}

}  // namespace

OptimizeResult optimize_join_graph(const JoinGraph& g,
                                   CardinalityProvider& provider,
                                   const SortOptions& opts, FilterMode mode,
                                   double fp_rate) {
  const Catalog& base = g.catalog();
  if (base.relations.empty())
    throw ValidationError("optimize: workload has no relations");
  std::map<std::string, size_t> base_index;
  for (size_t i = 0; i < base.relations.size(); ++i)
    base_index[base.relations[i].name] = i;

  std::vector<Cluster> clusters;
  for (const Relation& r : base.relations) {
    Cluster c;
    c.name = r.name;
    c.members = {r.name};
    c.subplan = make_leaf(r.name);
    c.card = provider.base_cardinality(r.name);
    c.min_index = base_index[r.name];
    clusters.push_back(std::move(c));
  }

  OptimizeResult last;
  size_t rounds = 0;
  while (!(clusters.size() == 1 && clusters.front().optimized)) {
    if (++rounds > base.relations.size() * 2 + 4)
      throw Error("optimize: cluster reduction does not converge");

    Catalog ccat;
    std::map<std::string, const Cluster*> by_name;
    std::map<std::string, std::string> owner;
    std::map<std::string, size_t> pos;
    for (size_t i = 0; i < clusters.size(); ++i) {
      const Cluster& c = clusters[i];
      by_name[c.name] = &c;
      pos[c.name] = i;
      for (const std::string& m : c.members) owner[m] = c.name;
      Relation rel;
      if (c.composite()) {
        rel.name = c.name;
        for (const std::string& m : c.members)
          for (const std::string& col : base.relation(m).columns)
            rel.columns.push_back(m + "." + col);
      } else {
        rel = base.relation(c.name);
      }
      rel.cardinality =
          static_cast<uint64_t>(std::max<long long>(0, std::llround(c.card)));
      ccat.relations.push_back(std::move(rel));
    }

    std::map<std::pair<std::string, std::string>, std::vector<const JoinEdge*>>
        grouped;
    std::vector<std::pair<std::string, std::string>> group_order;
    for (const JoinEdge& e : base.edges) {
      const std::string& cl = owner.at(e.left);
      const std::string& cr = owner.at(e.right);
      if (cl == cr) continue;
      auto key = pos[cl] < pos[cr] ? std::make_pair(cl, cr)
                                   : std::make_pair(cr, cl);
      if (!grouped.count(key)) group_order.push_back(key);
      grouped[key].push_back(&e);
    }
    for (const auto& key : group_order) {
      const Cluster& CL = *by_name.at(key.first);
      const Cluster& CR = *by_name.at(key.second);
      JoinEdge ce;
      ce.left = key.first;
      ce.right = key.second;
      for (const JoinEdge* e : grouped[key]) {
        const bool left_in_cl = owner.at(e->left) == key.first;
        const auto& lcols = left_in_cl ? e->left_cols : e->right_cols;
        const auto& rcols = left_in_cl ? e->right_cols : e->left_cols;
        const std::string& lrel = left_in_cl ? e->left : e->right;
        const std::string& rrel = left_in_cl ? e->right : e->left;
        for (const std::string& col : lcols)
          ce.left_cols.push_back(cluster_col(CL, lrel, col));
        for (const std::string& col : rcols)
          ce.right_cols.push_back(cluster_col(CR, rrel, col));
        ce.sel_lr *= left_in_cl ? e->sel_lr : e->sel_rl;
        ce.sel_rl *= left_in_cl ? e->sel_rl : e->sel_lr;
      }
      // A unique-key direction survives only while the key side is still a
      // bare relation; merged composites lose row uniqueness.
      if (grouped[key].size() == 1) {
        const JoinEdge* e = grouped[key].front();
        if (e->pkfk != PkFk::None) {
          const std::string& key_rel =
              e->pkfk == PkFk::LeftToRight ? e->right : e->left;
          if (!by_name.at(owner.at(key_rel))->composite())
            ce.pkfk = owner.at(key_rel) == key.second ? PkFk::LeftToRight
                                                      : PkFk::RightToLeft;
        }
      }
      ccat.edges.push_back(std::move(ce));
    }

    JoinGraph cg(ccat);
    std::set<std::string> done;
    for (const Cluster& c : clusters)
      if (c.optimized) done.insert(c.name);
    SnowflakeShape shape = extract_snowflake(cg, done);

    auto finalize = [&](Plan p) {
      return push_down_bitvectors(expand_clusters(p, by_name), mode, fp_rate);
    };
    OptimizeResult round =
        pick_cheapest(structural_candidates(
                          cg, shape, sort_branches(shape, cg, opts)),
                      provider, finalize);

    std::set<std::string> absorbed;
    for (const std::string& r : shape.relations()) absorbed.insert(r);
    Cluster merged;
    merged.optimized = true;
    merged.min_index = SIZE_MAX;
    std::vector<Cluster> next;
    for (Cluster& c : clusters) {
      if (!absorbed.count(c.name)) {
        next.push_back(std::move(c));
        continue;
      }
      for (const std::string& m : c.members) merged.members.push_back(m);
      merged.min_index = std::min(merged.min_index, c.min_index);
    }
    std::sort(merged.members.begin(), merged.members.end(),
              [&](const std::string& a, const std::string& b) {
                return base_index.at(a) < base_index.at(b);
              });
    for (size_t i = 0; i < merged.members.size(); ++i) {
      if (i) merged.name += "*";
      merged.name += merged.members[i];
    }
    merged.subplan = round.plan.clone();
    merged.card = round.report.per_node.at(round.plan.root->id);
    next.push_back(std::move(merged));
    std::sort(next.begin(), next.end(), [](const Cluster& a, const Cluster& b) {
      return a.min_index < b.min_index;
    });
    clusters = std::move(next);
    last = std::move(round);
  }
  return last;
}

Plan gate_bitvectors(const Plan& plan, CardinalityProvider& provider,
                     const FilterCostModel& model, double threshold) {
  elimination_breakeven(model);  // rejects unusable cost models early
  if (threshold < 0.0 || threshold >= 1.0)
    throw ValidationError("gate threshold must be in [0,1)");
  Plan out = plan.clone();
  if (out.filters.empty()) return out;

  const std::map<int, double> full = provider.plan_cardinalities(out);
  std::set<int> drops;
  for (const BitvectorFilter& f : out.filters) {
    Plan variant = out.clone();
    PlanNode* land = variant.node(f.landing);
    if (!land) throw Error("filter landing node missing");
    auto& fl = land->filters;
    fl.erase(std::remove(fl.begin(), fl.end(), f.id), fl.end());
    const std::map<int, double> without = provider.plan_cardinalities(variant);
    const double with_card = full.at(f.landing);
    const double base_card = without.at(f.landing);
    const double eliminated =
        base_card > 0.0 ? std::max(0.0, 1.0 - with_card / base_card) : 0.0;
    if (eliminated < threshold - 1e-12) drops.insert(f.id);
  }
  if (drops.empty()) return out;
  for (int fid : drops) {
    PlanNode* land = out.node(out.filter(fid)->landing);
    auto& fl = land->filters;
    fl.erase(std::remove(fl.begin(), fl.end(), fid), fl.end());
  }
  out.filters.erase(std::remove_if(out.filters.begin(), out.filters.end(),
                                   [&](const BitvectorFilter& f) {
                                     return drops.count(f.id) != 0;
                                   }),
                    out.filters.end());
  return out;
}

}  // namespace bvqo
