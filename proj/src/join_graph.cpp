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
#include "bvqo/join_graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace bvqo {

JoinGraph::JoinGraph(const Catalog& c) : catalog_(&c) {
  for (const auto& r : c.relations) adj_.emplace_back(r.name, std::vector<const JoinEdge*>{});
  for (const auto& e : c.edges) {
    for (auto& [name, list] : adj_)
      if (e.touches(name)) list.push_back(&e);
  }
}

const std::vector<const JoinEdge*>& JoinGraph::edges_of(
    const std::string& rel) const {
  for (const auto& [name, list] : adj_)
    if (name == rel) return list;
  throw ValidationError("unknown relation '" + rel + "'");
}

std::vector<const JoinEdge*> JoinGraph::edges_between(
    const std::string& rel, const std::set<std::string>& others) const {
  std::vector<const JoinEdge*> out;
  for (const JoinEdge* e : edges_of(rel))
    if (others.count(e->other(rel))) out.push_back(e);
  return out;
}

bool JoinGraph::connected() const {
  if (adj_.empty()) return true;
  std::set<std::string> seen{adj_.front().first};
  std::vector<std::string> work{adj_.front().first};
  while (!work.empty()) {
    std::string cur = work.back();
    work.pop_back();
    for (const JoinEdge* e : edges_of(cur)) {
      const std::string& nxt = e->other(cur);
      if (seen.insert(nxt).second) work.push_back(nxt);
    }
  }
  return seen.size() == adj_.size();
}

std::string to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::Star: return "star";
    case ShapeKind::Branch: return "branch";
    case ShapeKind::Snowflake: return "snowflake";
    case ShapeKind::General: return "general";
  }
  return "general";
}

std::vector<std::string> SnowflakeShape::relations() const {
  std::vector<std::string> out{fact};
  for (const auto& b : branches) out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::string SnowflakeShape::parent_of(const std::string& rel) const {
  for (const auto& b : branches) {
    for (size_t i = 0; i < b.size(); ++i) {
      if (b[i] != rel) continue;
      return i == 0 ? fact : b[i - 1];
    }
  }
  throw ValidationError("relation '" + rel + "' is not a chain member");
}

std::vector<std::string> find_fact_tables(const JoinGraph& g) {
  std::vector<std::string> out;
  for (const auto& r : g.catalog().relations) {
    bool keyed = false;
    for (const JoinEdge* e : g.edges_of(r.name))
      keyed = keyed || e->key_side_is(r.name);
    if (!keyed) out.push_back(r.name);
  }
  std::stable_sort(out.begin(), out.end(),
                   [&](const std::string& a, const std::string& b) {
                     auto ca = g.catalog().relation(a).cardinality;
                     auto cb = g.catalog().relation(b).cardinality;
                     return ca != cb ? ca < cb : a < b;
                   });
  return out;
}

ShapeKind classify(const JoinGraph& g) {
  if (g.size() == 0) throw ValidationError("empty join graph");
  if (g.size() == 1) return ShapeKind::Branch;

  std::vector<std::string> facts = find_fact_tables(g);
  if (facts.size() != 1) return ShapeKind::General;
  const std::string& fact = facts.front();

  for (const auto& e : g.catalog().edges)
    if (e.pkfk == PkFk::None) return ShapeKind::General;
  if (g.catalog().edges.size() != g.size() - 1 || !g.connected())
    return ShapeKind::General;

  // Walk outward from the hub; every non-hub node must have at most one
  // dependent, so branches are chains.
  size_t hub_children = 0;
  for (const auto& r : g.catalog().relations) {
    size_t children = 0;
    for (const JoinEdge* e : g.edges_of(r.name))
      if (e->key_side_is(e->other(r.name))) ++children;
    if (r.name == fact) {
      hub_children = children;
    } else if (children > 1) {
      return ShapeKind::General;
    }
  }
  if (hub_children == 0) return ShapeKind::General;  // orientation inward

  bool all_spokes = true;
  for (const JoinEdge* e : g.edges_of(fact)) {
    const std::string& head = e->other(fact);
    for (const JoinEdge* he : g.edges_of(head))
      if (he->key_side_is(he->other(head))) all_spokes = false;
  }
  if (all_spokes && g.catalog().edges.size() == g.size() - 1 &&
      g.edges_of(fact).size() == g.size() - 1)
    return ShapeKind::Star;
  if (hub_children == 1) return ShapeKind::Branch;
  return ShapeKind::Snowflake;
}

namespace {

// Eliminated fraction the child's filter achieves on the parent side.
double edge_elimination(const JoinEdge& e, const std::string& parent) {
  return 1.0 - (e.left == parent ? e.sel_lr : e.sel_rl);
}

// Depth-first linearization of the unique-key successor tree under `head`.
// Children sort by descending elimination on their parent, name ascending.
void linearize(const JoinGraph& g, const std::string& head,
               const std::set<std::string>& members,
               std::set<std::string>& covered, std::vector<std::string>& out,
               std::set<std::pair<std::string, std::string>>& structural) {
  out.push_back(head);
  covered.insert(head);
  std::vector<std::pair<const JoinEdge*, std::string>> kids;
  for (const JoinEdge* e : g.edges_of(head)) {
    const std::string& next = e->other(head);
    if (e->key_side_is(next) && members.count(next) && !covered.count(next))
      kids.emplace_back(e, next);
  }
  std::sort(kids.begin(), kids.end(), [&](const auto& a, const auto& b) {
    double ea = edge_elimination(*a.first, head);
    double eb = edge_elimination(*b.first, head);
    return ea != eb ? ea > eb : a.second < b.second;
  });
  for (auto& [e, next] : kids) {
    if (covered.count(next)) continue;
    structural.insert({head, next});
    linearize(g, next, members, covered, out, structural);
  }
}

}  // namespace

SnowflakeShape shape_around_fact(const JoinGraph& g, const std::string& fact,
                                 const std::set<std::string>& members) {
  SnowflakeShape shape;
  shape.fact = fact;
  std::set<std::string> covered{fact};
  std::set<std::pair<std::string, std::string>> structural;

  for (const JoinEdge* e : g.edges_of(fact)) {
    const std::string& head = e->other(fact);
    if (!e->key_side_is(head) || !members.count(head) || covered.count(head))
      continue;
    structural.insert({fact, head});
    std::vector<std::string> chain;
    linearize(g, head, members, covered, chain, structural);
    shape.branches.push_back(std::move(chain));
  }

  // Remaining members connect only through residual edges (or not at all);
  // emit them as pseudo-branches in breadth-first chunks.
  for (const auto& r : g.catalog().relations) {
    if (!members.count(r.name) || covered.count(r.name)) continue;
    std::vector<std::string> chunk;
    std::vector<std::string> work{r.name};
    covered.insert(r.name);
    while (!work.empty()) {
      std::string cur = work.front();
      work.erase(work.begin());
      chunk.push_back(cur);
      for (const JoinEdge* e : g.edges_of(cur)) {
        const std::string& nxt = e->other(cur);
        if (members.count(nxt) && !covered.count(nxt)) {
          covered.insert(nxt);
          work.push_back(nxt);
        }
      }
    }
    shape.branches.push_back(std::move(chunk));
  }

  for (const auto& e : g.catalog().edges) {
    if (!members.count(e.left) || !members.count(e.right)) continue;
    if (structural.count({e.left, e.right}) ||
        structural.count({e.right, e.left}))
      continue;
    shape.residual_edges.push_back(e);
  }
  return shape;
}

SnowflakeShape extract_snowflake(const JoinGraph& g,
                                 const std::set<std::string>& optimized) {
  if (g.size() == 0) throw ValidationError("empty join graph");
  std::vector<std::string> facts = find_fact_tables(g);
  std::vector<std::string> unopt;
  for (const auto& f : facts)
    if (!optimized.count(f)) unopt.push_back(f);

  std::string fact;
  bool whole = false;
  if (unopt.empty()) {
    // No eligible fact: designate the largest relation and take everything.
    fact = facts.empty() ? "" : facts.front();
    if (fact.empty()) {
      uint64_t best = 0;
      for (const auto& r : g.catalog().relations)
        if (fact.empty() || r.cardinality > best ||
            (r.cardinality == best && r.name < fact)) {
          fact = r.name;
          best = r.cardinality;
        }
    }
    whole = true;
  } else {
    fact = unopt.front();
    whole = unopt.size() == 1;
  }

  std::set<std::string> members{fact};
  if (whole) {
    for (const auto& r : g.catalog().relations) members.insert(r.name);
  } else {
    // Expand over unique-key edges only; other facts' territory stays out.
    std::vector<std::string> work{fact};
    while (!work.empty()) {
      std::string cur = work.back();
      work.pop_back();
      for (const JoinEdge* e : g.edges_of(cur)) {
        const std::string& nxt = e->other(cur);
        if (e->key_side_is(nxt) && !members.count(nxt) &&
            !optimized.count(nxt)) {
          members.insert(nxt);
          work.push_back(nxt);
        }
      }
    }
  }
  return shape_around_fact(g, fact, members);
}

std::vector<BranchGroup> group_branches(const SnowflakeShape& shape,
                                        const JoinGraph& g) {
  const size_t n = shape.branches.size();
  std::map<std::string, size_t> branch_of;
  for (size_t i = 0; i < n; ++i)
    for (const auto& rel : shape.branches[i]) branch_of[rel] = i;

  std::vector<size_t> uf(n);
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&](size_t x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  for (const auto& e : shape.residual_edges) {
    auto l = branch_of.find(e.left);
    auto r = branch_of.find(e.right);
    if (l == branch_of.end() || r == branch_of.end()) continue;  // fact side
    size_t a = find(l->second), b = find(r->second);
    if (a != b) uf[a] = b;
  }

  std::map<size_t, std::vector<size_t>> klass;
  for (size_t i = 0; i < n; ++i) klass[find(i)].push_back(i);

  const uint64_t fact_card = g.catalog().relation(shape.fact).cardinality;
  std::vector<BranchGroup> out;
  for (auto& [root, list] : klass) {
    BranchGroup grp;
    grp.branches = list;
    if (list.size() >= 2) {
      grp.priority = BranchPriority::P2;
      grp.rank = static_cast<int>(list.size());
    } else {
      const auto& chain = shape.branches[list.front()];
      const JoinEdge* head_edge = g.catalog().find_edge(shape.fact, chain.front());
      bool pkfk_with_fact =
          head_edge != nullptr && head_edge->key_side_is(chain.front());
      uint64_t max_card = 0;
      for (const auto& rel : chain)
        max_card = std::max(max_card, g.catalog().relation(rel).cardinality);
      if (!pkfk_with_fact) {
        grp.priority = BranchPriority::P0;
        grp.rank = 0;
      } else if (max_card < fact_card) {
        grp.priority = BranchPriority::P1;
        grp.rank = 1;
      } else {
        grp.priority = BranchPriority::P3;
        grp.rank = static_cast<int>(n) + 1;
      }
    }
    out.push_back(std::move(grp));
  }
  return out;
}

}  // namespace bvqo
