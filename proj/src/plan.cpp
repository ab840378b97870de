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
#include "bvqo/plan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace bvqo {

std::unique_ptr<PlanNode> PlanNode::clone() const {
  auto n = std::make_unique<PlanNode>();
  n->kind = kind;
  n->id = id;
  n->relation = relation;
  n->preds = preds;
  n->filters = filters;
  if (build) n->build = build->clone();
  if (probe) n->probe = probe->clone();
  return n;
}

Plan Plan::clone() const {
  Plan p;
  if (root) p.root = root->clone();
  p.filters = filters;
  return p;
}

namespace {

PlanNode* find_node(PlanNode* n, int id) {
  if (!n) return nullptr;
  if (n->id == id) return n;
  if (PlanNode* hit = find_node(n->build.get(), id)) return hit;
  return find_node(n->probe.get(), id);
}

void collect_leaves(const PlanNode* n, std::vector<std::string>& out) {
  if (!n) return;
  if (n->is_leaf()) {
    out.push_back(n->relation);
    return;
  }
  collect_leaves(n->probe.get(), out);
  collect_leaves(n->build.get(), out);
}

void collect_relations(const PlanNode* n, std::set<std::string>& out) {
  if (!n) return;
  if (n->is_leaf()) {
    out.insert(n->relation);
    return;
  }
  collect_relations(n->build.get(), out);
  collect_relations(n->probe.get(), out);
}

std::string side_label(const PlanNode* n) {
  std::vector<std::string> leaves;
  collect_leaves(n, leaves);
  std::string out;
  for (size_t i = 0; i < leaves.size(); ++i) {
    if (i) out += "*";
    out += leaves[i];
  }
  return out;
}

void number_preorder(PlanNode* n, int& next) {
  if (!n) return;
  n->id = next++;
  number_preorder(n->build.get(), next);
  number_preorder(n->probe.get(), next);
}

}  // namespace

const PlanNode* Plan::node(int id) const {
  return find_node(const_cast<PlanNode*>(root.get()), id);
}

PlanNode* Plan::node(int id) { return find_node(root.get(), id); }

const BitvectorFilter* Plan::filter(int id) const {
  for (const auto& f : filters)
    if (f.id == id) return &f;
  return nullptr;
}

std::vector<std::string> Plan::leaf_order() const {
  std::vector<std::string> out;
  collect_leaves(root.get(), out);
  return out;
}

void assign_ids(Plan& p) {
  int next = 0;
  number_preorder(p.root.get(), next);
}

Plan make_leaf(const std::string& relation) {
  Plan p;
  p.root = std::make_unique<PlanNode>();
  p.root->kind = PlanNode::Kind::Leaf;
  p.root->relation = relation;
  assign_ids(p);
  return p;
}

Plan join_plans(Plan build, Plan probe, const JoinGraph& g) {
  if (!build.root || !probe.root)
    throw ValidationError("join_plans: empty side");
  std::set<std::string> build_rels, probe_rels;
  collect_relations(build.root.get(), build_rels);
  collect_relations(probe.root.get(), probe_rels);

  auto n = std::make_unique<PlanNode>();
  n->kind = PlanNode::Kind::HashJoin;
  for (const auto& rel : build_rels) {
    for (const JoinEdge* e : g.edges_between(rel, probe_rels)) {
      const bool rel_is_left = e->left == rel;
      const auto& bcols = rel_is_left ? e->left_cols : e->right_cols;
      const auto& pcols = rel_is_left ? e->right_cols : e->left_cols;
      const std::string& other = e->other(rel);
      for (size_t i = 0; i < bcols.size(); ++i)
        n->preds.push_back({{rel, bcols[i]}, {other, pcols[i]}});
    }
  }
  n->build = std::move(build.root);
  n->probe = std::move(probe.root);

  Plan p;
  p.root = std::move(n);
  // Joining discards stale annotations; push-down re-derives them.
  assign_ids(p);
  return p;
}

Plan right_deep(const JoinGraph& g, const std::vector<std::string>& order) {
  if (order.empty()) throw ValidationError("right_deep: empty order");
  std::set<std::string> seen;
  for (const auto& rel : order) {
    g.catalog().relation(rel);
    if (!seen.insert(rel).second)
      throw ValidationError("right_deep: duplicate relation '" + rel + "'");
  }
  Plan p = make_leaf(order.front());
  for (size_t i = 1; i < order.size(); ++i)
    p = join_plans(make_leaf(order[i]), std::move(p), g);
  return p;
}

bool has_cross_product(const Plan& p) {
  bool found = false;
  std::vector<const PlanNode*> work{p.root.get()};
  while (!work.empty()) {
    const PlanNode* n = work.back();
    work.pop_back();
    if (!n) continue;
    if (!n->is_leaf()) {
      found = found || n->preds.empty();
      work.push_back(n->build.get());
      work.push_back(n->probe.get());
    }
  }
  return found;
}

namespace {

bool subtree_covers(const PlanNode* n, const std::vector<ColumnRef>& cols) {
  std::set<std::string> rels;
  collect_relations(n, rels);
  for (const auto& c : cols)
    if (!rels.count(c.rel)) return false;
  return true;
}

struct PushState {
  std::vector<BitvectorFilter>* filters;
  const std::map<int, int>* fid_of_join;
  FilterMode mode;
  double fp_rate;
};

void join_nodes_preorder(const PlanNode* n, std::vector<int>& out) {
  if (!n || n->is_leaf()) return;
  if (!n->preds.empty()) out.push_back(n->id);
  join_nodes_preorder(n->build.get(), out);
  join_nodes_preorder(n->probe.get(), out);
}

void push(PlanNode* n, std::vector<int> incoming, PushState& st) {
  if (n->is_leaf()) {
    for (int fid : incoming) {
      n->filters.push_back(fid);
      (*st.filters)[fid].landing = n->id;
    }
    return;
  }
  std::vector<int> to_build;
  std::vector<int> to_probe;
  if (!n->preds.empty()) {
    BitvectorFilter f;
    f.id = st.fid_of_join->at(n->id);
    f.source_join = n->id;
    f.build_label = side_label(n->build.get());
    for (const auto& pr : n->preds) {
      f.build_cols.push_back(pr.build);
      f.probe_cols.push_back(pr.probe);
    }
    f.mode = st.mode;
    f.fp_rate = st.mode == FilterMode::Lossy ? st.fp_rate : 0.0;
    (*st.filters)[static_cast<size_t>(f.id)] = f;
    to_probe.push_back(f.id);
  }
  for (int fid : incoming) {
    const auto& cols = (*st.filters)[fid].probe_cols;
    const bool in_build = subtree_covers(n->build.get(), cols);
    const bool in_probe = subtree_covers(n->probe.get(), cols);
    if (in_build != in_probe) {
      (in_build ? to_build : to_probe).push_back(fid);
    } else {
      // Key columns span both children (or neither): the filter stays here
      // as a residual applied to this join's output.
      n->filters.push_back(fid);
      (*st.filters)[fid].landing = n->id;
    }
  }
  push(n->build.get(), std::move(to_build), st);
  push(n->probe.get(), std::move(to_probe), st);
}

void strip(PlanNode* n) {
  if (!n) return;
  n->filters.clear();
  strip(n->build.get());
  strip(n->probe.get());
}

}  // namespace

Plan push_down_bitvectors(const Plan& in, FilterMode mode, double fp_rate) {
  Plan p = in.clone();
  p.filters.clear();
  strip(p.root.get());
  assign_ids(p);
  // Ids grow from the bottom of the plan upward, and landings apply filters
  // in ascending id order, so filters from joins nearer the probed leaves
  // (the more selective ones under branch sorting) are checked first.
  std::vector<int> joins;
  join_nodes_preorder(p.root.get(), joins);
  std::map<int, int> fid_of_join;
  for (size_t i = 0; i < joins.size(); ++i)
    fid_of_join[joins[joins.size() - 1 - i]] = static_cast<int>(i);
  p.filters.assign(joins.size(), BitvectorFilter{});
  PushState st{&p.filters, &fid_of_join, mode, fp_rate};
  push(p.root.get(), {}, st);
  return p;
}

bool is_partially_ordered(const Plan& p, const SnowflakeShape& shape) {
  // Strict right-deep: every build side is a single relation.
  for (const PlanNode* n = p.root.get(); n; n = n->probe.get()) {
    if (n->is_leaf()) break;
    if (!n->build || !n->build->is_leaf())
      throw ValidationError("is_partially_ordered: plan is not right-deep");
  }
  std::vector<std::string> order = p.leaf_order();
  if (order.empty() || order.front() != shape.fact)
    throw ValidationError(
        "is_partially_ordered: fact is not the rightmost leaf");
  std::set<std::string> placed{shape.fact};
  for (size_t i = 1; i < order.size(); ++i) {
    const std::string parent = shape.parent_of(order[i]);
    if (parent != shape.fact && !placed.count(parent)) return false;
    placed.insert(order[i]);
  }
  return true;
}

namespace {

std::string format_card(double v) {
  char buf[64];
  if (std::fabs(v - std::llround(v)) < 1e-9)
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::llround(v)));
  else
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string filter_list(const std::vector<int>& ids) {
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::string out = "[";
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (i) out += ",";
    out += "f" + std::to_string(sorted[i]);
  }
  return out + "]";
}

void print_node(const PlanNode* n, int depth, const std::map<int, double>* cards,
                std::ostringstream& os) {
  os << std::string(static_cast<size_t>(depth) * 2, ' ');
  if (n->is_leaf()) {
    os << "SCAN " << n->relation << " filters=" << filter_list(n->filters);
  } else {
    os << "HJ#" << n->id << "(build=" << side_label(n->build.get())
       << ", filters=" << filter_list(n->filters) << ")";
  }
  if (cards) {
    auto it = cards->find(n->id);
    os << " card=" << (it == cards->end() ? "?" : format_card(it->second));
  }
  os << "\n";
  if (!n->is_leaf()) {
    print_node(n->build.get(), depth + 1, cards, os);
    print_node(n->probe.get(), depth + 1, cards, os);
  }
}

}  // namespace

std::string explain(const Plan& p, const std::map<int, double>* cards,
                    const double* total) {
  std::ostringstream os;
  if (!p.root) return "";
  print_node(p.root.get(), 0, cards, os);
  if (!p.filters.empty()) {
    os << "filters:\n";
    for (const auto& f : p.filters) {
      os << "  f" << f.id << ": source=HJ#" << f.source_join
         << " build=" << f.build_label << " keys=[";
      for (size_t i = 0; i < f.probe_cols.size(); ++i) {
        if (i) os << ",";
        os << f.probe_cols[i].qualified();
      }
      os << "] mode=";
      if (f.mode == FilterMode::Perfect) {
        os << "perfect";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "lossy(%.3f)", f.fp_rate);
        os << buf;
      }
      os << "\n";
    }
  }
  if (total) os << "Cout=" << format_card(*total) << "\n";
  return os.str();
}

}  // namespace bvqo
