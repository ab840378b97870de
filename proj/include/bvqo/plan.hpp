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
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bvqo/join_graph.hpp"

namespace bvqo {

struct ColumnRef {
  std::string rel, col;
  std::string qualified() const { return rel + "." + col; }
  bool operator==(const ColumnRef& o) const {
    return rel == o.rel && col == o.col;
  }
};

/// One equi-join conjunct: build-side column == probe-side column.
struct JoinPred {
  ColumnRef build, probe;
};

enum class FilterMode { Perfect, Lossy };

/// A semi-join filter cut from a hash join's build side and applied somewhere
/// in its probe subtree (or at a descendant join when its key columns span
/// both children there).
struct BitvectorFilter {
  int id = -1;
  int source_join = -1;               // node id of the creating hash join
  std::string build_label;            // relation(s) the content comes from
  std::vector<ColumnRef> build_cols;  // key columns on the build side
  std::vector<ColumnRef> probe_cols;  // matching columns on the probe side
  int landing = -1;                   // node id where the filter applies
  FilterMode mode = FilterMode::Perfect;
  double fp_rate = 0.0;
};

struct PlanNode {
  enum class Kind { Leaf, HashJoin };
  Kind kind = Kind::Leaf;
  int id = -1;
  std::string relation;  // Leaf only
  std::unique_ptr<PlanNode> build, probe;
  std::vector<JoinPred> preds;  // empty means cross product
  std::vector<int> filters;     // ids of filters applied at this node

  bool is_leaf() const { return kind == Kind::Leaf; }
  std::unique_ptr<PlanNode> clone() const;
};

/// An operator tree plus the filters annotated onto it. Node ids are dense
/// and assigned in pre-order (node, build, probe), root = 0.
struct Plan {
  std::unique_ptr<PlanNode> root;
  std::vector<BitvectorFilter> filters;

  Plan() = default;
  Plan clone() const;
  const PlanNode* node(int id) const;
  PlanNode* node(int id);
  const BitvectorFilter* filter(int id) const;
  /// Leaf relations bottom-up: the rightmost (first-probed) leaf comes first.
  std::vector<std::string> leaf_order() const;
  std::vector<std::string> relations() const { return leaf_order(); }
};

/// Re-number node ids in pre-order. Call after structural surgery.
void assign_ids(Plan&);

Plan make_leaf(const std::string& relation);

/// Join two subplans: `build` becomes the build side. Predicates are all
/// graph edges between the two sides; none means a cross product.
Plan join_plans(Plan build, Plan probe, const JoinGraph&);

/// Right-deep tree over `order`: order[0] is the rightmost leaf, each later
/// relation joins as the build side of the next hash join up.
Plan right_deep(const JoinGraph&, const std::vector<std::string>& order);

/// True if some hash join has no equi-join predicate.
bool has_cross_product(const Plan&);

/// Annotate the plan with one filter per non-cross-product hash join, pushed
/// to the lowest operator whose output carries all of its key columns.
/// Filter ids grow bottom-up (lower joins first) and landings apply them in
/// ascending id order. Existing filters are discarded first, so the
/// operation is idempotent.
Plan push_down_bitvectors(const Plan&, FilterMode mode = FilterMode::Perfect,
                          double fp_rate = 0.0);

/// True when every chain member's structural parent either is the fact or
/// appears nearer the rightmost leaf. Requires a strict right-deep plan with
/// the shape's fact as the rightmost leaf (ValidationError otherwise).
bool is_partially_ordered(const Plan&, const SnowflakeShape&);

/// Pretty-print the plan. With `cards` present each line gains a card=
/// annotation (node id -> cardinality) and a Cout= footer is appended.
std::string explain(const Plan&, const std::map<int, double>* cards = nullptr,
                    const double* total = nullptr);

}  // namespace bvqo
