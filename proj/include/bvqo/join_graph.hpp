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

#include <set>
#include <string>
#include <vector>

#include "bvqo/catalog.hpp"

namespace bvqo {

/// Adjacency view over a catalog's relations and edges.
class JoinGraph {
 public:
  explicit JoinGraph(const Catalog& c);

  const Catalog& catalog() const { return *catalog_; }
  size_t size() const { return catalog_->relations.size(); }
  const std::vector<const JoinEdge*>& edges_of(const std::string& rel) const;
  /// Edges between `rel` and any member of `others`, in catalog edge order.
  std::vector<const JoinEdge*> edges_between(
      const std::string& rel, const std::set<std::string>& others) const;
  bool connected() const;

 private:
  const Catalog* catalog_;
  std::vector<std::pair<std::string, std::vector<const JoinEdge*>>> adj_;
};

enum class ShapeKind { Star, Branch, Snowflake, General };
std::string to_string(ShapeKind);

/// A hub relation with dependent chains hanging off it. Branch lists start at
/// the hub-adjacent table; every table's structural parent precedes it in its
/// chain. residual_edges are member edges not used as chain structure.
struct SnowflakeShape {
  std::string fact;
  std::vector<std::vector<std::string>> branches;
  std::vector<JoinEdge> residual_edges;

  std::vector<std::string> relations() const;
  /// Structural parent of a chain member: its predecessor, or the fact for
  /// branch heads. Throws if `rel` is the fact or unknown.
  std::string parent_of(const std::string& rel) const;
};

/// Shape taxonomy for the whole graph: a single hub with unique-key spokes
/// of length one is Star, a single dependent chain is Branch, hub plus chains
/// is Snowflake, anything else (cycles, multiple hubs, non-unique-key edges)
/// is General. Single relation classifies as Branch.
ShapeKind classify(const JoinGraph&);

/// Relations that are never joined on their own key columns, i.e. candidates
/// for the hub role. Sorted by cardinality ascending (name breaks ties).
std::vector<std::string> find_fact_tables(const JoinGraph&);

/// Carve the next snowflake-like subgraph out of an arbitrary join graph:
/// root at the smallest fact not in `optimized` (largest relation when no
/// fact qualifies), expand over unique-key edges; when that fact is the only
/// remaining unoptimized one the whole graph is taken. Relations reachable
/// only through residual edges become trailing pseudo-branches.
SnowflakeShape extract_snowflake(const JoinGraph&,
                                 const std::set<std::string>& optimized = {});

/// Build the shape rooted at a chosen fact covering exactly `members`.
SnowflakeShape shape_around_fact(const JoinGraph&, const std::string& fact,
                                 const std::set<std::string>& members);

/// Branch-order priorities, higher joins closer to the fact.
enum class BranchPriority { P0 = 0, P1 = 1, P2 = 2, P3 = 3 };

struct BranchGroup {
  std::vector<size_t> branches;  // indices into shape.branches
  BranchPriority priority;
  /// Numeric sort key: P0=0, P1=1, P2=group size, P3=#branches+1.
  int rank = 0;
};

/// Partition branches into groups connected by residual edges and assign
/// priorities: inter-connected groups are P2, a lone branch is P0 when its
/// fact connection is not a unique-key edge, P1 when all of its tables are
/// smaller than the fact, P3 otherwise.
std::vector<BranchGroup> group_branches(const SnowflakeShape&,
                                        const JoinGraph&);

}  // namespace bvqo
