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

#include <string>
#include <vector>

#include "bvqo/cost_model.hpp"
#include "bvqo/join_graph.hpp"
#include "bvqo/plan.hpp"

namespace bvqo {

/// A family of plans guaranteed to contain an optimum for its shape. Every
/// plan comes with push-down filters already annotated.
struct CandidateSet {
  std::vector<Plan> plans;
  std::vector<std::string> labels;
};

/// Star with n dimensions: the n+1 plans with the hub rightmost or exactly
/// one dimension rotated into the rightmost slot.
CandidateSet star_candidates(const JoinGraph&,
                             FilterMode mode = FilterMode::Perfect,
                             double fp_rate = 0.0);

/// Single dependent chain R0..Rn (R0 the hub): the n+1 suffix rotations
/// T(R_k, R_{k+1}, .., R_n, R_{k-1}, .., R_0) for k = 0..n.
CandidateSet branch_candidates(const JoinGraph&,
                               FilterMode mode = FilterMode::Perfect,
                               double fp_rate = 0.0);

/// Snowflake: the hub-rightmost plan plus, per branch of length n_i, the n_i
/// entry rotations of that chain; 1 + sum(n_i) plans total.
CandidateSet snowflake_candidates(const JoinGraph&, const SnowflakeShape&,
                                  FilterMode mode = FilterMode::Perfect,
                                  double fp_rate = 0.0);

struct SortOptions {
  /// Order residual-connected groups by descending size. Flipping this only
  /// reorders equal-priority groups.
  bool larger_groups_first = true;
};

/// Branch indices in join order, nearest to the hub first. Priority groups
/// order by rank descending; within a group branches join most-eliminating
/// first (fraction of hub rows their head filters away).
std::vector<size_t> sort_branches(const SnowflakeShape&, const JoinGraph&,
                                  const SortOptions& = {});

/// Append every table of the listed branches to a partial plan (the bare hub
/// when empty). Tables larger than the hub join with roles swapped: the
/// accumulated plan becomes the build side and the table probes.
Plan join_branches(const JoinGraph&, const SnowflakeShape&,
                   const std::vector<size_t>& branch_order, Plan partial);

struct OptimizeResult {
  Plan plan;
  CostReport report;
  std::string label;
};

/// Cheapest plan for one snowflake-like shape by total filtered output.
/// Ties keep the earliest candidate in generation order.
OptimizeResult optimize_snowflake(const JoinGraph&, const SnowflakeShape&,
                                  CardinalityProvider&,
                                  const SortOptions& = {},
                                  FilterMode mode = FilterMode::Perfect,
                                  double fp_rate = 0.0);

/// Whole-graph optimization: carve out a snowflake around the smallest hub,
/// optimize it, collapse the result into a composite relation, and repeat
/// until a single plan covers the graph. Handles shapes classify() calls
/// General, including multiple hubs and residual edges.
OptimizeResult optimize_join_graph(const JoinGraph&, CardinalityProvider&,
                                   const SortOptions& = {},
                                   FilterMode mode = FilterMode::Perfect,
                                   double fp_rate = 0.0);

/// Drop annotated filters whose marginal eliminated fraction at the landing
/// node is below `threshold`. Decisions are taken in one pass against the
/// fully annotated plan; structure is untouched.
Plan gate_bitvectors(const Plan&, CardinalityProvider&,
                     const FilterCostModel&, double threshold);

}  // namespace bvqo
