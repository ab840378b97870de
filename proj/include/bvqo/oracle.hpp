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

#include <cstdint>
#include <string>
#include <vector>

#include "bvqo/executor.hpp"
#include "bvqo/join_graph.hpp"
#include "bvqo/optimizer.hpp"

namespace bvqo {

/// Every right-deep join order without cross products, rightmost leaf first,
/// in deterministic (catalog-order lexicographic) sequence. Throws LimitError
/// when the graph has more than `cap` relations.
std::vector<std::vector<std::string>> enumerate_orders(const JoinGraph&,
                                                       size_t cap = 8);

enum class Verdict { Holds, Counterexample };
std::string to_string(Verdict);

struct VerificationReport {
  ShapeKind kind = ShapeKind::General;
  std::string shape_desc;  // "branches=2,1" style
  uint64_t seed = 0;
  size_t enumerated = 0;
  size_t candidate_count = 0;
  double candidate_min = 0.0;
  double global_min = 0.0;
  std::string candidate_best;  // label of the cheapest candidate
  std::string global_best;     // leaf order of the cheapest enumerated plan
  /// Hub-rightmost partially ordered plans sharing one cost (perfect mode).
  size_t equal_cost_class = 0;
  bool equal_cost_ok = true;
  /// Provider and executor agree on every per-node count (needs tables).
  bool crosscheck_ok = true;
  Verdict verdict = Verdict::Holds;
};

/// Brute-force check of the optimality guarantees for one workload: the
/// shape's candidate set must contain a cost minimum over all enumerated
/// no-cross-product right-deep plans, and all hub-rightmost partially ordered
/// plans must share one cost. With `tables` present, candidate plans are also
/// cross-checked against the executor. Lossy mode costs plans by running them
/// (total output tuples) instead of asking the provider.
VerificationReport verify_theorem(const JoinGraph&, CardinalityProvider&,
                                  const TableSet* tables = nullptr,
                                  FilterMode mode = FilterMode::Perfect,
                                  double fp_rate = 0.0,
                                  size_t enumeration_cap = 8);

struct GeneratedWorkload {
  Catalog catalog;
  TableSet tables;
  uint64_t seed = 0;
  std::string desc;
};

/// Random hub-and-chains workload: one entry in `branch_lengths` per chain.
/// Stored forward selectivities are fractions the generated data realizes
/// exactly; reverse directions are measured afterwards.
GeneratedWorkload random_snowflake_workload(
    const std::vector<int>& branch_lengths, uint64_t seed);

/// All ways to split `total_dims` dependent relations into chains, largest
/// part first: the shape schedule for verification sweeps.
std::vector<std::vector<int>> chain_partitions(int total_dims);

}  // namespace bvqo
