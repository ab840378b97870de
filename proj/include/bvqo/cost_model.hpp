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
#include <string>
#include <vector>

#include "bvqo/plan.hpp"

namespace bvqo {

/// Per-tuple cost constants for the filter benefit algebra: probing a hash
/// table costs probe_cost, checking a tuple against a bitvector filter costs
/// filter_cost, inserting a build tuple costs 1.
struct FilterCostModel {
  double probe_cost = 10.0;   // C_p
  double filter_cost = 1.0;   // C_f
};

/// Break-even retained fraction 1 - C_f/C_p, clamped to [0,1]. A filter that
/// keeps less than this fraction of the probe input pays for itself.
double lambda_threshold(const FilterCostModel&);

/// Break-even eliminated fraction C_f/C_p (= 1 - lambda_threshold).
double elimination_breakeven(const FilterCostModel&);

/// Cost delta of adding a filter to a probe input of `probe_card` tuples
/// that eliminates fraction `eliminated`: probe_card * (C_f - e*C_p).
/// Negative means the filter reduces cost; zero at the break-even fraction.
double filter_benefit(double probe_card, double eliminated,
                      const FilterCostModel&);

/// Output cardinality of every plan node plus their sum. Each value reflects
/// the bitvector filters applied at or below the node; the total is the plan
/// cost (leaves contribute their filtered size, joins their filtered output).
struct CostReport {
  double total = 0.0;
  std::map<int, double> per_node;
};

/// A join target for ad-hoc cardinality questions: one relation, or several
/// to be joined along their graph edges.
struct TargetSpec {
  std::vector<std::string> relations;
};

/// A semi-join filter described by provenance rather than plan position: the
/// content comes from `source` after applying that relation's own filters.
struct FilterFrom {
  std::string source;
  std::vector<FilterFrom> source_filters;
};

/// Answers cardinality questions either from catalog statistics or from the
/// data itself. Implementations must be safe for concurrent read-only use;
/// internal memoization is allowed behind synchronization.
class CardinalityProvider {
 public:
  virtual ~CardinalityProvider() = default;
  virtual double base_cardinality(const std::string& relation) const = 0;
  /// Filtered output cardinality per plan node, honoring the plan's filter
  /// annotations as given (no re-derivation).
  virtual std::map<int, double> plan_cardinalities(const Plan&) = 0;
  /// Cardinality of `target` after semi-joining every filter in `filters`.
  virtual double filtered_cardinality(const TargetSpec&,
                                      const std::vector<FilterFrom>&) = 0;
  virtual bool exact() const = 0;
};

/// Estimates from stored statistics: independence across filters, semi-join
/// selectivities from catalog edges, unique-key joins sized by the fk side.
/// Lossy filters retain sel + fp_rate*(1-sel).
class StatisticalProvider final : public CardinalityProvider {
 public:
  explicit StatisticalProvider(const JoinGraph& g) : graph_(&g) {}
  double base_cardinality(const std::string& relation) const override;
  std::map<int, double> plan_cardinalities(const Plan&) override;
  double filtered_cardinality(const TargetSpec&,
                              const std::vector<FilterFrom>&) override;
  bool exact() const override { return false; }

 private:
  const JoinGraph* graph_;
};

/// Sum the provider's per-node cardinalities into the plan cost.
CostReport cost_out(const Plan&, CardinalityProvider&);

}  // namespace bvqo
