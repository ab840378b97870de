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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bvqo/cost_model.hpp"
#include "bvqo/join_graph.hpp"
#include "bvqo/plan.hpp"

namespace bvqo {

/// Row-major integer table. Every column holds int64 values; key columns of a
/// relation with n rows hold 0..n-1.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<int64_t> cells;

  size_t width() const { return columns.size(); }
  size_t rows() const { return columns.empty() ? 0 : cells.size() / columns.size(); }
  int64_t at(size_t row, size_t col) const { return cells[row * columns.size() + col]; }
  size_t col_index(const std::string& col) const;
};

using TableSet = std::map<std::string, Table>;

Table load_table_csv(const std::string& path, const std::string& name);
void save_table_csv(const Table& table, const std::string& path);

/// Loads <dir>/<relation>.csv for every relation in the catalog.
TableSet load_table_dir(const std::string& dir, const Catalog& catalog);

/// Runtime semi-join filter. Perfect mode stores the exact key tuple set and
/// never errs. Lossy mode keeps a Bloom bit array sized for the requested
/// false positive rate; it has no false negatives.
class RuntimeBitvector {
 public:
  static RuntimeBitvector build(FilterMode mode, double fp_rate, size_t arity,
                                const std::vector<int64_t>& flat_tuples,
                                uint64_t seed);

  bool contains(const int64_t* tuple) const;
  /// flat holds n tuples row-major; mask[i] is set to 1 for members.
  void contains_batch(const int64_t* flat, size_t n, uint8_t* mask) const;

  size_t arity() const { return arity_; }
  FilterMode mode() const { return mode_; }

 private:
  RuntimeBitvector() = default;
  uint64_t tuple_hash(const int64_t* tuple) const;

  FilterMode mode_ = FilterMode::Perfect;
  size_t arity_ = 1;
  uint64_t seed_ = 0;
  // Perfect: packed tuple set. Lossy: Bloom words.
  std::vector<std::string> exact_sorted_;
  std::vector<uint64_t> words_;
  uint32_t log2_bits_ = 6;
  uint32_t hashes_ = 1;
};

struct NodeMetrics {
  int node = -1;
  enum class Klass { Leaf, Join, Other } klass = Klass::Other;
  uint64_t output = 0;
  uint64_t probe_in = 0;
  uint64_t build_in = 0;
  uint64_t filter_checks = 0;
};

struct ExecMetrics {
  std::vector<NodeMetrics> nodes;  // ascending node id
  uint64_t result_rows = 0;

  /// probe_in * probe_cost + filter_checks * filter_cost + build_in * 1.
  double simulated_cost(const FilterCostModel& model) const;
  /// Output tuples grouped by node class: "Leaf", "Join", "Other".
  std::map<std::string, uint64_t> tuple_breakdown() const;
  /// Per-node output counts, same shape as a provider report.
  std::map<int, double> node_cards() const;
};

struct ExecResult {
  std::vector<std::string> columns;  // qualified names
  std::vector<std::vector<int64_t>> rows;
  ExecMetrics metrics;
};

/// Runs a plan over the tables, honoring its filter annotations. Build
/// subtrees evaluate before probe subtrees, so every filter's content exists
/// before the first probe-side check. Intermediate results are materialized;
/// a node exceeding the internal row cap raises LimitError.
ExecResult execute(const Plan& plan, const TableSet& tables);

/// Cardinalities measured on the data, with perfect-filter semantics. This is
/// an independent implementation from execute(): it works on row indices and
/// interned filter contents rather than materialized value rows, so the two
/// can cross-check each other.
class ExactProvider final : public CardinalityProvider {
 public:
  ExactProvider(const JoinGraph& graph, const TableSet& tables);
  ~ExactProvider() override;

  double base_cardinality(const std::string& relation) const override;
  std::map<int, double> plan_cardinalities(const Plan& plan) override;
  double filtered_cardinality(const TargetSpec& target,
                              const std::vector<FilterFrom>& filters) override;
  bool exact() const override { return true; }

  /// Surviving row indices of one base relation under the given filters.
  std::vector<uint32_t> filtered_rows(const std::string& relation,
                                      const std::vector<FilterFrom>& filters);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Deterministic synthetic data. Key columns hold 0..n-1. A foreign key
/// column referencing a relation of c rows hits a live key (uniform over
/// 0..c-1) for exactly round(sel * rows) rows and an out-of-range value
/// elsewhere. Columns of non-unique-key edges draw from a small shared
/// domain. Throws ValidationError if a stored selectivity is off by more
/// than 0.02 from any achievable fraction.
TableSet generate_tables(const Catalog& catalog, uint64_t seed);

/// generate_tables restricted to the relations and edges of one shape.
TableSet generate_snowflake_data(const SnowflakeShape& shape,
                                 const Catalog& catalog, uint64_t seed);

/// Overwrites every edge's stored selectivities with fractions measured on
/// the data, in both directions.
void measure_edge_selectivities(Catalog& catalog, const TableSet& tables);

struct BreakevenRow {
  double eliminated = 0.0;
  double cost_with = 0.0;
  double cost_without = 0.0;
  double wall_with_ns = 0.0;
  double wall_without_ns = 0.0;
};

struct BreakevenResult {
  std::vector<BreakevenRow> rows;
  /// Interpolated elimination fraction where the filtered plan starts
  /// winning on simulated cost; negative when no crossover is in the grid.
  double breakeven = -1.0;
};

/// Single hash join micro benchmark sweeping the fraction of probe tuples a
/// build-side filter eliminates.
BreakevenResult breakeven_benchmark(uint64_t fact_rows, uint64_t dim_rows,
                                    const std::vector<double>& grid,
                                    const FilterCostModel& model,
                                    uint64_t seed);

/// CSV with header e,cost_with,cost_without,wall_with_ns,wall_without_ns.
std::string breakeven_csv(const BreakevenResult& result);

}  // namespace bvqo
