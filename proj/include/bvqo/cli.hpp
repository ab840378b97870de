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
#include <iosfwd>
#include <string>
#include <vector>

#include "bvqo/join_graph.hpp"
#include "bvqo/plan.hpp"

namespace bvqo {

struct RunConfig {
  std::string workload;   // catalog json, or a directory for `compare`
  std::string data_dir;   // csv tables; empty means statistics only / generate
  std::string out_path;   // extra artifact (bench csv)
  uint64_t seed = 42;
  double threshold = 0.05;       // gating: minimum marginal elimination
  FilterMode mode = FilterMode::Perfect;
  double fp_rate = 0.01;
  size_t cap = 8;                // enumeration cap for verify
  bool json = false;
  int suite_seeds = 5;           // verify suite: seeds per shape
  int suite_min_rel = 3;         // verify suite: relation count range
  int suite_max_rel = 6;
  uint64_t bench_fact = 20000;   // bench: probe-side rows
  uint64_t bench_dim = 512;      // bench: build-side rows
};

/// Deterministic ungated reference order: first catalog relation, then
/// repeatedly the first remaining relation joined to the placed set (first
/// remaining overall if none connects).
std::vector<std::string> canonical_order(const JoinGraph&);

int cmd_explain(const RunConfig&, std::ostream&);
int cmd_verify(const RunConfig&, std::ostream&);
int cmd_bench(const RunConfig&, std::ostream&);
int cmd_compare(const RunConfig&, std::ostream&);

/// Parse argv, dispatch, and map errors to exit codes: 1 for bad usage or
/// bad input, 2 for runtime failures, 3 when verification finds a
/// counterexample.
int run_cli(int argc, const char* const* argv);

}  // namespace bvqo
