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
#include <optional>
#include <string>
#include <vector>

#include "bvqo/error.hpp"

namespace bvqo {

/// Direction of a key/foreign-key dependency on an edge. LeftToRight means
/// the right side is joined on its key columns (left rows each match at most
/// one right row).
enum class PkFk { None, LeftToRight, RightToLeft };

std::string to_string(PkFk);
PkFk pkfk_from_string(const std::string&);

struct Relation {
  std::string name;
  uint64_t cardinality = 0;
  std::vector<std::string> columns;
  std::vector<std::string> key_columns;

  bool has_column(const std::string& c) const;
};

/// Equi-join edge between two relations. Composite join keys are expressed
/// as parallel column lists: left_cols[i] joins right_cols[i].
struct JoinEdge {
  std::string left, right;
  std::vector<std::string> left_cols, right_cols;
  PkFk pkfk = PkFk::None;
  // Directional semi-join selectivities: sel_lr = |left ltimes right|/|left|.
  // Absent values default to 1.0 (no reduction assumed).
  double sel_lr = 1.0;
  double sel_rl = 1.0;

  bool touches(const std::string& rel) const {
    return left == rel || right == rel;
  }
  const std::string& other(const std::string& rel) const;
  /// True if `rel` sits on the key (unique) side of this edge.
  bool key_side_is(const std::string& rel) const;
};

/// Logical workload description: relations with statistics plus join edges.
struct Catalog {
  std::vector<Relation> relations;
  std::vector<JoinEdge> edges;

  const Relation* find_relation(const std::string& name) const;
  const Relation& relation(const std::string& name) const;
  const JoinEdge* find_edge(const std::string& a, const std::string& b) const;

  bool operator==(const Catalog&) const;
};

/// Parse a workload spec from JSON text. Throws ParseError on syntax issues
/// and ValidationError on contract violations (named field in message).
Catalog load_catalog(const std::string& json_text);
Catalog load_catalog_file(const std::string& path);

/// Serialize back to JSON. load(serialize(c)) == c.
std::string serialize_catalog(const Catalog&);

/// Stored directional semi-join selectivity |from ltimes to| / |from|.
/// Throws ValidationError if the relations share no edge.
double semijoin_selectivity(const Catalog&, const std::string& from,
                            const std::string& to);

}  // namespace bvqo
