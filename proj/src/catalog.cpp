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
#include "bvqo/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace bvqo {

using nlohmann::json;

std::string to_string(PkFk p) {
  switch (p) {
    case PkFk::LeftToRight: return "left_to_right";
    case PkFk::RightToLeft: return "right_to_left";
    case PkFk::None: return "none";
  }
  return "none";
}

PkFk pkfk_from_string(const std::string& s) {
  if (s == "left_to_right") return PkFk::LeftToRight;
  if (s == "right_to_left") return PkFk::RightToLeft;
  if (s == "none") return PkFk::None;
  throw ValidationError("edge field 'pkfk': unknown value '" + s +
                        "' (expected left_to_right|right_to_left|none)");
}

bool Relation::has_column(const std::string& c) const {
  return std::find(columns.begin(), columns.end(), c) != columns.end();
}

const std::string& JoinEdge::other(const std::string& rel) const {
  if (rel == left) return right;
  if (rel == right) return left;
  throw ValidationError("edge " + left + "-" + right + " does not touch " +
                        rel);
}

bool JoinEdge::key_side_is(const std::string& rel) const {
  return (pkfk == PkFk::LeftToRight && rel == right) ||
         (pkfk == PkFk::RightToLeft && rel == left);
}

const Relation* Catalog::find_relation(const std::string& name) const {
  for (const auto& r : relations)
    if (r.name == name) return &r;
  return nullptr;
}

const Relation& Catalog::relation(const std::string& name) const {
  if (const Relation* r = find_relation(name)) return *r;
  throw ValidationError("unknown relation '" + name + "'");
}

const JoinEdge* Catalog::find_edge(const std::string& a,
                                   const std::string& b) const {
  for (const auto& e : edges)
    if ((e.left == a && e.right == b) || (e.left == b && e.right == a))
      return &e;
  return nullptr;
}

bool Catalog::operator==(const Catalog& o) const {
  auto edge_eq = [](const JoinEdge& a, const JoinEdge& b) {
    return a.left == b.left && a.right == b.right &&
           a.left_cols == b.left_cols && a.right_cols == b.right_cols &&
           a.pkfk == b.pkfk && a.sel_lr == b.sel_lr && a.sel_rl == b.sel_rl;
  };
  auto rel_eq = [](const Relation& a, const Relation& b) {
    return a.name == b.name && a.cardinality == b.cardinality &&
           a.columns == b.columns && a.key_columns == b.key_columns;
  };
  return relations.size() == o.relations.size() &&
         edges.size() == o.edges.size() &&
         std::equal(relations.begin(), relations.end(), o.relations.begin(),
                    rel_eq) &&
         std::equal(edges.begin(), edges.end(), o.edges.begin(), edge_eq);
}

namespace {

void validate(const Catalog& c) {
  std::set<std::string> names;
  for (const auto& r : c.relations) {
    if (r.name.empty()) throw ValidationError("relation field 'name': empty");
    // Qualified references are "rel.col" and composite relations join member
    // names with '*', so both characters are reserved.
    if (r.name.find_first_of(".*") != std::string::npos)
      throw ValidationError("relation '" + r.name + "': '.' and '*' not allowed");
    if (!names.insert(r.name).second)
      throw ValidationError("relation '" + r.name + "': duplicate name");
    std::set<std::string> cols(r.columns.begin(), r.columns.end());
    if (cols.size() != r.columns.size())
      throw ValidationError("relation '" + r.name + "': duplicate column");
    for (const auto& col : r.columns)
      if (col.find('.') != std::string::npos)
        throw ValidationError("relation '" + r.name + "': column '" + col +
                              "': '.' not allowed");
    for (const auto& k : r.key_columns)
      if (!cols.count(k))
        throw ValidationError("relation '" + r.name + "': key_columns entry '" +
                              k + "' not in columns");
  }
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& e : c.edges) {
    const std::string where = "edge " + e.left + "-" + e.right;
    const Relation* l = c.find_relation(e.left);
    const Relation* r = c.find_relation(e.right);
    if (!l) throw ValidationError(where + ": unknown relation '" + e.left + "'");
    if (!r)
      throw ValidationError(where + ": unknown relation '" + e.right + "'");
    if (e.left == e.right) throw ValidationError(where + ": self-loop");
    auto key = std::minmax(e.left, e.right);
    if (!pairs.insert({key.first, key.second}).second)
      throw ValidationError(where + ": duplicate edge between pair");
    if (e.left_cols.empty() || e.left_cols.size() != e.right_cols.size())
      throw ValidationError(where +
                            ": left_cols/right_cols must be parallel and "
                            "non-empty");
    for (const auto& col : e.left_cols)
      if (!l->has_column(col))
        throw ValidationError(where + ": left_cols entry '" + col +
                              "' not in " + e.left);
    for (const auto& col : e.right_cols)
      if (!r->has_column(col))
        throw ValidationError(where + ": right_cols entry '" + col +
                              "' not in " + e.right);
    if (e.sel_lr < 0.0 || e.sel_lr > 1.0 || e.sel_rl < 0.0 || e.sel_rl > 1.0)
      throw ValidationError(where + ": selectivity out of [0,1]");
    // A PKFK direction requires the key side to be joined on exactly its
    // declared key columns, otherwise uniqueness cannot be assumed.
    if (e.pkfk == PkFk::LeftToRight) {
      auto sorted = e.right_cols;
      std::sort(sorted.begin(), sorted.end());
      auto keys = r->key_columns;
      std::sort(keys.begin(), keys.end());
      if (keys.empty() || sorted != keys)
        throw ValidationError(where +
                              ": pkfk=left_to_right but right_cols != "
                              "key_columns of " +
                              e.right);
    } else if (e.pkfk == PkFk::RightToLeft) {
      auto sorted = e.left_cols;
      std::sort(sorted.begin(), sorted.end());
      auto keys = l->key_columns;
      std::sort(keys.begin(), keys.end());
      if (keys.empty() || sorted != keys)
        throw ValidationError(where +
                              ": pkfk=right_to_left but left_cols != "
                              "key_columns of " +
                              e.left);
    }
  }
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected array");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string())
      throw ValidationError(where + ": expected array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

Catalog load_catalog(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("workload JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("relations"))
    throw ValidationError("workload JSON: missing field 'relations'");
  Catalog c;
  for (const auto& jr : j.at("relations")) {
    Relation r;
    try {
      r.name = jr.at("name").get<std::string>();
      if (!jr.at("cardinality").is_number_integer() ||
          jr.at("cardinality").get<int64_t>() < 0)
        throw ValidationError("relation '" + r.name +
                              "': cardinality must be a non-negative integer");
      r.cardinality = jr.at("cardinality").get<uint64_t>();
      r.columns = string_list(jr.at("columns"), "relation '" + r.name +
                                                    "' field 'columns'");
      if (jr.contains("key_columns"))
        r.key_columns = string_list(
            jr.at("key_columns"), "relation '" + r.name + "' key_columns");
    } catch (const json::exception& e) {
      throw ValidationError(std::string("relation entry: ") + e.what());
    }
    c.relations.push_back(std::move(r));
  }
  if (j.contains("edges")) {
    for (const auto& je : j.at("edges")) {
      JoinEdge e;
      try {
        e.left = je.at("left").get<std::string>();
        e.right = je.at("right").get<std::string>();
        const std::string where = "edge " + e.left + "-" + e.right;
        e.left_cols = string_list(je.at("left_cols"), where + " left_cols");
        e.right_cols = string_list(je.at("right_cols"), where + " right_cols");
        if (je.contains("pkfk"))
          e.pkfk = pkfk_from_string(je.at("pkfk").get<std::string>());
        if (je.contains("sel_lr")) e.sel_lr = je.at("sel_lr").get<double>();
        if (je.contains("sel_rl")) e.sel_rl = je.at("sel_rl").get<double>();
      } catch (const json::exception& ex) {
        throw ValidationError(std::string("edge entry: ") + ex.what());
      }
      c.edges.push_back(std::move(e));
    }
  }
  validate(c);
  return c;
}

Catalog load_catalog_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open workload file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_catalog(ss.str());
}

std::string serialize_catalog(const Catalog& c) {
  json j;
  j["relations"] = json::array();
  for (const auto& r : c.relations) {
    json jr;
    jr["name"] = r.name;
    jr["cardinality"] = r.cardinality;
    jr["columns"] = r.columns;
    jr["key_columns"] = r.key_columns;
    j["relations"].push_back(jr);
  }
  j["edges"] = json::array();
  for (const auto& e : c.edges) {
    json je;
    je["left"] = e.left;
    je["right"] = e.right;
    je["left_cols"] = e.left_cols;
    je["right_cols"] = e.right_cols;
    je["pkfk"] = to_string(e.pkfk);
    je["sel_lr"] = e.sel_lr;
    je["sel_rl"] = e.sel_rl;
    j["edges"].push_back(je);
  }
  return j.dump(2) + "\n";
}

double semijoin_selectivity(const Catalog& c, const std::string& from,
                            const std::string& to) {
  c.relation(from);
  c.relation(to);
  const JoinEdge* e = c.find_edge(from, to);
  if (!e)
    throw ValidationError("no edge between '" + from + "' and '" + to + "'");
  return e->left == from ? e->sel_lr : e->sel_rl;
}

}  // namespace bvqo
