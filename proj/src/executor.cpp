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
#include "bvqo/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "bvqo/kernels.hpp"
#include "bvqo/util.hpp"

namespace bvqo {

namespace {

// Hard cap on materialized rows per operator, here and in ExactProvider.
constexpr uint64_t kRowCap = 5'000'000;
constexpr uint64_t kFilterSeedBase = 0x42564f5146494c54ull;

std::vector<int> sorted_filters(const PlanNode& n) {
  std::vector<int> fids = n.filters;
  std::sort(fids.begin(), fids.end());
  return fids;
}

}  // namespace

size_t Table::col_index(const std::string& col) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == col) return i;
  throw ValidationError("table '" + name + "' has no column '" + col + "'");
}

Table load_table_csv(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open table file '" + path + "'");
  Table t;
  t.name = name;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty table file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream header(line);
    std::string col;
    while (std::getline(header, col, ',')) t.columns.push_back(col);
  }
  if (t.columns.empty())
    throw ParseError("table file '" + path + "' has no columns");
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    size_t ncells = 0;
    while (std::getline(row, cell, ',')) {
      size_t pos = 0;
      int64_t v = 0;
      try {
        v = std::stoll(cell, &pos);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": not an integer: '" + cell + "'");
      }
      if (pos != cell.size())
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": not an integer: '" + cell + "'");
      t.cells.push_back(v);
      ++ncells;
    }
    if (ncells != t.columns.size())
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(t.columns.size()) + " cells, got " +
                       std::to_string(ncells));
  }
  return t;
}

void save_table_csv(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write table file '" + path + "'");
  for (size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out << ',';
    out << table.columns[i];
  }
  out << '\n';
  const size_t w = table.width();
  for (size_t r = 0; r < table.rows(); ++r) {
    for (size_t c = 0; c < w; ++c) {
      if (c) out << ',';
      out << table.at(r, c);
    }
    out << '\n';
  }
}

TableSet load_table_dir(const std::string& dir, const Catalog& catalog) {
  TableSet out;
  for (const Relation& r : catalog.relations)
    out.emplace(r.name, load_table_csv(dir + "/" + r.name + ".csv", r.name));
  return out;
}

// ---------------------------------------------------------------------------
// RuntimeBitvector

uint64_t RuntimeBitvector::tuple_hash(const int64_t* tuple) const {
  uint64_t h = seed_ ^ (0x9e3779b97f4a7c15ull * (arity_ + 1));
  for (size_t i = 0; i < arity_; ++i)
    h = hash_combine(h, static_cast<uint64_t>(tuple[i]));
  return h;
}

RuntimeBitvector RuntimeBitvector::build(FilterMode mode, double fp_rate,
                                         size_t arity,
                                         const std::vector<int64_t>& flat,
                                         uint64_t seed) {
  if (arity == 0) throw ValidationError("bitvector key arity must be positive");
  if (flat.size() % arity != 0)
    throw ValidationError("bitvector tuple buffer not a multiple of arity");
  RuntimeBitvector bv;
  bv.mode_ = mode;
  bv.arity_ = arity;
  bv.seed_ = seed;
  const size_t n = flat.size() / arity;
  if (mode == FilterMode::Perfect) {
    bv.exact_sorted_.reserve(n);
    for (size_t i = 0; i < n; ++i)
      bv.exact_sorted_.push_back(pack_key(&flat[i * arity], arity));
    std::sort(bv.exact_sorted_.begin(), bv.exact_sorted_.end());
    bv.exact_sorted_.erase(
        std::unique(bv.exact_sorted_.begin(), bv.exact_sorted_.end()),
        bv.exact_sorted_.end());
    return bv;
  }
  if (!(fp_rate > 0.0 && fp_rate < 1.0))
    throw ValidationError("lossy filter fp rate must be in (0,1)");
  const double bits_per_key = -std::log2(fp_rate) * 1.4426950408889634;
  const double target = std::max(64.0, std::ceil(double(n) * bits_per_key));
  uint32_t lb = 6;
  while ((uint64_t{1} << lb) < uint64_t(target) && lb < 30) ++lb;
  const uint64_t m = uint64_t{1} << lb;
  bv.log2_bits_ = lb;
  bv.hashes_ = uint32_t(std::clamp<long long>(
      std::llround(double(m) / double(std::max<size_t>(n, 1)) * 0.6931471805599453),
      1, 16));
  bv.words_.assign(m / 64, 0);
  const uint64_t mask = m - 1;
  for (size_t i = 0; i < n; ++i) {
    const uint64_t h1 = bv.tuple_hash(&flat[i * arity]);
    const uint64_t h2 = kernels::mix64(h1 ^ 0x5851f42d4c957f2dull) | 1;
    uint64_t h = h1;
    for (uint32_t j = 0; j < bv.hashes_; ++j) {
      const uint64_t bit = h & mask;
      bv.words_[bit >> 6] |= uint64_t{1} << (bit & 63);
      h += h2;
    }
  }
  return bv;
}

bool RuntimeBitvector::contains(const int64_t* tuple) const {
  if (mode_ == FilterMode::Perfect) {
    return std::binary_search(exact_sorted_.begin(), exact_sorted_.end(),
                              pack_key(tuple, arity_));
  }
  const uint64_t key = tuple_hash(tuple);
  uint8_t hit = 0;
  kernels::scalar::bloom_probe_batch(words_.data(), log2_bits_, hashes_, &key,
                                     1, &hit);
  return hit != 0;
}

void RuntimeBitvector::contains_batch(const int64_t* flat, size_t n,
                                      uint8_t* mask) const {
  if (mode_ == FilterMode::Perfect) {
    for (size_t i = 0; i < n; ++i)
      mask[i] = contains(flat + i * arity_) ? 1 : 0;
    return;
  }
  std::vector<uint64_t> keys(n);
  for (size_t i = 0; i < n; ++i) keys[i] = tuple_hash(flat + i * arity_);
  kernels::bloom_probe_batch(words_.data(), log2_bits_, hashes_, keys.data(), n,
                             mask);
}

// ---------------------------------------------------------------------------
// Metrics

double ExecMetrics::simulated_cost(const FilterCostModel& model) const {
  double c = 0.0;
  for (const NodeMetrics& m : nodes) {
    c += double(m.probe_in) * model.probe_cost;
    c += double(m.filter_checks) * model.filter_cost;
    c += double(m.build_in);
  }
  return c;
}

std::map<std::string, uint64_t> ExecMetrics::tuple_breakdown() const {
  std::map<std::string, uint64_t> out{{"Join", 0}, {"Leaf", 0}, {"Other", 0}};
  for (const NodeMetrics& m : nodes) {
    switch (m.klass) {
      case NodeMetrics::Klass::Leaf: out["Leaf"] += m.output; break;
      case NodeMetrics::Klass::Join: out["Join"] += m.output; break;
      default: out["Other"] += m.output; break;
    }
  }
  return out;
}

std::map<int, double> ExecMetrics::node_cards() const {
  std::map<int, double> out;
  for (const NodeMetrics& m : nodes) out[m.node] = double(m.output);
  return out;
}

// ---------------------------------------------------------------------------
// execute

namespace {

struct Chunk {
  std::vector<std::string> cols;  // qualified names
  std::vector<int64_t> data;      // row-major
  size_t width = 0;
  size_t nrows = 0;
};

size_t chunk_col(const Chunk& c, const std::string& qualified) {
  for (size_t i = 0; i < c.cols.size(); ++i)
    if (c.cols[i] == qualified) return i;
  throw Error("plan filter references column '" + qualified +
              "' outside the node schema");
}

struct ExecCtx {
  const Plan* plan = nullptr;
  const TableSet* tables = nullptr;
  std::map<int, std::vector<const BitvectorFilter*>> by_source;
  std::map<int, RuntimeBitvector> live;
  std::map<int, NodeMetrics> metrics;
};

// Applies one filter to a chunk in place; returns the number of checks.
uint64_t apply_filter(Chunk& c, const BitvectorFilter& f,
                      const RuntimeBitvector& bv) {
  const size_t arity = f.probe_cols.size();
  std::vector<size_t> idx(arity);
  for (size_t i = 0; i < arity; ++i)
    idx[i] = chunk_col(c, f.probe_cols[i].qualified());
  std::vector<int64_t> keys(c.nrows * arity);
  for (size_t r = 0; r < c.nrows; ++r)
    for (size_t i = 0; i < arity; ++i)
      keys[r * arity + i] = c.data[r * c.width + idx[i]];
  std::vector<uint8_t> mask(c.nrows);
  bv.contains_batch(keys.data(), c.nrows, mask.data());
  size_t w = 0;
  for (size_t r = 0; r < c.nrows; ++r) {
    if (!mask[r]) continue;
    if (w != r)
      std::copy_n(c.data.begin() + long(r * c.width), c.width,
                  c.data.begin() + long(w * c.width));
    ++w;
  }
  const uint64_t checks = c.nrows;
  c.data.resize(w * c.width);
  c.nrows = w;
  return checks;
}

Chunk eval_node(const PlanNode* n, ExecCtx& ctx) {
  NodeMetrics& nm = ctx.metrics[n->id];
  nm.node = n->id;
  if (n->is_leaf()) {
    nm.klass = NodeMetrics::Klass::Leaf;
    auto it = ctx.tables->find(n->relation);
    if (it == ctx.tables->end())
      throw ValidationError("no table loaded for relation '" + n->relation + "'");
    const Table& t = it->second;
    Chunk c;
    c.width = t.width();
    c.cols.reserve(c.width);
    for (const std::string& col : t.columns)
      c.cols.push_back(n->relation + "." + col);
    c.data = t.cells;
    c.nrows = t.rows();
    for (int fid : sorted_filters(*n)) {
      const BitvectorFilter* f = ctx.plan->filter(fid);
      nm.filter_checks += apply_filter(c, *f, ctx.live.at(fid));
    }
    nm.output = c.nrows;
    return c;
  }

  nm.klass = NodeMetrics::Klass::Join;
  Chunk cb = eval_node(n->build.get(), ctx);
  // Cut this join's filters from the build side before touching the probe
  // subtree, so they are live when probe-side leaves scan.
  auto srcit = ctx.by_source.find(n->id);
  if (srcit != ctx.by_source.end()) {
    for (const BitvectorFilter* f : srcit->second) {
      const size_t arity = f->build_cols.size();
      std::vector<size_t> idx(arity);
      for (size_t i = 0; i < arity; ++i)
        idx[i] = chunk_col(cb, f->build_cols[i].qualified());
      std::vector<int64_t> flat(cb.nrows * arity);
      for (size_t r = 0; r < cb.nrows; ++r)
        for (size_t i = 0; i < arity; ++i)
          flat[r * arity + i] = cb.data[r * cb.width + idx[i]];
      ctx.live.emplace(f->id,
                       RuntimeBitvector::build(f->mode, f->fp_rate, arity, flat,
                                               kFilterSeedBase ^
                                                   (uint64_t(f->id) * 0x9e37ull)));
    }
  }
  Chunk cp = eval_node(n->probe.get(), ctx);
  nm.build_in = cb.nrows;
  nm.probe_in = cp.nrows;

  Chunk out;
  out.cols = cp.cols;
  out.cols.insert(out.cols.end(), cb.cols.begin(), cb.cols.end());
  out.width = cp.width + cb.width;

  auto emit = [&](size_t pr, size_t br) {
    if (out.nrows >= kRowCap)
      throw LimitError("intermediate result exceeds " +
                       std::to_string(kRowCap) + " rows");
    out.data.insert(out.data.end(), cp.data.begin() + long(pr * cp.width),
                    cp.data.begin() + long((pr + 1) * cp.width));
    out.data.insert(out.data.end(), cb.data.begin() + long(br * cb.width),
                    cb.data.begin() + long((br + 1) * cb.width));
    ++out.nrows;
  };

  if (n->preds.empty()) {
    for (size_t pr = 0; pr < cp.nrows; ++pr)
      for (size_t br = 0; br < cb.nrows; ++br) emit(pr, br);
  } else {
    const size_t arity = n->preds.size();
    std::vector<size_t> bidx(arity), pidx(arity);
    for (size_t i = 0; i < arity; ++i) {
      bidx[i] = chunk_col(cb, n->preds[i].build.qualified());
      pidx[i] = chunk_col(cp, n->preds[i].probe.qualified());
    }
    std::unordered_map<std::string, std::vector<uint32_t>> ht;
    ht.reserve(cb.nrows * 2);
    std::vector<int64_t> key(arity);
    for (size_t br = 0; br < cb.nrows; ++br) {
      for (size_t i = 0; i < arity; ++i)
        key[i] = cb.data[br * cb.width + bidx[i]];
      ht[pack_key(key.data(), arity)].push_back(uint32_t(br));
    }
    for (size_t pr = 0; pr < cp.nrows; ++pr) {
      for (size_t i = 0; i < arity; ++i)
        key[i] = cp.data[pr * cp.width + pidx[i]];
      auto hit = ht.find(pack_key(key.data(), arity));
      if (hit == ht.end()) continue;
      for (uint32_t br : hit->second) emit(pr, br);
    }
  }

  for (int fid : sorted_filters(*n)) {
    const BitvectorFilter* f = ctx.plan->filter(fid);
    nm.filter_checks += apply_filter(out, *f, ctx.live.at(fid));
  }
  nm.output = out.nrows;
  return out;
}

}  // namespace

ExecResult execute(const Plan& plan, const TableSet& tables) {
  if (!plan.root) throw ValidationError("cannot execute an empty plan");
  ExecCtx ctx;
  ctx.plan = &plan;
  ctx.tables = &tables;
  for (const BitvectorFilter& f : plan.filters)
    ctx.by_source[f.source_join].push_back(&f);
  for (auto& [src, fs] : ctx.by_source)
    std::sort(fs.begin(), fs.end(),
              [](const BitvectorFilter* a, const BitvectorFilter* b) {
                return a->id < b->id;
              });
  Chunk top = eval_node(plan.root.get(), ctx);

  ExecResult res;
  res.columns = top.cols;
  res.rows.reserve(top.nrows);
  for (size_t r = 0; r < top.nrows; ++r)
    res.rows.emplace_back(top.data.begin() + long(r * top.width),
                          top.data.begin() + long((r + 1) * top.width));
  res.metrics.result_rows = top.nrows;
  res.metrics.nodes.reserve(ctx.metrics.size());
  for (auto& [id, nm] : ctx.metrics) res.metrics.nodes.push_back(nm);
  return res;
}

// ---------------------------------------------------------------------------
// ExactProvider

struct ExactProvider::Impl {
  const JoinGraph* graph = nullptr;
  TableSet tables;

  // Interned filter contents: sorted packed key tuples. Two filters with the
  // same content share an id, which makes leaf row sets memoizable across
  // plans.
  struct Content {
    size_t arity = 1;
    std::vector<std::string> sorted;
    uint64_t hash = 0;
  };
  std::vector<Content> contents;
  std::unordered_map<uint64_t, std::vector<int>> content_index;
  std::map<std::string, std::vector<uint32_t>> row_memo;
  std::mutex mu;

  struct IdxChunk {
    std::vector<std::string> rels;
    std::vector<uint32_t> data;  // row indices, row-major
    size_t width = 0;
    size_t nrows = 0;
  };

  int intern(size_t arity, std::vector<std::string> tuples) {
    std::sort(tuples.begin(), tuples.end());
    tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
    uint64_t h = hash_combine(0xC0117E47ull, arity);
    for (const std::string& s : tuples)
      h = hash_combine(h, std::hash<std::string>{}(s));
    for (int cid : content_index[h]) {
      if (contents[cid].arity == arity && contents[cid].sorted == tuples)
        return cid;
    }
    contents.push_back({arity, std::move(tuples), h});
    content_index[h].push_back(int(contents.size()) - 1);
    return int(contents.size()) - 1;
  }

  bool content_has(int cid, const int64_t* tuple) const {
    const Content& c = contents[cid];
    return std::binary_search(c.sorted.begin(), c.sorted.end(),
                              pack_key(tuple, c.arity));
  }

  size_t rel_slot(const IdxChunk& c, const std::string& rel) const {
    for (size_t i = 0; i < c.rels.size(); ++i)
      if (c.rels[i] == rel) return i;
    throw Error("filter column references relation '" + rel +
                "' outside the node schema");
  }

  int64_t value(const IdxChunk& c, size_t row, size_t slot,
                size_t colidx) const {
    const Table& t = tables.at(c.rels[slot]);
    return t.at(c.data[row * c.width + slot], colidx);
  }

  // Membership test for a set of (content, column list) constraints against
  // one chunk row.
  bool row_passes(const IdxChunk& c, size_t row,
                  const std::vector<std::pair<int, std::vector<ColumnRef>>>&
                      constraints) const {
    std::vector<int64_t> key;
    for (const auto& [cid, cols] : constraints) {
      key.clear();
      for (const ColumnRef& cr : cols) {
        const size_t slot = rel_slot(c, cr.rel);
        key.push_back(value(c, row, slot, tables.at(cr.rel).col_index(cr.col)));
      }
      if (!content_has(cid, key.data())) return false;
    }
    return true;
  }

  // Filtered row indices of one base relation, memoized by content signature.
  std::vector<uint32_t> leaf_rows(
      const std::string& rel,
      std::vector<std::pair<int, std::vector<ColumnRef>>> constraints) {
    std::sort(constraints.begin(), constraints.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first < b.first;
                return a.second.size() < b.second.size();
              });
    std::string key = rel;
    for (const auto& [cid, cols] : constraints) {
      key += "|" + std::to_string(cid) + ":";
      for (const ColumnRef& cr : cols) key += cr.qualified() + ",";
    }
    auto memo = row_memo.find(key);
    if (memo != row_memo.end()) return memo->second;

    const Table& t = tables.at(rel);
    std::vector<std::pair<int, std::vector<size_t>>> resolved;
    for (const auto& [cid, cols] : constraints) {
      std::vector<size_t> idx;
      for (const ColumnRef& cr : cols) {
        if (cr.rel != rel)
          throw Error("leaf filter for '" + rel + "' keys on '" +
                      cr.qualified() + "'");
        idx.push_back(t.col_index(cr.col));
      }
      resolved.emplace_back(cid, std::move(idx));
    }
    std::vector<uint32_t> rows;
    std::vector<int64_t> keybuf;
    for (size_t r = 0; r < t.rows(); ++r) {
      bool ok = true;
      for (const auto& [cid, idx] : resolved) {
        keybuf.clear();
        for (size_t i : idx) keybuf.push_back(t.at(r, i));
        if (!content_has(cid, keybuf.data())) { ok = false; break; }
      }
      if (ok) rows.push_back(uint32_t(r));
    }
    row_memo.emplace(std::move(key), rows);
    return rows;
  }

  // Plan-tree evaluation over row indices.
  IdxChunk eval(const PlanNode* n, const Plan& plan,
                std::map<int, int>& content_of, std::map<int, double>& cards) {
    if (n->is_leaf()) {
      std::vector<std::pair<int, std::vector<ColumnRef>>> constraints;
      for (int fid : sorted_filters(*n)) {
        const BitvectorFilter* f = plan.filter(fid);
        constraints.emplace_back(content_of.at(fid), f->probe_cols);
      }
      IdxChunk c;
      c.rels = {n->relation};
      c.width = 1;
      std::vector<uint32_t> rows = leaf_rows(n->relation, std::move(constraints));
      c.nrows = rows.size();
      c.data.assign(rows.begin(), rows.end());
      cards[n->id] = double(c.nrows);
      return c;
    }

    IdxChunk cb = eval(n->build.get(), plan, content_of, cards);
    for (const BitvectorFilter& f : plan.filters) {
      if (f.source_join != n->id) continue;
      std::vector<std::string> tuples;
      tuples.reserve(cb.nrows);
      std::vector<int64_t> key;
      std::vector<std::pair<size_t, size_t>> cols;  // (slot, colidx)
      for (const ColumnRef& cr : f.build_cols)
        cols.emplace_back(rel_slot(cb, cr.rel),
                          tables.at(cr.rel).col_index(cr.col));
      for (size_t r = 0; r < cb.nrows; ++r) {
        key.clear();
        for (const auto& [slot, ci] : cols) key.push_back(value(cb, r, slot, ci));
        tuples.push_back(pack_key(key.data(), key.size()));
      }
      content_of[f.id] = intern(f.build_cols.size(), std::move(tuples));
    }
    IdxChunk cp = eval(n->probe.get(), plan, content_of, cards);

    IdxChunk out;
    out.rels = cp.rels;
    out.rels.insert(out.rels.end(), cb.rels.begin(), cb.rels.end());
    out.width = cp.width + cb.width;
    auto emit = [&](size_t pr, size_t br) {
      if (out.nrows >= kRowCap)
        throw LimitError("intermediate result exceeds " +
                         std::to_string(kRowCap) + " rows");
      out.data.insert(out.data.end(), cp.data.begin() + long(pr * cp.width),
                      cp.data.begin() + long((pr + 1) * cp.width));
      out.data.insert(out.data.end(), cb.data.begin() + long(br * cb.width),
                      cb.data.begin() + long((br + 1) * cb.width));
      ++out.nrows;
    };
    if (n->preds.empty()) {
      for (size_t pr = 0; pr < cp.nrows; ++pr)
        for (size_t br = 0; br < cb.nrows; ++br) emit(pr, br);
    } else {
      const size_t arity = n->preds.size();
      std::vector<std::pair<size_t, size_t>> bcols, pcols;
      for (const JoinPred& p : n->preds) {
        bcols.emplace_back(rel_slot(cb, p.build.rel),
                           tables.at(p.build.rel).col_index(p.build.col));
        pcols.emplace_back(rel_slot(cp, p.probe.rel),
                           tables.at(p.probe.rel).col_index(p.probe.col));
      }
      std::unordered_map<std::string, std::vector<uint32_t>> ht;
      ht.reserve(cb.nrows * 2);
      std::vector<int64_t> key(arity);
      for (size_t br = 0; br < cb.nrows; ++br) {
        for (size_t i = 0; i < arity; ++i)
          key[i] = value(cb, br, bcols[i].first, bcols[i].second);
        ht[pack_key(key.data(), arity)].push_back(uint32_t(br));
      }
      for (size_t pr = 0; pr < cp.nrows; ++pr) {
        for (size_t i = 0; i < arity; ++i)
          key[i] = value(cp, pr, pcols[i].first, pcols[i].second);
        auto hit = ht.find(pack_key(key.data(), arity));
        if (hit == ht.end()) continue;
        for (uint32_t br : hit->second) emit(pr, br);
      }
    }

    std::vector<std::pair<int, std::vector<ColumnRef>>> residual;
    for (int fid : sorted_filters(*n)) {
      const BitvectorFilter* f = plan.filter(fid);
      residual.emplace_back(content_of.at(fid), f->probe_cols);
    }
    if (!residual.empty()) {
      size_t w = 0;
      for (size_t r = 0; r < out.nrows; ++r) {
        if (!row_passes(out, r, residual)) continue;
        if (w != r)
          std::copy_n(out.data.begin() + long(r * out.width), out.width,
                      out.data.begin() + long(w * out.width));
        ++w;
      }
      out.data.resize(w * out.width);
      out.nrows = w;
    }
    cards[n->id] = double(out.nrows);
    return out;
  }

  // Resolve a provenance-described filter into (content, target columns)
  // constraints against `target_rels`.
  std::pair<int, std::vector<ColumnRef>> resolve_filter(
      const FilterFrom& f, const std::vector<std::string>& target_rels) {
    std::vector<uint32_t> src_rows = filtered_rows_impl(f.source, f.source_filters);
    std::vector<std::string> scols;
    std::vector<ColumnRef> tcols;
    for (const std::string& rel : target_rels) {
      if (rel == f.source) continue;
      for (const JoinEdge* e : graph->edges_between(f.source, {rel})) {
        const bool src_left = (e->left == f.source);
        const auto& sc = src_left ? e->left_cols : e->right_cols;
        const auto& tc = src_left ? e->right_cols : e->left_cols;
        for (size_t i = 0; i < sc.size(); ++i) {
          scols.push_back(sc[i]);
          tcols.push_back({rel, tc[i]});
        }
      }
    }
    if (tcols.empty())
      throw ValidationError("filter source '" + f.source +
                            "' shares no edge with the target");
    const Table& st = tables.at(f.source);
    std::vector<size_t> sidx;
    for (const std::string& c : scols) sidx.push_back(st.col_index(c));
    std::vector<std::string> tuples;
    tuples.reserve(src_rows.size());
    std::vector<int64_t> key;
    for (uint32_t r : src_rows) {
      key.clear();
      for (size_t i : sidx) key.push_back(st.at(r, i));
      tuples.push_back(pack_key(key.data(), key.size()));
    }
    return {intern(sidx.size(), std::move(tuples)), std::move(tcols)};
  }

  std::vector<uint32_t> filtered_rows_impl(const std::string& rel,
                                           const std::vector<FilterFrom>& fs) {
    if (!tables.count(rel))
      throw ValidationError("no table loaded for relation '" + rel + "'");
    std::vector<std::pair<int, std::vector<ColumnRef>>> constraints;
    for (const FilterFrom& f : fs) constraints.push_back(resolve_filter(f, {rel}));
    return leaf_rows(rel, std::move(constraints));
  }

  double filtered_cardinality_impl(const TargetSpec& target,
                                   const std::vector<FilterFrom>& fs) {
    if (target.relations.empty())
      throw ValidationError("cardinality target has no relations");
    if (target.relations.size() == 1)
      return double(filtered_rows_impl(target.relations[0], fs).size());

    // Join the members along graph edges, cross products as a last resort.
    std::vector<std::string> pending = target.relations;
    IdxChunk acc;
    acc.rels = {pending.front()};
    acc.width = 1;
    {
      const Table& t = tables.at(pending.front());
      acc.nrows = t.rows();
      acc.data.resize(acc.nrows);
      for (size_t r = 0; r < acc.nrows; ++r) acc.data[r] = uint32_t(r);
    }
    pending.erase(pending.begin());
    std::set<std::string> have(acc.rels.begin(), acc.rels.end());
    while (!pending.empty()) {
      size_t pick = 0;
      std::vector<const JoinEdge*> edges;
      for (size_t i = 0; i < pending.size(); ++i) {
        edges = graph->edges_between(pending[i], have);
        if (!edges.empty()) { pick = i; break; }
      }
      const std::string rel = pending[pick];
      pending.erase(pending.begin() + long(pick));
      const Table& t = tables.at(rel);

      IdxChunk out;
      out.rels = acc.rels;
      out.rels.push_back(rel);
      out.width = acc.width + 1;
      if (edges.empty()) {
        for (size_t ar = 0; ar < acc.nrows; ++ar)
          for (size_t r = 0; r < t.rows(); ++r) {
            if (out.nrows >= kRowCap)
              throw LimitError("intermediate result exceeds " +
                               std::to_string(kRowCap) + " rows");
            out.data.insert(out.data.end(),
                            acc.data.begin() + long(ar * acc.width),
                            acc.data.begin() + long((ar + 1) * acc.width));
            out.data.push_back(uint32_t(r));
            ++out.nrows;
          }
      } else {
        std::vector<size_t> ncols;          // columns on the new relation
        std::vector<std::pair<size_t, size_t>> acols;  // (slot, colidx) in acc
        for (const JoinEdge* e : edges) {
          const bool new_left = (e->left == rel);
          const auto& nc = new_left ? e->left_cols : e->right_cols;
          const auto& oc = new_left ? e->right_cols : e->left_cols;
          const std::string& other = new_left ? e->right : e->left;
          for (size_t i = 0; i < nc.size(); ++i) {
            ncols.push_back(t.col_index(nc[i]));
            acols.emplace_back(rel_slot(acc, other),
                               tables.at(other).col_index(oc[i]));
          }
        }
        std::unordered_map<std::string, std::vector<uint32_t>> ht;
        std::vector<int64_t> key(ncols.size());
        for (size_t r = 0; r < t.rows(); ++r) {
          for (size_t i = 0; i < ncols.size(); ++i) key[i] = t.at(r, ncols[i]);
          ht[pack_key(key.data(), key.size())].push_back(uint32_t(r));
        }
        for (size_t ar = 0; ar < acc.nrows; ++ar) {
          for (size_t i = 0; i < acols.size(); ++i)
            key[i] = value(acc, ar, acols[i].first, acols[i].second);
          auto hit = ht.find(pack_key(key.data(), key.size()));
          if (hit == ht.end()) continue;
          for (uint32_t r : hit->second) {
            if (out.nrows >= kRowCap)
              throw LimitError("intermediate result exceeds " +
                               std::to_string(kRowCap) + " rows");
            out.data.insert(out.data.end(),
                            acc.data.begin() + long(ar * acc.width),
                            acc.data.begin() + long((ar + 1) * acc.width));
            out.data.push_back(r);
            ++out.nrows;
          }
        }
      }
      have.insert(rel);
      acc = std::move(out);
    }

    std::vector<std::pair<int, std::vector<ColumnRef>>> constraints;
    for (const FilterFrom& f : fs)
      constraints.push_back(resolve_filter(f, target.relations));
    if (constraints.empty()) return double(acc.nrows);
    size_t n = 0;
    for (size_t r = 0; r < acc.nrows; ++r)
      if (row_passes(acc, r, constraints)) ++n;
    return double(n);
  }
};

ExactProvider::ExactProvider(const JoinGraph& graph, const TableSet& tables)
    : impl_(std::make_unique<Impl>()) {
  impl_->graph = &graph;
  impl_->tables = tables;
  for (const Relation& r : graph.catalog().relations)
    if (!impl_->tables.count(r.name))
      throw ValidationError("no table loaded for relation '" + r.name + "'");
}

ExactProvider::~ExactProvider() = default;

double ExactProvider::base_cardinality(const std::string& relation) const {
  auto it = impl_->tables.find(relation);
  if (it == impl_->tables.end())
    throw ValidationError("no table loaded for relation '" + relation + "'");
  return double(it->second.rows());
}

std::map<int, double> ExactProvider::plan_cardinalities(const Plan& plan) {
  if (!plan.root) throw ValidationError("cannot cost an empty plan");
  std::lock_guard<std::mutex> lock(impl_->mu);
  std::map<int, double> cards;
  std::map<int, int> content_of;
  impl_->eval(plan.root.get(), plan, content_of, cards);
  return cards;
}

double ExactProvider::filtered_cardinality(const TargetSpec& target,
                                           const std::vector<FilterFrom>& fs) {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->filtered_cardinality_impl(target, fs);
}

std::vector<uint32_t> ExactProvider::filtered_rows(
    const std::string& relation, const std::vector<FilterFrom>& fs) {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->filtered_rows_impl(relation, fs);
}

// ---------------------------------------------------------------------------
// Data generation

namespace {

struct ColumnRole {
  enum Kind { Key, ForeignKey, SharedAttr, Payload } kind = Payload;
  size_t edge = size_t(-1);  // ForeignKey only
};

}  // namespace

TableSet generate_tables(const Catalog& catalog, uint64_t seed) {
  std::mt19937_64 rng(seed);
  TableSet out;
  for (const Relation& rel : catalog.relations) {
    std::map<std::string, ColumnRole> roles;
    for (const std::string& c : rel.key_columns) roles[c] = {ColumnRole::Key, 0};
    for (size_t ei = 0; ei < catalog.edges.size(); ++ei) {
      const JoinEdge& e = catalog.edges[ei];
      if (!e.touches(rel.name)) continue;
      const bool is_left = (e.left == rel.name);
      const auto& cols = is_left ? e.left_cols : e.right_cols;
      if (e.pkfk == PkFk::None) {
        for (const std::string& c : cols) {
          auto it = roles.find(c);
          if (it == roles.end()) roles[c] = {ColumnRole::SharedAttr, 0};
        }
        continue;
      }
      if (e.key_side_is(rel.name)) continue;  // key side already 0..n-1
      for (const std::string& c : cols) {
        auto it = roles.find(c);
        if (it != roles.end() && it->second.kind != ColumnRole::Payload &&
            it->second.kind != ColumnRole::SharedAttr)
          throw ValidationError("generation: column '" + rel.name + "." + c +
                                "' plays two roles");
        roles[c] = {ColumnRole::ForeignKey, ei};
      }
    }

    const uint64_t n = rel.cardinality;
    Table t;
    t.name = rel.name;
    t.columns = rel.columns;
    t.cells.assign(size_t(n) * rel.columns.size(), 0);

    // Per-edge foreign key draws, shared by every column of a composite key.
    std::map<size_t, std::vector<int64_t>> fk_values;
    auto edge_values = [&](size_t ei) -> const std::vector<int64_t>& {
      auto it = fk_values.find(ei);
      if (it != fk_values.end()) return it->second;
      const JoinEdge& e = catalog.edges[ei];
      const std::string child = e.other(rel.name);
      const uint64_t child_card = catalog.relation(child).cardinality;
      const double sel = (e.left == rel.name) ? e.sel_lr : e.sel_rl;
      std::vector<int64_t> vals(static_cast<size_t>(n));
      if (n > 0) {
        const int64_t m = std::llround(sel * double(n));
        if (std::abs(double(m) / double(n) - sel) > 0.02 + 1e-9)
          throw ValidationError("generation: selectivity " +
                                format_number(sel) + " for " + rel.name +
                                " towards " + child + " is not achievable");
        if (m > 0 && child_card == 0)
          throw ValidationError("generation: " + rel.name +
                                " expects matches in empty relation " + child);
        std::vector<uint8_t> valid(size_t(n), 0);
        for (int64_t i = 0; i < m; ++i) valid[size_t(i)] = 1;
        std::shuffle(valid.begin(), valid.end(), rng);
        for (size_t r = 0; r < size_t(n); ++r) {
          vals[r] = valid[r] ? int64_t(rng() % child_card)
                             : int64_t(child_card) + 1 + int64_t(rng() % 997);
        }
      }
      return fk_values.emplace(ei, std::move(vals)).first->second;
    };

    for (size_t ci = 0; ci < rel.columns.size(); ++ci) {
      const ColumnRole role = roles.count(rel.columns[ci])
                                  ? roles[rel.columns[ci]]
                                  : ColumnRole{};
      for (size_t r = 0; r < size_t(n); ++r) {
        int64_t v = 0;
        switch (role.kind) {
          case ColumnRole::Key: v = int64_t(r); break;
          case ColumnRole::ForeignKey: v = edge_values(role.edge)[r]; break;
          case ColumnRole::SharedAttr: v = int64_t(rng() % 16); break;
          case ColumnRole::Payload: v = int64_t(rng() % 1000003); break;
        }
        t.cells[r * rel.columns.size() + ci] = v;
      }
    }
    out.emplace(rel.name, std::move(t));
  }
  return out;
}

TableSet generate_snowflake_data(const SnowflakeShape& shape,
                                 const Catalog& catalog, uint64_t seed) {
  std::set<std::string> members;
  for (const std::string& r : shape.relations()) {
    catalog.relation(r);  // must exist
    members.insert(r);
  }
  Catalog sub;
  for (const Relation& r : catalog.relations)
    if (members.count(r.name)) sub.relations.push_back(r);
  for (const JoinEdge& e : catalog.edges)
    if (members.count(e.left) && members.count(e.right)) sub.edges.push_back(e);
  return generate_tables(sub, seed);
}

void measure_edge_selectivities(Catalog& catalog, const TableSet& tables) {
  auto semi = [&](const std::string& from_rel,
                  const std::vector<std::string>& from_cols,
                  const std::string& to_rel,
                  const std::vector<std::string>& to_cols) -> double {
    const Table& from = tables.at(from_rel);
    const Table& to = tables.at(to_rel);
    if (from.rows() == 0) return 1.0;
    std::vector<size_t> tidx, fidx;
    for (const std::string& c : to_cols) tidx.push_back(to.col_index(c));
    for (const std::string& c : from_cols) fidx.push_back(from.col_index(c));
    std::unordered_set<std::string> keys;
    std::vector<int64_t> key(tidx.size());
    for (size_t r = 0; r < to.rows(); ++r) {
      for (size_t i = 0; i < tidx.size(); ++i) key[i] = to.at(r, tidx[i]);
      keys.insert(pack_key(key.data(), key.size()));
    }
    size_t hits = 0;
    for (size_t r = 0; r < from.rows(); ++r) {
      for (size_t i = 0; i < fidx.size(); ++i) key[i] = from.at(r, fidx[i]);
      if (keys.count(pack_key(key.data(), key.size()))) ++hits;
    }
    return double(hits) / double(from.rows());
  };
  for (JoinEdge& e : catalog.edges) {
    e.sel_lr = semi(e.left, e.left_cols, e.right, e.right_cols);
    e.sel_rl = semi(e.right, e.right_cols, e.left, e.left_cols);
  }
}

// ---------------------------------------------------------------------------
// Break-even benchmark

BreakevenResult breakeven_benchmark(uint64_t fact_rows, uint64_t dim_rows,
                                    const std::vector<double>& grid,
                                    const FilterCostModel& model,
                                    uint64_t seed) {
  if (fact_rows == 0 || dim_rows == 0)
    throw ValidationError("benchmark relations must be non-empty");
  BreakevenResult res;
  for (size_t i = 0; i < grid.size(); ++i) {
    const double e = grid[i];
    if (!(e >= 0.0 && e < 1.0))
      throw ValidationError("eliminated fraction must be in [0,1)");
    Catalog cat;
    cat.relations.push_back({"F", fact_rows, {"fk", "pay"}, {}});
    cat.relations.push_back({"D", dim_rows, {"pk"}, {"pk"}});
    cat.edges.push_back(
        {"F", "D", {"fk"}, {"pk"}, PkFk::LeftToRight, 1.0 - e, 1.0});
    TableSet tables = generate_tables(cat, hash_combine(seed, i));
    JoinGraph g(cat);
    Plan with = push_down_bitvectors(right_deep(g, {"F", "D"}));
    Plan without = right_deep(g, {"F", "D"});

    BreakevenRow row;
    row.eliminated = e;
    auto t0 = std::chrono::steady_clock::now();
    ExecResult rw = execute(with, tables);
    auto t1 = std::chrono::steady_clock::now();
    ExecResult ro = execute(without, tables);
    auto t2 = std::chrono::steady_clock::now();
    row.cost_with = rw.metrics.simulated_cost(model);
    row.cost_without = ro.metrics.simulated_cost(model);
    row.wall_with_ns = double(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    row.wall_without_ns = double(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t2 - t1).count());
    if (rw.metrics.result_rows != ro.metrics.result_rows)
      throw Error("filtered and unfiltered plans disagree on result size");
    res.rows.push_back(row);
  }
  for (size_t i = 0; i < res.rows.size(); ++i) {
    const double d = res.rows[i].cost_with - res.rows[i].cost_without;
    if (d <= 0.0) {
      if (i == 0) {
        res.breakeven = res.rows[0].eliminated;
      } else {
        const double dp =
            res.rows[i - 1].cost_with - res.rows[i - 1].cost_without;
        const double e0 = res.rows[i - 1].eliminated;
        const double e1 = res.rows[i].eliminated;
        res.breakeven = e0 + (e1 - e0) * dp / (dp - d);
      }
      break;
    }
  }
  return res;
}

std::string breakeven_csv(const BreakevenResult& result) {
  std::string out = "e,cost_with,cost_without,wall_with_ns,wall_without_ns\n";
  char buf[32];
  for (const BreakevenRow& r : result.rows) {
    std::snprintf(buf, sizeof(buf), "%.2f", r.eliminated);
    out += buf;
    out += "," + format_number(r.cost_with);
    out += "," + format_number(r.cost_without);
    out += "," + std::to_string(std::llround(r.wall_with_ns));
    out += "," + std::to_string(std::llround(r.wall_without_ns));
    out += "\n";
  }
  return out;
}

}  // namespace bvqo
