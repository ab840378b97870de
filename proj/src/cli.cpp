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
#include "bvqo/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bvqo/catalog.hpp"
#include "bvqo/cost_model.hpp"
#include "bvqo/error.hpp"
#include "bvqo/executor.hpp"
#include "bvqo/optimizer.hpp"
#include "bvqo/oracle.hpp"
#include "bvqo/util.hpp"

namespace bvqo {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) out += ",";
    out += names[i];
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

uint64_t fold_seed(uint64_t seed, const std::string& text) {
  for (char ch : text)
    seed = hash_combine(seed, static_cast<uint64_t>(static_cast<uint8_t>(ch)));
  return seed;
}

}  // namespace

std::vector<std::string> canonical_order(const JoinGraph& g) {
  std::vector<std::string> names;
  for (const auto& r : g.catalog().relations) names.push_back(r.name);
  if (names.empty()) throw ValidationError("canonical_order: empty catalog");
  std::vector<std::string> order{names.front()};
  std::set<std::string> placed{names.front()};
  while (order.size() < names.size()) {
    std::string next;
    for (const auto& n : names) {
      if (placed.count(n)) continue;
      if (!g.edges_between(n, placed).empty()) {
        next = n;
        break;
      }
    }
    if (next.empty())
      for (const auto& n : names)
        if (!placed.count(n)) {
          next = n;
          break;
        }
    order.push_back(next);
    placed.insert(next);
  }
  return order;
}

int cmd_explain(const RunConfig& cfg, std::ostream& os) {
  Catalog cat = load_catalog_file(cfg.workload);
  JoinGraph g(cat);
  if (!g.connected())
    throw ValidationError("explain: join graph is disconnected");

  TableSet tables;
  std::unique_ptr<CardinalityProvider> provider;
  std::string provider_name;
  if (cfg.data_dir.empty()) {
    provider = std::make_unique<StatisticalProvider>(g);
    provider_name = "statistics";
  } else {
    tables = load_table_dir(cfg.data_dir, cat);
    provider = std::make_unique<ExactProvider>(g, tables);
    provider_name = "data";
  }

  Plan baseline = push_down_bitvectors(right_deep(g, canonical_order(g)),
                                       cfg.mode, cfg.fp_rate);
  OptimizeResult opt = optimize_join_graph(g, *provider, {}, cfg.mode,
                                           cfg.fp_rate);
  FilterCostModel model;
  Plan aware = gate_bitvectors(opt.plan, *provider, model, cfg.threshold);

  CostReport cb = cost_out(baseline, *provider);
  CostReport ca = cost_out(aware, *provider);
  double ratio = cb.total > 0 ? ca.total / cb.total : 1.0;

  if (cfg.json) {
    ordered_json j;
    j["shape"] = to_string(classify(g));
    j["provider"] = provider_name;
    j["baseline"] = {{"order", baseline.leaf_order()},
                     {"cout", cb.total},
                     {"filters", baseline.filters.size()},
                     {"plan", explain(baseline, &cb.per_node, &cb.total)}};
    j["aware"] = {{"order", aware.leaf_order()},
                  {"cout", ca.total},
                  {"filters", aware.filters.size()},
                  {"plan", explain(aware, &ca.per_node, &ca.total)}};
    j["ratio"] = ratio;
    os << j.dump(2) << "\n";
    return 0;
  }

  os << "shape: " << to_string(classify(g)) << "\n";
  os << "provider: " << provider_name << "\n";
  os << "baseline order: " << join_names(baseline.leaf_order()) << "\n";
  os << explain(baseline, &cb.per_node, &cb.total);
  os << "aware order: " << join_names(aware.leaf_order()) << "\n";
  os << explain(aware, &ca.per_node, &ca.total);
  os << "filters: baseline=" << baseline.filters.size()
     << " aware=" << aware.filters.size() << "\n";
  os << "cout ratio: " << fixed(ratio, 3) << "\n";
  return 0;
}

namespace {

std::string report_line(const VerificationReport& r) {
  std::ostringstream os;
  os << "verify " << to_string(r.kind) << " " << r.shape_desc << " seed="
     << r.seed << ": candidates=" << r.candidate_count
     << " enumerated=" << r.enumerated
     << " candidate_min=" << format_number(r.candidate_min)
     << " global_min=" << format_number(r.global_min)
     << " equal_cost_class=" << r.equal_cost_class
     << " crosscheck=" << (r.crosscheck_ok ? "ok" : "FAIL")
     << " verdict=" << to_string(r.verdict);
  if (r.verdict != Verdict::Holds)
    os << " candidate_best=" << r.candidate_best
       << " global_best=" << r.global_best;
  return os.str();
}

ordered_json report_json(const VerificationReport& r) {
  ordered_json j;
  j["kind"] = to_string(r.kind);
  j["shape"] = r.shape_desc;
  j["seed"] = r.seed;
  j["candidates"] = r.candidate_count;
  j["enumerated"] = r.enumerated;
  j["candidate_min"] = r.candidate_min;
  j["global_min"] = r.global_min;
  j["candidate_best"] = r.candidate_best;
  j["global_best"] = r.global_best;
  j["equal_cost_class"] = r.equal_cost_class;
  j["equal_cost_ok"] = r.equal_cost_ok;
  j["crosscheck_ok"] = r.crosscheck_ok;
  j["verdict"] = to_string(r.verdict);
  return j;
}

}  // namespace

int cmd_verify(const RunConfig& cfg, std::ostream& os) {
  std::vector<VerificationReport> reports;

  if (!cfg.workload.empty()) {
    Catalog cat = load_catalog_file(cfg.workload);
    JoinGraph g(cat);
    TableSet tables = cfg.data_dir.empty()
                          ? generate_tables(cat, cfg.seed)
                          : load_table_dir(cfg.data_dir, cat);
    ExactProvider provider(g, tables);
    VerificationReport rep = verify_theorem(g, provider, &tables, cfg.mode,
                                            cfg.fp_rate, cfg.cap);
    rep.seed = cfg.seed;
    reports.push_back(rep);
  } else {
    if (cfg.suite_min_rel < 2 || cfg.suite_max_rel < cfg.suite_min_rel ||
        cfg.suite_seeds < 1)
      throw ValidationError("verify: bad suite bounds");
    for (int n = cfg.suite_min_rel; n <= cfg.suite_max_rel; ++n) {
      auto parts = chain_partitions(n - 1);
      for (size_t pi = 0; pi < parts.size(); ++pi) {
        for (int s = 0; s < cfg.suite_seeds; ++s) {
          uint64_t seed = hash_combine(
              hash_combine(cfg.seed, static_cast<uint64_t>(n) * 131 + pi),
              static_cast<uint64_t>(s));
          GeneratedWorkload wl = random_snowflake_workload(parts[pi], seed);
          JoinGraph g(wl.catalog);
          ExactProvider provider(g, wl.tables);
          VerificationReport rep = verify_theorem(
              g, provider, &wl.tables, cfg.mode, cfg.fp_rate, cfg.cap);
          rep.seed = seed;
          reports.push_back(rep);
        }
      }
    }
  }

  size_t bad = 0;
  for (const auto& r : reports)
    if (r.verdict != Verdict::Holds) ++bad;

  if (cfg.json) {
    ordered_json j;
    j["reports"] = ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(report_json(r));
    j["counterexamples"] = bad;
    j["advisory"] = (cfg.mode == FilterMode::Lossy);
    os << j.dump(2) << "\n";
  } else {
    for (const auto& r : reports) os << report_line(r) << "\n";
    if (reports.size() > 1) {
      os << "suite: " << reports.size() << " workloads, counterexamples="
         << bad;
      if (cfg.mode == FilterMode::Lossy) os << " (advisory)";
      os << "\n";
    }
  }
  if (bad > 0 && cfg.mode == FilterMode::Perfect) return 3;
  return 0;
}

int cmd_bench(const RunConfig& cfg, std::ostream& os) {
  FilterCostModel model;
  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(0.05 * i);
  BreakevenResult res =
      breakeven_benchmark(cfg.bench_fact, cfg.bench_dim, grid, model, cfg.seed);

  if (!cfg.out_path.empty()) {
    std::ofstream f(cfg.out_path, std::ios::binary);
    if (!f) throw Error("bench: cannot write " + cfg.out_path);
    f << breakeven_csv(res);
  }

  if (cfg.json) {
    ordered_json j;
    j["fact"] = cfg.bench_fact;
    j["dim"] = cfg.bench_dim;
    j["probe_cost"] = model.probe_cost;
    j["filter_cost"] = model.filter_cost;
    j["rows"] = ordered_json::array();
    for (const auto& r : res.rows)
      j["rows"].push_back({{"e", r.eliminated},
                           {"cost_with", r.cost_with},
                           {"cost_without", r.cost_without}});
    j["analytic_breakeven"] = elimination_breakeven(model);
    if (res.breakeven < 0)
      j["measured_breakeven"] = nullptr;
    else
      j["measured_breakeven"] = res.breakeven;
    os << j.dump(2) << "\n";
    return 0;
  }

  os << "bench: fact=" << cfg.bench_fact << " dim=" << cfg.bench_dim
     << " probe_cost=" << format_number(model.probe_cost)
     << " filter_cost=" << format_number(model.filter_cost) << "\n";
  for (const auto& r : res.rows)
    os << "e=" << fixed(r.eliminated, 2)
       << " cost_with=" << format_number(r.cost_with)
       << " cost_without=" << format_number(r.cost_without) << "\n";
  os << "analytic breakeven: " << fixed(elimination_breakeven(model), 3)
     << "\n";
  os << "measured breakeven: "
     << (res.breakeven < 0 ? std::string("none") : fixed(res.breakeven, 3))
     << "\n";
  return 0;
}

namespace {

struct QueryRow {
  std::string name;
  double base_cost = 0.0;
  double aware_cost = 0.0;
  uint64_t base_join = 0, aware_join = 0;
  uint64_t base_leaf = 0, aware_leaf = 0;
  uint64_t rows = 0;
};

}  // namespace

int cmd_compare(const RunConfig& cfg, std::ostream& os) {
  namespace fs = std::filesystem;
  fs::path dir(cfg.workload);
  if (!fs::is_directory(dir))
    throw ValidationError("compare: not a directory: " + cfg.workload);
  std::vector<fs::path> files;
  for (const auto& ent : fs::directory_iterator(dir))
    if (ent.path().extension() == ".json") files.push_back(ent.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ValidationError("compare: no .json workloads in " + cfg.workload);

  FilterCostModel model;
  std::vector<QueryRow> rows;
  for (const auto& file : files) {
    QueryRow q;
    q.name = file.stem().string();
    Catalog cat = load_catalog_file(file.string());
    JoinGraph g(cat);
    TableSet tables = generate_tables(cat, fold_seed(cfg.seed, q.name));
    ExactProvider provider(g, tables);

    Plan baseline = push_down_bitvectors(right_deep(g, canonical_order(g)),
                                         cfg.mode, cfg.fp_rate);
    OptimizeResult opt =
        optimize_join_graph(g, provider, {}, cfg.mode, cfg.fp_rate);
    Plan aware = gate_bitvectors(opt.plan, provider, model, cfg.threshold);

    ExecResult rb = execute(baseline, tables);
    ExecResult ra = execute(aware, tables);
    if (rb.metrics.result_rows != ra.metrics.result_rows)
      throw Error("compare: result size mismatch on " + q.name);

    q.base_cost = rb.metrics.simulated_cost(model);
    q.aware_cost = ra.metrics.simulated_cost(model);
    auto bb = rb.metrics.tuple_breakdown();
    auto ab = ra.metrics.tuple_breakdown();
    q.base_join = bb["Join"];
    q.aware_join = ab["Join"];
    q.base_leaf = bb["Leaf"];
    q.aware_leaf = ab["Leaf"];
    q.rows = rb.metrics.result_rows;
    rows.push_back(std::move(q));
  }

  // Size classes by baseline cost: small third, middle, large third.
  std::vector<size_t> by_cost(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) by_cost[i] = i;
  std::stable_sort(by_cost.begin(), by_cost.end(), [&](size_t a, size_t b) {
    if (rows[a].base_cost != rows[b].base_cost)
      return rows[a].base_cost < rows[b].base_cost;
    return rows[a].name < rows[b].name;
  });
  size_t third = rows.size() / 3;
  struct Group {
    std::string name;
    std::vector<size_t> members;
    double base = 0.0, aware = 0.0;
  };
  std::vector<Group> groups{{"S", {}, 0, 0}, {"M", {}, 0, 0}, {"L", {}, 0, 0}};
  for (size_t pos = 0; pos < by_cost.size(); ++pos) {
    size_t gi = pos < third ? 0 : (pos < by_cost.size() - third ? 1 : 2);
    groups[gi].members.push_back(by_cost[pos]);
    groups[gi].base += rows[by_cost[pos]].base_cost;
    groups[gi].aware += rows[by_cost[pos]].aware_cost;
  }

  double total_base = 0, total_aware = 0;
  uint64_t join_base = 0, join_aware = 0;
  for (const auto& q : rows) {
    total_base += q.base_cost;
    total_aware += q.aware_cost;
    join_base += q.base_join;
    join_aware += q.aware_join;
  }
  double join_ratio =
      join_base > 0 ? static_cast<double>(join_aware) / join_base : 1.0;

  if (cfg.json) {
    ordered_json j;
    j["queries"] = ordered_json::array();
    for (const auto& q : rows) {
      double ratio = q.base_cost > 0 ? q.aware_cost / q.base_cost : 1.0;
      j["queries"].push_back({{"name", q.name},
                              {"baseline", q.base_cost},
                              {"aware", q.aware_cost},
                              {"ratio", ratio},
                              {"join_baseline", q.base_join},
                              {"join_aware", q.aware_join},
                              {"leaf_baseline", q.base_leaf},
                              {"leaf_aware", q.aware_leaf},
                              {"rows", q.rows}});
    }
    j["groups"] = ordered_json::array();
    for (const auto& grp : groups) {
      if (grp.members.empty()) continue;
      ordered_json names = ordered_json::array();
      for (size_t i : grp.members) names.push_back(rows[i].name);
      j["groups"].push_back({{"name", grp.name},
                             {"queries", names},
                             {"baseline", grp.base},
                             {"aware", grp.aware}});
    }
    j["total"] = {{"baseline", total_base},
                  {"aware", total_aware},
                  {"join_ratio", join_ratio}};
    os << j.dump(2) << "\n";
    return 0;
  }

  for (const auto& q : rows) {
    double ratio = q.base_cost > 0 ? q.aware_cost / q.base_cost : 1.0;
    os << q.name << " baseline=" << format_number(q.base_cost)
       << " aware=" << format_number(q.aware_cost)
       << " ratio=" << fixed(ratio, 3) << " join " << q.base_join << "->"
       << q.aware_join << " leaf " << q.base_leaf << "->" << q.aware_leaf
       << " rows=" << q.rows << "\n";
  }
  for (const auto& grp : groups) {
    if (grp.members.empty()) continue;
    double change = grp.base > 0 ? (grp.aware / grp.base - 1.0) * 100.0 : 0.0;
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%+.1f%%", change);
    os << "group " << grp.name << " (" << grp.members.size()
       << " queries): cost " << format_number(grp.base) << " -> "
       << format_number(grp.aware) << " (" << pct << ")\n";
  }
  double total_change =
      total_base > 0 ? (total_aware / total_base - 1.0) * 100.0 : 0.0;
  char pct[32];
  std::snprintf(pct, sizeof(pct), "%+.1f%%", total_change);
  os << "total: cost " << format_number(total_base) << " -> "
     << format_number(total_aware) << " (" << pct << "), join tuples "
     << fixed(join_ratio, 2) << "x\n";
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"bitvector-aware join order planning toolkit"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string mode_arg = "perfect";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "rng seed")->envname("BVQO_SEED");
    sub->add_option("--filter-mode", mode_arg,
                    "'perfect', 'lossy', or 'lossy:<fp_rate>'");
    sub->add_flag("--json", cfg.json, "machine readable output");
  };

  CLI::App* explain_cmd =
      app.add_subcommand("explain", "plan a workload both ways and print them");
  explain_cmd->add_option("workload", cfg.workload, "catalog json file")
      ->required();
  explain_cmd->add_option("--data", cfg.data_dir, "directory of csv tables");
  explain_cmd->add_option("--threshold", cfg.threshold,
                          "minimum marginal elimination to keep a filter");
  add_common(explain_cmd);

  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "brute-force check of the plan space guarantees");
  verify_cmd->add_option("workload", cfg.workload,
                         "catalog json file (omit to run the generated suite)");
  verify_cmd->add_option("--data", cfg.data_dir, "directory of csv tables");
  verify_cmd->add_option("--cap", cfg.cap, "enumeration cap (relations)");
  verify_cmd->add_option("--suite-seeds", cfg.suite_seeds,
                         "generated suite: seeds per shape");
  verify_cmd->add_option("--suite-min", cfg.suite_min_rel,
                         "generated suite: smallest relation count");
  verify_cmd->add_option("--suite-max", cfg.suite_max_rel,
                         "generated suite: largest relation count");
  add_common(verify_cmd);

  CLI::App* bench_cmd =
      app.add_subcommand("bench", "filter break-even micro benchmark");
  bench_cmd->add_option("--fact", cfg.bench_fact, "probe side rows");
  bench_cmd->add_option("--dim", cfg.bench_dim, "build side rows");
  bench_cmd->add_option("--out", cfg.out_path,
                        "also write csv (with wall clock columns) here");
  add_common(bench_cmd);

  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "run a directory of workloads both ways on generated data");
  compare_cmd
      ->add_option("workloads", cfg.workload, "directory of catalog json files")
      ->required();
  compare_cmd->add_option("--threshold", cfg.threshold,
                          "minimum marginal elimination to keep a filter");
  add_common(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (mode_arg == "perfect") {
      cfg.mode = FilterMode::Perfect;
      cfg.fp_rate = 0.0;
    } else if (mode_arg == "lossy") {
      cfg.mode = FilterMode::Lossy;
      cfg.fp_rate = 0.01;
    } else if (mode_arg.rfind("lossy:", 0) == 0) {
      try {
        cfg.fp_rate = std::stod(mode_arg.substr(6));
      } catch (const std::exception&) {
        throw ValidationError("--filter-mode: cannot parse fp rate");
      }
      if (!(cfg.fp_rate > 0.0 && cfg.fp_rate < 0.5))
        throw ValidationError("--filter-mode: fp rate must be in (0, 0.5)");
      cfg.mode = FilterMode::Lossy;
    } else {
      throw ValidationError(
          "--filter-mode must be 'perfect', 'lossy', or 'lossy:<fp_rate>'");
    }

    if (explain_cmd->parsed()) return cmd_explain(cfg, std::cout);
    if (verify_cmd->parsed()) return cmd_verify(cfg, std::cout);
    if (bench_cmd->parsed()) return cmd_bench(cfg, std::cout);
    if (compare_cmd->parsed()) return cmd_compare(cfg, std::cout);
    throw Error("no subcommand dispatched");
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace bvqo
