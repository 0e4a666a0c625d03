#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pbbench/pbbench.hpp"

namespace {

using namespace pbbench;

constexpr const char* kDefaultBenchName = "publication-bias-bench";
constexpr const char* kDgmProvenance =
    "step-selection SMD engine, generator sha256-xoshiro256pp-as241/1";

std::string today(bool frozen) {
  if (frozen) return "1970-01-01";
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[16];
  std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
  return buf;
}

std::string build_environment() {
  return std::string("gcc ") + __VERSION__ + ", c++20";
}

// Adds or version-bumps a component; a same-version re-registration is a no-op.
bool ensure_registered(BenchStore& store, ComponentKind kind, const ComponentEntry& entry) {
  auto manifest = store.manifest();
  if (const auto* existing = manifest.find(kind, entry.id)) {
    if (!version_less(existing->version, entry.version)) return false;
  }
  manifest = register_component(std::move(manifest), kind, entry);
  store.save_manifest(manifest);
  return true;
}

int fail(const Error& e) {
  std::fprintf(stderr, "error [%s]: %s\n", errc_name(e.code()), e.what());
  return 1;
}

int usage_error(const std::string& msg) {
  std::fprintf(stderr, "usage error: %s\n", msg.c_str());
  return 2;
}

struct GlobalFlags {
  std::string root;
  int jobs = 1;
  bool frozen_time = false;
  bool force = false;
};

int cmd_init(const GlobalFlags& g, const std::string& name) {
  try {
    auto store = BenchStore::init(g.root, name);
    std::printf("initialized benchmark '%s' at %s\n", name.c_str(),
                store.root().string().c_str());
    return 0;
  } catch (const Error& e) {
    return fail(e);
  }
}

int cmd_simulate(const GlobalFlags& g, const std::string& dgm_id, int reps, std::uint64_t seed,
                 const std::string& grid) {
  try {
    BenchStore store(g.root);
    std::vector<Condition> conditions =
        grid == "default" ? default_grid() : read_conditions_csv(grid);

    ComponentEntry entry{dgm_id, "1.0.0", ComponentStatus::active, kDgmProvenance,
                         today(g.frozen_time)};
    ensure_registered(store, ComponentKind::dgm, entry);

    int written = generate_dgm(store, dgm_id, entry.version, conditions, reps, seed, g.jobs,
                               g.force);
    if (written == 0) {
      std::printf("up-to-date, no files written\n");
      return 0;
    }
    std::uintmax_t bytes = 0;
    for (const auto& c : conditions)
      bytes += fs::file_size(store.data_path(dgm_id, c.condition_id));
    std::printf("%zu conditions, %d data files written, %" PRIuMAX " bytes total\n",
                conditions.size(), written, bytes);
    return 0;
  } catch (const Error& e) {
    return fail(e);
  }
}

int cmd_run(const GlobalFlags& g, const std::string& method_id, const std::string& dgm_id,
            double alpha, const std::vector<std::string>& opts) {
  const auto* info = find_method(method_id);
  if (!info) {
    std::string ids;
    for (const auto& id : method_ids()) ids += " " + id;
    return usage_error("unknown method '" + method_id + "'; registered:" + ids);
  }
  MethodSpec spec;
  spec.id = method_id;
  spec.version = info->version;
  spec.alpha = alpha;
  for (const auto& kv : opts) {
    auto eq = kv.find('=');
    double v;
    if (eq == std::string::npos || !csv::parse_double(kv.substr(eq + 1), v))
      return usage_error("bad --opt '" + kv + "', expected key=value");
    spec.options[kv.substr(0, eq)] = v;
  }
  try {
    BenchStore store(g.root);
    ComponentEntry entry{method_id, spec.version, ComponentStatus::active,
                         "builtin estimator", today(g.frozen_time)};
    ensure_registered(store, ComponentKind::method, entry);
    auto meta = entry_to_json(entry);
    meta["environment"] = build_environment();
    fs::create_directories(store.method_meta_path(method_id).parent_path());
    csv::atomic_write_file(store.method_meta_path(method_id), meta.dump(2) + "\n");

    int written = run_method(store, dgm_id, spec, g.jobs, g.force);
    if (written == 0) {
      std::printf("up-to-date, no files written\n");
      return 0;
    }
    std::printf("%-28s %10s\n", "condition", "converged");
    for (const auto& cid : store.condition_ids(dgm_id)) {
      auto records = read_results_csv(store.results_path(dgm_id, method_id, cid));
      long conv = 0;
      for (const auto& r : records) conv += r.converged;
      std::printf("%-28s %6ld/%zu\n", cid.c_str(), conv, records.size());
    }
    return 0;
  } catch (const Error& e) {
    return fail(e);
  }
}

int cmd_measure(const GlobalFlags& g, const std::string& dgm_id,
                std::vector<std::string> measures, const std::string& strategy_str,
                bool recompute) {
  auto strategy = MissingnessStrategy::parse(strategy_str);
  if (!strategy) return usage_error("invalid strategy '" + strategy_str + "'");
  if (measures.empty()) measures = measure_ids();
  for (const auto& id : measures)
    if (!find_measure(id)) return usage_error("unknown measure '" + id + "'");
  try {
    BenchStore store(g.root);
    long cells = compute_measures(store, dgm_id, measures, *strategy, g.jobs, recompute);
    if (cells == 0)
      std::printf("up-to-date, no cells recomputed\n");
    else
      std::printf("%ld cells computed across %zu measures\n", cells, measures.size());
    return 0;
  } catch (const Error& e) {
    return fail(e);
  }
}

int cmd_leaderboard(const GlobalFlags& g, const std::string& dgm_id, const std::string& measure,
                    const std::string& strategy_str, const std::string& mode_str,
                    bool include_deprecated) {
  auto strategy = MissingnessStrategy::parse(strategy_str);
  if (!strategy) return usage_error("invalid strategy '" + strategy_str + "'");
  auto mode = parse_aggregate_mode(mode_str);
  if (!mode) return usage_error("invalid mode '" + mode_str + "'");
  if (!find_measure(measure)) return usage_error("unknown measure '" + measure + "'");
  try {
    BenchStore store(g.root);
    auto path = store.measure_path(dgm_id, measure);
    bool needs_compute = !fs::exists(path);
    if (!needs_compute) {
      auto rows = read_measure_csv(path);
      for (const auto& r : rows)
        if (r.strategy_label != strategy->label()) needs_compute = true;
    }
    if (needs_compute) {
      std::printf("measure '%s' not computed under strategy '%s'; computing\n", measure.c_str(),
                  strategy->label().c_str());
      compute_measures(store, dgm_id, {measure}, *strategy, g.jobs, false);
    }
    auto rows = build_leaderboard(store, dgm_id, measure, *strategy, *mode, include_deprecated);
    write_leaderboard_csv(store, dgm_id, measure, *strategy, *mode, rows);
    std::printf("%-4s %-12s %10s %8s\n", "rank", "method", "mean_rank", "n_cells");
    for (std::size_t i = 0; i < rows.size() && i < 10; ++i)
      std::printf("%-4zu %-12s %10.4g %8ld\n", i + 1, rows[i].method_id.c_str(),
                  rows[i].mean_rank, rows[i].n_cells);
    return 0;
  } catch (const Error& e) {
    return fail(e);
  }
}

int cmd_report(const GlobalFlags& g, const std::string& out) {
  try {
    BenchStore store(g.root);
    fs::path out_dir = out.empty() ? store.root() / "report" : fs::path(out);
    write_report(store, out_dir);
    std::printf("report written to %s\n", out_dir.string().c_str());
    return 0;
  } catch (const Error& e) {
    return fail(e);
  }
}

int cmd_validate(const GlobalFlags& g, const std::string& dgm_id, const std::string& method_id) {
  try {
    BenchStore store(g.root);
    auto report = validate_submission(store, dgm_id, method_id);
    for (const auto& c : report.conditions) {
      if (c.ok)
        std::printf("ok   %-28s %d rows, convergence %.4g\n", c.condition_id.c_str(),
                    c.rows_found, c.convergence_rate);
      else
        std::printf("FAIL %-28s %s\n", c.condition_id.c_str(), c.message.c_str());
    }
    std::printf("%s: %s on %s\n", report.pass ? "pass" : "fail", method_id.c_str(),
                dgm_id.c_str());
    return report.pass ? 0 : 1;
  } catch (const Error& e) {
    return fail(e);
  }
}

int cmd_retire(const GlobalFlags& g, const std::string& method_id, const std::string& dgm_id,
               const std::string& measure_id) {
  int given = !method_id.empty() + !dgm_id.empty() + !measure_id.empty();
  if (given != 1) return usage_error("pass exactly one of --method, --dgm, --measure");
  ComponentKind kind = !method_id.empty()  ? ComponentKind::method
                       : !dgm_id.empty()   ? ComponentKind::dgm
                                           : ComponentKind::measure;
  const std::string& id = !method_id.empty() ? method_id : !dgm_id.empty() ? dgm_id : measure_id;
  try {
    BenchStore store(g.root);
    auto manifest = store.manifest();
    manifest = retire_component(std::move(manifest), kind, id);
    store.save_manifest(manifest);
    std::printf("%s '%s' retired\n", kind_name(kind), id.c_str());
    return 0;
  } catch (const Error& e) {
    return fail(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"living synthetic benchmark for publication-bias adjustment methods"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--root", g.root, "benchmark root directory")
      ->envname("BENCH_ROOT")
      ->required();
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--frozen-time", g.frozen_time, "pin timestamps for reproducible output");
  app.add_flag("--force", g.force, "overwrite write-once files");

  auto* init = app.add_subcommand("init", "create an empty benchmark root");
  std::string bench_name = kDefaultBenchName;
  init->add_option("--name", bench_name, "benchmark name");

  auto* simulate = app.add_subcommand("simulate", "generate a DGM's data files");
  std::string dgm_id, grid = "default";
  int reps = 1000;
  std::uint64_t seed = 42;
  simulate->add_option("--dgm", dgm_id, "DGM id")->required();
  simulate->add_option("--reps", reps, "repetitions per condition")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "root seed");
  simulate->add_option("--grid", grid, "'default' or a conditions CSV path");

  auto* run = app.add_subcommand("run", "run a method over a DGM's data");
  std::string method_id;
  double alpha = 0.05;
  std::vector<std::string> opts;
  run->add_option("--method", method_id, "method id")->required();
  run->add_option("--dgm", dgm_id, "DGM id")->required();
  run->add_option("--alpha", alpha, "CI and test level");
  run->add_option("--opt", opts, "method option key=value");

  auto* measure = app.add_subcommand("measure", "compute performance measures");
  std::vector<std::string> measure_list;
  std::string strategy_str = "method_wise";
  bool recompute = false;
  measure->add_option("--dgm", dgm_id, "DGM id")->required();
  measure->add_option("--measure", measure_list, "measure ids (default: all)");
  measure->add_option("--strategy", strategy_str, "missingness strategy");
  measure->add_flag("--recompute", recompute, "recompute every cell");

  auto* leaderboard = app.add_subcommand("leaderboard", "rank methods on a measure");
  std::string mode_str = "by_condition";
  std::string one_measure;
  bool include_deprecated = false;
  leaderboard->add_option("--dgm", dgm_id, "DGM id")->required();
  leaderboard->add_option("--measure", one_measure, "measure id")->required();
  leaderboard->add_option("--strategy", strategy_str, "missingness strategy");
  leaderboard->add_option("--mode", mode_str, "by_condition or by_set");
  leaderboard->add_flag("--include-deprecated", include_deprecated,
                        "rank deprecated methods too");

  auto* report = app.add_subcommand("report", "emit the static HTML report");
  std::string out;
  report->add_option("--out", out, "output directory (default <root>/report)");

  auto* validate = app.add_subcommand("validate", "check a submission's result files");
  validate->add_option("--dgm", dgm_id, "DGM id")->required();
  validate->add_option("--method", method_id, "method id")->required();

  auto* retire = app.add_subcommand("retire", "mark a component deprecated");
  std::string retire_method, retire_dgm, retire_measure;
  retire->add_option("--method", retire_method, "method id");
  retire->add_option("--dgm", retire_dgm, "DGM id");
  retire->add_option("--measure", retire_measure, "measure id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (init->parsed()) return cmd_init(g, bench_name);
  if (simulate->parsed()) return cmd_simulate(g, dgm_id, reps, seed, grid);
  if (run->parsed()) return cmd_run(g, method_id, dgm_id, alpha, opts);
  if (measure->parsed()) return cmd_measure(g, dgm_id, measure_list, strategy_str, recompute);
  if (leaderboard->parsed())
    return cmd_leaderboard(g, dgm_id, one_measure, strategy_str, mode_str, include_deprecated);
  if (report->parsed()) return cmd_report(g, out);
  if (validate->parsed()) return cmd_validate(g, dgm_id, method_id);
  if (retire->parsed()) return cmd_retire(g, retire_method, retire_dgm, retire_measure);
  return 2;
}
