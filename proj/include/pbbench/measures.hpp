#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pbbench/dgm.hpp"
#include "pbbench/manifest.hpp"
#include "pbbench/missingness.hpp"
#include "pbbench/parallel.hpp"
#include "pbbench/stats.hpp"
#include "pbbench/store.hpp"

namespace pbbench {

enum class Direction { lower_better, higher_better, target };

struct MeasureSpec {
  std::string id;
  Direction direction = Direction::lower_better;
  double target_value = 0;  // meaningful for Direction::target only
  bool scale_dependent = false;
};

inline const std::vector<MeasureSpec>& measure_registry() {
  static const std::vector<MeasureSpec> reg = {
      {"bias", Direction::target, 0.0, true},
      {"relative_bias", Direction::target, 0.0, false},
      {"rmse", Direction::lower_better, 0, true},
      {"log_se_sd", Direction::target, 0.0, false},
      {"coverage", Direction::target, 0.95, false},
      {"ci_width", Direction::lower_better, 0, true},
      {"interval_score", Direction::lower_better, 0, true},
      {"type1_error", Direction::target, 0.05, false},
      {"power", Direction::higher_better, 0, false},
      {"lr_plus", Direction::higher_better, 0, false},
      {"lr_minus", Direction::lower_better, 0, false},
      {"convergence", Direction::higher_better, 0, false},
  };
  return reg;
}

inline const MeasureSpec* find_measure(const std::string& id) {
  for (const auto& m : measure_registry())
    if (m.id == id) return &m;
  return nullptr;
}

inline std::vector<std::string> measure_ids() {
  std::vector<std::string> ids;
  for (const auto& m : measure_registry()) ids.push_back(m.id);
  return ids;
}

struct MeasureValue {
  std::string method_id;
  std::string condition_id;
  std::optional<double> value;
  std::optional<double> mcse;
  long n_used = 0;
  std::string strategy_label;
};

inline constexpr const char* kMeasureHeader =
    "method_id,condition_id,value,mcse,n_used,missingness_strategy";

inline std::string render_measure_row(const MeasureValue& v) {
  std::string out = v.method_id;
  out += ',';
  out += v.condition_id;
  out += ',';
  if (v.value) out += csv::format_double(*v.value);
  out += ',';
  if (v.mcse) out += csv::format_double(*v.mcse);
  out += ',';
  out += csv::format_int(v.n_used);
  out += ',';
  out += v.strategy_label;
  return out;
}

inline MeasureValue parse_measure_row(const fs::path& path, std::size_t line_no,
                                      std::string_view line) {
  std::vector<std::string_view> f;
  csv::split(line, f);
  if (f.size() != 6) detail::schema_error(path, line_no, "expected 6 fields");
  MeasureValue v;
  v.method_id = std::string(f[0]);
  v.condition_id = std::string(f[1]);
  if (!f[2].empty()) {
    double x;
    if (!csv::parse_double(f[2], x)) detail::schema_error(path, line_no, "non-numeric value");
    v.value = x;
  }
  if (!f[3].empty()) {
    double x;
    if (!csv::parse_double(f[3], x)) detail::schema_error(path, line_no, "non-numeric mcse");
    v.mcse = x;
  }
  long long n;
  if (!csv::parse_int(f[4], n)) detail::schema_error(path, line_no, "non-numeric n_used");
  v.n_used = static_cast<long>(n);
  v.strategy_label = std::string(f[5]);
  return v;
}

inline std::vector<MeasureValue> read_measure_csv(const fs::path& path) {
  auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != kMeasureHeader)
    detail::schema_error(path, 1, "bad header, expected '" + std::string(kMeasureHeader) + "'");
  std::vector<MeasureValue> rows;
  for (std::size_t i = 1; i < lines.size(); ++i)
    rows.push_back(parse_measure_row(path, i + 1, lines[i]));
  return rows;
}

// --- per-cell computation -----------------------------------------------------------

// Everything one cell's measures can depend on. `surviving` holds the records
// left by the missingness strategy (all converged); `counterpart_surviving` is
// the same method's surviving records on the null counterpart condition.
struct CellContext {
  const std::vector<ResultRecord>* surviving = nullptr;
  const std::vector<ResultRecord>* counterpart_surviving = nullptr;
  long total_records = 0;      // pre-strategy repetition count
  long converged_records = 0;  // pre-strategy
  double mu = 0;
  double alpha = 0.05;
};

namespace detail {

inline double jackknife_se(const std::vector<double>& leave_one_out) {
  double n = static_cast<double>(leave_one_out.size());
  double m = stats::mean(leave_one_out);
  double ss = 0;
  for (double v : leave_one_out) ss += (v - m) * (v - m);
  return std::sqrt((n - 1) / n * ss);
}

inline double binom_mcse(double p, long n) { return std::sqrt(p * (1 - p) / n); }

// Rejection rate over records carrying a p-value; count = records used.
inline std::pair<double, long> rejection_rate(const std::vector<ResultRecord>& records,
                                              double alpha) {
  long n = 0, hits = 0;
  for (const auto& r : records) {
    if (!r.p_value) continue;
    ++n;
    if (*r.p_value <= alpha) ++hits;
  }
  return {n ? static_cast<double>(hits) / n : 0.0, n};
}

}  // namespace detail

inline MeasureValue compute_cell(const std::string& measure_id, const CellContext& ctx) {
  MeasureValue out;
  const auto& recs = *ctx.surviving;
  const long n = static_cast<long>(recs.size());

  auto missing = [&] {
    out.value.reset();
    out.mcse.reset();
    out.n_used = 0;
    return out;
  };

  if (measure_id == "convergence") {
    if (ctx.total_records == 0) return missing();
    double p = static_cast<double>(ctx.converged_records) / ctx.total_records;
    out.value = p;
    out.mcse = detail::binom_mcse(p, ctx.total_records);
    out.n_used = ctx.total_records;
    return out;
  }

  std::vector<double> est;
  est.reserve(n);
  for (const auto& r : recs) est.push_back(*r.estimate);

  if (measure_id == "bias" || measure_id == "relative_bias") {
    if (n < 1) return missing();
    if (measure_id == "relative_bias" && ctx.mu == 0) return missing();
    double scale = measure_id == "relative_bias" ? ctx.mu : 1.0;
    out.value = (stats::mean(est) - ctx.mu) / scale;
    if (n >= 2) out.mcse = stats::sample_sd(est) / std::sqrt(n) / std::abs(scale);
    out.n_used = n;
    return out;
  }

  if (measure_id == "rmse") {
    if (n < 1) return missing();
    double ss = 0;
    for (double e : est) ss += (e - ctx.mu) * (e - ctx.mu);
    out.value = std::sqrt(ss / n);
    if (n >= 2) {
      std::vector<double> loo;
      loo.reserve(n);
      for (double e : est) loo.push_back(std::sqrt((ss - (e - ctx.mu) * (e - ctx.mu)) / (n - 1)));
      out.mcse = detail::jackknife_se(loo);
    }
    out.n_used = n;
    return out;
  }

  if (measure_id == "log_se_sd") {
    if (n < 2) return missing();
    for (const auto& r : recs)
      if (!r.se) return missing();  // converged submissions may omit se
    double sd = stats::sample_sd(est);
    if (!(sd > 0)) return missing();
    double se_sum = 0;
    for (const auto& r : recs) se_sum += *r.se;
    out.value = std::log(se_sum / n / sd);
    if (n >= 3) {
      // Leave-one-out variance by the centered update: removing x_i from a set
      // with mean m and centered sum of squares css leaves css - n/(n-1)*(x_i-m)^2.
      double m = stats::mean(est);
      double css = 0;
      for (double e : est) css += (e - m) * (e - m);
      std::vector<double> loo;
      loo.reserve(n);
      bool usable = true;
      for (long i = 0; i < n; ++i) {
        double d = est[i] - m;
        double mean_se = (se_sum - *recs[i].se) / (n - 1);
        double var = (css - d * d * n / (n - 1)) / (n - 2);
        if (!(var > 0)) {
          usable = false;
          break;
        }
        loo.push_back(std::log(mean_se / std::sqrt(var)));
      }
      if (usable) out.mcse = detail::jackknife_se(loo);
    }
    out.n_used = n;
    return out;
  }

  if (measure_id == "coverage") {
    if (n < 1) return missing();
    long hits = 0;
    for (const auto& r : recs)
      if (*r.ci_lower <= ctx.mu && ctx.mu <= *r.ci_upper) ++hits;
    double p = static_cast<double>(hits) / n;
    out.value = p;
    out.mcse = detail::binom_mcse(p, n);
    out.n_used = n;
    return out;
  }

  if (measure_id == "ci_width" || measure_id == "interval_score") {
    if (n < 1) return missing();
    std::vector<double> per_rep;
    per_rep.reserve(n);
    for (const auto& r : recs) {
      double w = *r.ci_upper - *r.ci_lower;
      if (measure_id == "interval_score") {
        if (ctx.mu < *r.ci_lower) w += 2 / ctx.alpha * (*r.ci_lower - ctx.mu);
        if (ctx.mu > *r.ci_upper) w += 2 / ctx.alpha * (ctx.mu - *r.ci_upper);
      }
      per_rep.push_back(w);
    }
    out.value = stats::mean(per_rep);
    if (n >= 2) out.mcse = stats::sample_sd(per_rep) / std::sqrt(n);
    out.n_used = n;
    return out;
  }

  if (measure_id == "type1_error" || measure_id == "power") {
    bool is_null = ctx.mu == 0;
    if (measure_id == "type1_error" ? !is_null : is_null) return missing();
    auto [p, used] = detail::rejection_rate(recs, ctx.alpha);
    if (used < 1) return missing();
    out.value = p;
    out.mcse = detail::binom_mcse(p, used);
    out.n_used = used;
    return out;
  }

  if (measure_id == "lr_plus" || measure_id == "lr_minus") {
    if (ctx.mu == 0 || !ctx.counterpart_surviving) return missing();
    auto [pow_hat, n_pow] = detail::rejection_rate(recs, ctx.alpha);
    auto [alpha_hat, n_alpha] = detail::rejection_rate(*ctx.counterpart_surviving, ctx.alpha);
    if (n_pow < 1 || n_alpha < 1) return missing();
    out.n_used = n_pow;
    double vp = pow_hat * (1 - pow_hat) / n_pow;
    double va = alpha_hat * (1 - alpha_hat) / n_alpha;
    if (measure_id == "lr_plus") {
      if (alpha_hat == 0) {
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
      out.value = pow_hat / alpha_hat;
      out.mcse = std::sqrt(vp / (alpha_hat * alpha_hat) +
                           va * pow_hat * pow_hat / std::pow(alpha_hat, 4));
    } else {
      if (alpha_hat == 1) {
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
      double om = 1 - alpha_hat;
      out.value = (1 - pow_hat) / om;
      out.mcse = std::sqrt(vp / (om * om) + va * (1 - pow_hat) * (1 - pow_hat) / std::pow(om, 4));
    }
    return out;
  }

  raise(Errc::not_found, "unknown measure '" + measure_id + "'");
}

// --- orchestration --------------------------------------------------------------------

namespace detail {

struct ConditionTables {
  std::map<std::string, std::vector<ResultRecord>> surviving;  // per method
  std::map<std::string, std::pair<long, long>> totals;         // method -> (all, converged)
};

}  // namespace detail

// Computes the requested measure files for one DGM. Cells whose existing rows
// were produced under the same strategy are kept byte-for-byte; only absent or
// stale cells are recomputed (repetition-wise deletion couples methods, so it
// always recomputes). Returns the number of cells recomputed.
inline long compute_measures(const BenchStore& store, const std::string& dgm_id,
                             const std::vector<std::string>& ids,
                             const MissingnessStrategy& strategy, int jobs = 1,
                             bool recompute_all = false) {
  for (const auto& id : ids)
    if (!find_measure(id)) raise(Errc::not_found, "unknown measure '" + id + "'");

  auto conditions = read_conditions_csv(store.conditions_path(dgm_id));
  std::map<std::string, const Condition*> cond_by_id;
  std::vector<std::string> cond_ids;
  for (const auto& c : conditions) {
    cond_by_id[c.condition_id] = &c;
    cond_ids.push_back(c.condition_id);
  }
  std::sort(cond_ids.begin(), cond_ids.end());

  auto manifest = store.manifest();
  std::vector<std::string> methods;
  std::map<std::string, ComponentStatus> status;
  for (const auto& e : manifest.methods) {
    methods.push_back(e.id);
    status[e.id] = e.status;
  }
  std::sort(methods.begin(), methods.end());

  const std::string label = strategy.label();
  const bool coupled = strategy.kind == MissingnessStrategy::Kind::repetition_wise;

  // Existing rows, kept verbatim where the incrementality contract allows.
  std::map<std::string, std::map<std::pair<std::string, std::string>, std::string>> old_lines;
  for (const auto& mid : ids) {
    auto path = store.measure_path(dgm_id, mid);
    if (!fs::exists(path)) continue;
    auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != kMeasureHeader)
      detail::schema_error(path, 1, "bad header");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      auto row = parse_measure_row(path, i + 1, lines[i]);
      if (row.strategy_label == label)
        old_lines[mid][{row.method_id, row.condition_id}] = lines[i];
    }
  }

  auto has_results = [&](const std::string& method, const std::string& cid) {
    return fs::exists(store.results_path(dgm_id, method, cid));
  };

  // Methods with at least one cell to recompute, per condition.
  std::set<std::string> compute_methods;
  long planned = 0;
  for (const auto& method : methods) {
    bool any = false;
    for (const auto& cid : cond_ids) {
      bool have_all_rows = true;
      for (const auto& mid : ids)
        if (!old_lines[mid].count({method, cid})) have_all_rows = false;
      bool reuse = !recompute_all && !coupled && have_all_rows;
      if (reuse) continue;
      if (!has_results(method, cid)) {
        if (status[method] == ComponentStatus::active && !have_all_rows)
          raise(Errc::not_found,
                "no results for active method '" + method + "' on condition '" + cid + "'");
        continue;  // deprecated or already covered: keep what exists
      }
      any = true;
      ++planned;
    }
    if (any) compute_methods.insert(method);
  }

  std::set<std::string> load_methods = compute_methods;
  if (strategy.kind == MissingnessStrategy::Kind::replacement)
    load_methods.insert(strategy.replacement_method_id);
  if (coupled)
    for (const auto& method : methods)
      if (fs::exists(store.results_dir(dgm_id, method))) load_methods.insert(method);

  std::map<std::string, detail::ConditionTables> tables;
  for (const auto& cid : cond_ids) tables[cid];
  parallel_for_index(cond_ids.size(), jobs, [&](std::size_t i) {
    const auto& cid = cond_ids[i];
    auto& t = tables.at(cid);
    std::map<std::string, std::vector<ResultRecord>> by_method;
    for (const auto& method : load_methods) {
      if (!has_results(method, cid)) continue;
      auto records = read_results_csv(store.results_path(dgm_id, method, cid));
      long conv = 0;
      for (const auto& r : records) conv += r.converged;
      t.totals[method] = {static_cast<long>(records.size()), conv};
      by_method[method] = std::move(records);
    }
    t.surviving = apply_missingness(by_method, strategy);
  });

  long computed = 0;
  fs::create_directories(store.measures_dir(dgm_id));
  for (const auto& mid : ids) {
    std::string out(kMeasureHeader);
    out += '\n';
    for (const auto& method : methods) {
      for (const auto& cid : cond_ids) {
        auto old_it = old_lines[mid].find({method, cid});
        bool reuse = !recompute_all && !coupled && old_it != old_lines[mid].end();
        if (!reuse && (!compute_methods.count(method) || !has_results(method, cid))) {
          // No way to recompute: fall back to any existing row.
          if (old_it != old_lines[mid].end()) reuse = true;
        }
        if (reuse) {
          out += old_it->second;
          out += '\n';
          continue;
        }
        if (!has_results(method, cid)) continue;
        const auto& t = tables.at(cid);
        const Condition& cond = *cond_by_id.at(cid);
        CellContext ctx;
        ctx.surviving = &t.surviving.at(method);
        ctx.total_records = t.totals.at(method).first;
        ctx.converged_records = t.totals.at(method).second;
        ctx.mu = cond.mu;
        if (!cond.null_counterpart_id.empty()) {
          const auto& ct = tables.at(cond.null_counterpart_id);
          auto sit = ct.surviving.find(method);
          if (sit != ct.surviving.end()) ctx.counterpart_surviving = &sit->second;
        }
        auto v = compute_cell(mid, ctx);
        v.method_id = method;
        v.condition_id = cid;
        v.strategy_label = label;
        out += render_measure_row(v);
        out += '\n';
        ++computed;
      }
    }
    csv::atomic_write_file(store.measure_path(dgm_id, mid), out);
  }
  return computed;
}

}  // namespace pbbench
