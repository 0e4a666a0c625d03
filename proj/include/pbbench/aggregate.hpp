#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pbbench/dgm.hpp"
#include "pbbench/measures.hpp"
#include "pbbench/missingness.hpp"
#include "pbbench/store.hpp"

namespace pbbench {

struct DgmSet {
  std::string set_id;
  std::vector<std::string> condition_ids;
};

enum class AggregateMode { by_condition, by_set };

inline const char* aggregate_mode_name(AggregateMode m) {
  return m == AggregateMode::by_condition ? "by_condition" : "by_set";
}

inline std::optional<AggregateMode> parse_aggregate_mode(std::string_view s) {
  if (s == "by_condition") return AggregateMode::by_condition;
  if (s == "by_set") return AggregateMode::by_set;
  return std::nullopt;
}

// Ranks one condition's values: rank 1 is best under the measure's direction,
// ties take the average of the covered ranks, missing values share the worst
// ranks.
inline std::map<std::string, double> rank_methods(
    const std::map<std::string, std::optional<double>>& values, const MeasureSpec& spec) {
  std::vector<std::pair<double, std::string>> scored;
  std::vector<std::string> missing;
  for (const auto& [method, v] : values) {
    if (!v) {
      missing.push_back(method);
      continue;
    }
    double score = *v;
    if (spec.direction == Direction::higher_better)
      score = -score;
    else if (spec.direction == Direction::target)
      score = std::abs(score - spec.target_value);
    scored.push_back({score, method});
  }
  if (scored.empty()) raise(Errc::aggregation_error, "no non-missing values to rank");
  std::sort(scored.begin(), scored.end());

  std::map<std::string, double> ranks;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    while (j + 1 < scored.size() && scored[j + 1].first == scored[i].first) ++j;
    double mid = (i + j) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[scored[m].second] = mid;
    i = j + 1;
  }
  double worst = (scored.size() + 1 + values.size()) / 2.0;
  for (const auto& method : missing) ranks[method] = worst;
  return ranks;
}

// by_condition averages over every condition instance the sets mention (with
// multiplicity); by_set de-duplicates within each set, averages within, then
// averages the set means with equal weight. Cross-set overlap is rejected.
inline std::map<std::string, double> aggregate_ranks(
    const std::map<std::string, std::map<std::string, double>>& rank_tables, AggregateMode mode,
    const std::vector<DgmSet>& sets,
    std::map<std::string, std::map<std::string, double>>* per_set_out = nullptr) {
  if (sets.empty()) raise(Errc::aggregation_error, "no sets to aggregate over");
  std::set<std::string> claimed;
  std::vector<std::vector<std::string>> dedup(sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (sets[s].condition_ids.empty())
      raise(Errc::aggregation_error, "set '" + sets[s].set_id + "' is empty");
    std::set<std::string> seen;
    for (const auto& cid : sets[s].condition_ids) {
      if (!rank_tables.count(cid))
        raise(Errc::aggregation_error, "no rank table for condition '" + cid + "'");
      if (seen.insert(cid).second) dedup[s].push_back(cid);
    }
    for (const auto& cid : dedup[s])
      if (!claimed.insert(cid).second)
        raise(Errc::aggregation_error, "condition '" + cid + "' appears in more than one set");
  }

  std::map<std::string, double> out;
  if (mode == AggregateMode::by_condition) {
    std::map<std::string, double> sum;
    long count = 0;
    for (const auto& s : sets)
      for (const auto& cid : s.condition_ids) {
        for (const auto& [method, r] : rank_tables.at(cid)) sum[method] += r;
        ++count;
      }
    for (const auto& [method, total] : sum) out[method] = total / count;
    return out;
  }

  std::map<std::string, double> set_sum;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::map<std::string, double> mean;
    for (const auto& cid : dedup[s])
      for (const auto& [method, r] : rank_tables.at(cid)) mean[method] += r;
    for (auto& [method, total] : mean) {
      total /= dedup[s].size();
      set_sum[method] += total;
    }
    if (per_set_out)
      for (const auto& [method, r] : mean) (*per_set_out)[method][sets[s].set_id] = r;
  }
  for (const auto& [method, total] : set_sum) out[method] = total / sets.size();
  return out;
}

struct Summary {
  std::optional<double> min, max, mean, median;
  bool rank_only = false;  // scale-dependent values spanning scales
};

// Order statistics over the non-missing values. Scale-dependent measures keep
// their mean only when all cells share one DGM's scale; otherwise the summary
// degrades to rank-only.
inline Summary summarize(const std::vector<double>& values, bool scale_dependent,
                         bool single_scale = true) {
  Summary s;
  if (values.empty()) return s;
  if (scale_dependent && !single_scale) {
    s.rank_only = true;
    return s;
  }
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.mean = stats::mean(v);
  s.median = stats::median(v);
  return s;
}

struct LeaderboardRow {
  std::string method_id;
  double mean_rank = 0;
  Summary summary;
  long n_cells = 0;
  std::map<std::string, double> set_mean_ranks;  // by_set mode only
};

inline constexpr const char* kLeaderboardHeader =
    "method_id,mean_rank,min,max,mean,median,n_cells";

// Groups a DGM's conditions by selection probability: the benchmark's default
// notion of a DGM set.
inline std::vector<DgmSet> default_sets(const std::vector<Condition>& conditions) {
  std::map<std::string, DgmSet> by_sel;
  for (const auto& c : conditions) {
    std::string id = "sel" + grid_code(c.selection_prob);
    auto& s = by_sel[id];
    s.set_id = id;
    s.condition_ids.push_back(c.condition_id);
  }
  std::vector<DgmSet> sets;
  for (auto& [id, s] : by_sel) sets.push_back(std::move(s));
  return sets;
}

// Builds the per-method leaderboard for one measure file. Conditions where
// every method is missing are dropped; missing cells rank worst elsewhere.
inline std::vector<LeaderboardRow> build_leaderboard(const BenchStore& store,
                                                     const std::string& dgm_id,
                                                     const std::string& measure_id,
                                                     const MissingnessStrategy& strategy,
                                                     AggregateMode mode,
                                                     bool include_deprecated = false) {
  const auto* spec = find_measure(measure_id);
  if (!spec) raise(Errc::not_found, "unknown measure '" + measure_id + "'");
  auto path = store.measure_path(dgm_id, measure_id);
  if (!fs::exists(path))
    raise(Errc::not_found, "measure '" + measure_id + "' not computed for dgm '" + dgm_id + "'");

  auto manifest = store.manifest();
  std::set<std::string> included;
  for (const auto& e : manifest.methods)
    if (include_deprecated || e.status == ComponentStatus::active) included.insert(e.id);
  if (included.empty()) raise(Errc::aggregation_error, "no methods to rank");

  const std::string label = strategy.label();
  std::map<std::string, std::map<std::string, std::optional<double>>> by_condition;
  for (const auto& row : read_measure_csv(path)) {
    if (!included.count(row.method_id)) continue;
    if (row.strategy_label != label)
      raise(Errc::aggregation_error, "measure file " + path.string() +
                                         " was computed under strategy '" + row.strategy_label +
                                         "', wanted '" + label + "'");
    by_condition[row.condition_id][row.method_id] = row.value;
  }

  auto conditions = read_conditions_csv(store.conditions_path(dgm_id));
  auto sets = default_sets(conditions);

  // Rank per condition; drop conditions with nothing to rank, and make every
  // table cover every included method (absent row = missing).
  std::map<std::string, std::map<std::string, double>> rank_tables;
  std::map<std::string, std::vector<double>> values_by_method;
  std::set<std::string> ranked;
  for (auto& [cid, vals] : by_condition) {
    bool any = false;
    for (const auto& method : included) {
      if (!vals.count(method)) vals[method] = std::nullopt;
      any = any || vals[method].has_value();
    }
    if (!any) continue;
    rank_tables[cid] = rank_methods(vals, *spec);
    ranked.insert(cid);
    for (const auto& [method, v] : vals)
      if (v && std::isfinite(*v)) values_by_method[method].push_back(*v);
  }
  if (rank_tables.empty()) raise(Errc::aggregation_error, "no rankable conditions");

  std::vector<DgmSet> live_sets;
  for (auto& s : sets) {
    DgmSet filtered;
    filtered.set_id = s.set_id;
    for (const auto& cid : s.condition_ids)
      if (ranked.count(cid)) filtered.condition_ids.push_back(cid);
    if (!filtered.condition_ids.empty()) live_sets.push_back(std::move(filtered));
  }

  std::map<std::string, std::map<std::string, double>> per_set;
  auto mean_ranks = aggregate_ranks(rank_tables, mode, live_sets,
                                    mode == AggregateMode::by_set ? &per_set : nullptr);

  std::vector<LeaderboardRow> rows;
  for (const auto& method : included) {
    LeaderboardRow r;
    r.method_id = method;
    r.mean_rank = mean_ranks.at(method);
    r.summary = summarize(values_by_method[method], spec->scale_dependent, true);
    r.n_cells = static_cast<long>(rank_tables.size());
    if (per_set.count(method)) r.set_mean_ranks = per_set.at(method);
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
    return a.method_id < b.method_id;
  });
  return rows;
}

inline std::string render_leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
  std::string out(kLeaderboardHeader);
  out += '\n';
  auto field = [](const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string();
  };
  for (const auto& r : rows) {
    out += r.method_id;
    out += ',';
    out += csv::format_double(r.mean_rank);
    out += ',';
    out += field(r.summary.min);
    out += ',';
    out += field(r.summary.max);
    out += ',';
    out += field(r.summary.mean);
    out += ',';
    out += field(r.summary.median);
    out += ',';
    out += csv::format_int(r.n_cells);
    out += '\n';
  }
  return out;
}

inline void write_leaderboard_csv(const BenchStore& store, const std::string& dgm_id,
                                  const std::string& measure_id,
                                  const MissingnessStrategy& strategy, AggregateMode mode,
                                  const std::vector<LeaderboardRow>& rows) {
  auto path = store.leaderboard_path(dgm_id, measure_id, strategy.label(),
                                     aggregate_mode_name(mode));
  csv::atomic_write_file(path, render_leaderboard_csv(rows));
}

}  // namespace pbbench
