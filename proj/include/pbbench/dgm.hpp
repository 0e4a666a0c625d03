#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "pbbench/csv.hpp"
#include "pbbench/error.hpp"
#include "pbbench/parallel.hpp"
#include "pbbench/rng.hpp"
#include "pbbench/stats.hpp"
#include "pbbench/store.hpp"

namespace pbbench {

// One cell of a simulation grid.
struct Condition {
  std::string condition_id;
  int k = 0;                   // published studies per dataset
  double mu = 0;               // true mean SMD
  double tau = 0;              // between-study SD
  double selection_prob = 1;   // publication probability of a non-significant study
  bool one_sided = false;      // only d > 0 counts as significant
  std::vector<int> n_profile;  // candidate per-group sample sizes
  std::string null_counterpart_id;  // empty when none

  bool is_null() const { return mu == 0; }
  bool operator==(const Condition&) const = default;
};

struct Study {
  double yi = 0;
  double sei = 0;
  long long n_total = 0;
};

struct Dataset {
  std::string condition_id;
  int repetition = 0;
  std::vector<Study> studies;
};

inline constexpr const char* kConditionsHeader =
    "condition_id,k,mu,tau,selection_prob,one_sided,n_profile,null_counterpart_id";
inline constexpr long kCandidateCap = 1'000'000;

// Encodes a grid value scaled by 100 as three digits: 0.15 -> "015", 1 -> "100".
inline std::string grid_code(double x) {
  long v = std::lround(x * 100.0);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03ld", v);
  return buf;
}

inline std::string make_condition_id(int k, double mu, double tau, double selection_prob) {
  return "k" + std::to_string(k) + "-mu" + grid_code(mu) + "-tau" + grid_code(tau) + "-sel" +
         grid_code(selection_prob);
}

inline void validate_conditions(const std::vector<Condition>& conditions) {
  if (conditions.empty()) raise(Errc::invalid_argument, "empty condition list");
  std::set<std::string> ids;
  for (const auto& c : conditions) {
    if (!valid_component_id(c.condition_id))
      raise(Errc::schema_violation, "bad condition id '" + c.condition_id + "'");
    if (!ids.insert(c.condition_id).second)
      raise(Errc::schema_violation, "duplicate condition id '" + c.condition_id + "'");
    if (c.k < 2) raise(Errc::schema_violation, c.condition_id + ": k must be >= 2");
    if (!(c.tau >= 0)) raise(Errc::schema_violation, c.condition_id + ": tau must be >= 0");
    if (!(c.selection_prob >= 0 && c.selection_prob <= 1))
      raise(Errc::schema_violation, c.condition_id + ": selection_prob outside [0,1]");
    if (c.n_profile.empty())
      raise(Errc::schema_violation, c.condition_id + ": empty n_profile");
    for (int n : c.n_profile)
      if (n < 4) raise(Errc::schema_violation, c.condition_id + ": per-group n must be >= 4");
  }
  for (const auto& c : conditions) {
    if (c.null_counterpart_id.empty()) continue;
    const Condition* other = nullptr;
    for (const auto& o : conditions)
      if (o.condition_id == c.null_counterpart_id) other = &o;
    if (!other)
      raise(Errc::schema_violation,
            c.condition_id + ": unknown null counterpart '" + c.null_counterpart_id + "'");
    Condition want = c;
    want.condition_id = other->condition_id;
    want.mu = 0;
    want.null_counterpart_id = other->null_counterpart_id;
    if (!(other->mu == 0 && *other == want))
      raise(Errc::schema_violation,
            c.condition_id + ": counterpart '" + c.null_counterpart_id +
                "' differs in more than mu");
  }
}

// --- conditions CSV -------------------------------------------------------------

inline std::string render_conditions_csv(const std::vector<Condition>& conditions) {
  std::string out(kConditionsHeader);
  out += '\n';
  for (const auto& c : conditions) {
    out += c.condition_id;
    out += ',';
    out += csv::format_int(c.k);
    out += ',';
    out += csv::format_double(c.mu);
    out += ',';
    out += csv::format_double(c.tau);
    out += ',';
    out += csv::format_double(c.selection_prob);
    out += ',';
    out += c.one_sided ? "true" : "false";
    out += ',';
    for (std::size_t i = 0; i < c.n_profile.size(); ++i) {
      if (i) out += ';';
      out += csv::format_int(c.n_profile[i]);
    }
    out += ',';
    out += c.null_counterpart_id;
    out += '\n';
  }
  return out;
}

inline void write_conditions_csv(const fs::path& path, const std::vector<Condition>& conditions) {
  validate_conditions(conditions);
  csv::atomic_write_file(path, render_conditions_csv(conditions));
}

inline std::vector<Condition> read_conditions_csv(const fs::path& path) {
  auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != kConditionsHeader)
    detail::schema_error(path, 1,
                         "bad header, expected '" + std::string(kConditionsHeader) + "'");
  std::vector<Condition> conditions;
  std::vector<std::string_view> f;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    csv::split(lines[i], f);
    if (f.size() != 8) detail::schema_error(path, i + 1, "expected 8 fields");
    Condition c;
    c.condition_id = std::string(f[0]);
    long long k;
    if (!csv::parse_int(f[1], k)) detail::schema_error(path, i + 1, "non-numeric k");
    c.k = static_cast<int>(k);
    if (!csv::parse_double(f[2], c.mu)) detail::schema_error(path, i + 1, "non-numeric mu");
    if (!csv::parse_double(f[3], c.tau)) detail::schema_error(path, i + 1, "non-numeric tau");
    if (!csv::parse_double(f[4], c.selection_prob))
      detail::schema_error(path, i + 1, "non-numeric selection_prob");
    if (!csv::parse_bool(f[5], c.one_sided))
      detail::schema_error(path, i + 1, "one_sided must be true/false");
    std::string_view prof = f[6];
    while (!prof.empty()) {
      auto semi = prof.find(';');
      std::string_view tok = prof.substr(0, semi);
      long long n;
      if (!csv::parse_int(tok, n)) detail::schema_error(path, i + 1, "non-numeric n_profile entry");
      c.n_profile.push_back(static_cast<int>(n));
      if (semi == std::string_view::npos) break;
      prof.remove_prefix(semi + 1);
    }
    c.null_counterpart_id = std::string(f[7]);
    conditions.push_back(std::move(c));
  }
  validate_conditions(conditions);
  return conditions;
}

// --- simulation -----------------------------------------------------------------

struct CandidateStudy {
  double yi = 0;
  double sei = 0;
  long long n_total = 0;
  bool published = false;
  double p_value = 1;
};

// One candidate study. Consumes exactly four RNG draws regardless of outcome,
// in a pinned order: sample-size index, true effect, observed effect,
// publication uniform.
inline CandidateStudy simulate_study(Rng& rng, const Condition& c) {
  int n = c.n_profile[rng.pick_index(c.n_profile.size())];
  double theta = rng.normal(c.mu, c.tau);
  double v0 = 2.0 / n + theta * theta / (4.0 * n);
  double d = rng.normal(theta, std::sqrt(v0));
  double u = rng.uniform01();
  CandidateStudy s;
  s.yi = d;
  s.sei = std::sqrt(2.0 / n + d * d / (4.0 * n));
  s.n_total = 2LL * n;
  s.p_value = 2.0 * stats::norm_sf(std::abs(d) / s.sei);
  bool significant = std::abs(d) >= stats::kZ975 * s.sei && (!c.one_sided || d > 0);
  s.published = significant || u < c.selection_prob;
  return s;
}

inline Dataset simulate_condition(const Condition& c, int repetition, std::uint64_t root_seed,
                                  const std::string& dgm_id) {
  Rng rng(derive_seed({root_seed, dgm_id, c.condition_id, repetition}));
  Dataset ds;
  ds.condition_id = c.condition_id;
  ds.repetition = repetition;
  ds.studies.reserve(c.k);
  long candidates = 0;
  while (static_cast<int>(ds.studies.size()) < c.k) {
    if (++candidates > kCandidateCap)
      raise(Errc::rejection_overflow,
            "condition " + c.condition_id + " repetition " + std::to_string(repetition) + ": " +
                std::to_string(kCandidateCap) + " candidates without " + std::to_string(c.k) +
                " published studies");
    auto s = simulate_study(rng, c);
    if (s.published) ds.studies.push_back({s.yi, s.sei, s.n_total});
  }
  return ds;
}

inline std::vector<Condition> default_grid() {
  std::vector<Condition> grid;
  for (int k : {10, 30, 60})
    for (double mu : {0.0, 0.2, 0.5})
      for (double tau : {0.0, 0.15, 0.3})
        for (double sel : {1.0, 0.3, 0.05}) {
          Condition c;
          c.condition_id = make_condition_id(k, mu, tau, sel);
          c.k = k;
          c.mu = mu;
          c.tau = tau;
          c.selection_prob = sel;
          c.one_sided = true;
          c.n_profile = {15, 25, 50, 100, 250};
          if (mu != 0) c.null_counterpart_id = make_condition_id(k, 0, tau, sel);
          grid.push_back(std::move(c));
        }
  return grid;
}

// --- DGM metadata ----------------------------------------------------------------

struct DgmMeta {
  std::string id;
  std::string version;
  std::uint64_t root_seed = 0;
  int repetitions = 0;
  std::string generator_name = kGeneratorName;
};

inline void write_dgm_meta(const fs::path& path, const DgmMeta& m) {
  nlohmann::ordered_json j;
  j["id"] = m.id;
  j["version"] = m.version;
  j["root_seed"] = m.root_seed;
  j["repetitions"] = m.repetitions;
  j["generator_name"] = m.generator_name;
  csv::atomic_write_file(path, j.dump(2) + "\n");
}

inline DgmMeta read_dgm_meta(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::not_found, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    DgmMeta m;
    m.id = j.at("id").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.root_seed = j.at("root_seed").get<std::uint64_t>();
    m.repetitions = j.at("repetitions").get<int>();
    m.generator_name = j.at("generator_name").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::schema_violation, path.string() + ": " + e.what());
  }
}

// Writes conditions.csv, meta.json, and one data file per condition. Existing
// data files are kept unless force is set; returns the number written.
inline int generate_dgm(const BenchStore& store, const std::string& dgm_id,
                        const std::string& version, const std::vector<Condition>& conditions,
                        int repetitions, std::uint64_t root_seed, int jobs = 1,
                        bool force = false) {
  validate_conditions(conditions);
  if (repetitions < 1) raise(Errc::invalid_argument, "repetitions must be >= 1");

  auto meta_path = store.dgm_meta_path(dgm_id);
  if (fs::exists(meta_path) && !force) {
    auto old = read_dgm_meta(meta_path);
    if (old.root_seed != root_seed || old.repetitions != repetitions ||
        old.generator_name != kGeneratorName)
      raise(Errc::invalid_argument, "dgm '" + dgm_id +
                                        "' was generated with different parameters; "
                                        "pass --force to regenerate");
  }
  fs::create_directories(store.dgm_dir(dgm_id));
  fs::create_directories(store.data_dir(dgm_id));
  write_conditions_csv(store.conditions_path(dgm_id), conditions);
  write_dgm_meta(meta_path, {dgm_id, version, root_seed, repetitions, kGeneratorName});

  std::vector<const Condition*> todo;
  for (const auto& c : conditions)
    if (force || !fs::exists(store.data_path(dgm_id, c.condition_id))) todo.push_back(&c);

  parallel_for_index(todo.size(), jobs, [&](std::size_t i) {
    const Condition& c = *todo[i];
    std::vector<StudyRow> rows;
    rows.reserve(static_cast<std::size_t>(repetitions) * c.k);
    for (int rep = 1; rep <= repetitions; ++rep) {
      auto ds = simulate_condition(c, rep, root_seed, dgm_id);
      for (std::size_t s = 0; s < ds.studies.size(); ++s)
        rows.push_back({rep, static_cast<int>(s + 1), ds.studies[s].yi, ds.studies[s].sei,
                        ds.studies[s].n_total});
    }
    write_data_csv(store.data_path(dgm_id, c.condition_id), rows);
  });
  return static_cast<int>(todo.size());
}

}  // namespace pbbench
