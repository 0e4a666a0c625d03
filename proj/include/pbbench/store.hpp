#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pbbench/csv.hpp"
#include "pbbench/error.hpp"
#include "pbbench/manifest.hpp"

namespace pbbench {

namespace fs = std::filesystem;

// One study of one simulated meta-analysis.
struct StudyRow {
  int repetition = 0;
  int study = 0;
  double yi = 0;       // SMD estimate
  double sei = 0;      // standard error of yi, > 0
  long long n_total = 0;

  bool operator==(const StudyRow&) const = default;
};

// One method's output on one repetition. All value fields are missing when
// the method did not converge.
struct ResultRecord {
  int repetition = 0;
  std::optional<double> estimate;
  std::optional<double> se;
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
  std::optional<double> p_value;
  bool converged = false;
  std::string note;

  bool operator==(const ResultRecord&) const = default;
};

inline constexpr const char* kDataHeader = "repetition,study,yi,sei,n_total";
inline constexpr const char* kResultsHeader =
    "repetition,estimate,se,ci_lower,ci_upper,p_value,converged,note";

namespace detail {

[[noreturn]] inline void schema_error(const fs::path& path, std::size_t line_no,
                                      const std::string& what) {
  raise(Errc::schema_violation, path.string() + ":" + std::to_string(line_no) + ": " + what);
}

inline void check_result_invariants(const ResultRecord& r, const fs::path& path,
                                    std::size_t line_no) {
  if (r.repetition < 1) schema_error(path, line_no, "repetition must be >= 1");
  if (r.se && *r.se <= 0) schema_error(path, line_no, "se must be > 0");
  if (r.p_value && (*r.p_value < 0 || *r.p_value > 1))
    schema_error(path, line_no, "p_value outside [0,1]");
  if (!r.converged) {
    if (r.estimate || r.se || r.ci_lower || r.ci_upper || r.p_value)
      schema_error(path, line_no, "non-converged record carries values");
  } else {
    if (!r.estimate || !r.ci_lower || !r.ci_upper)
      schema_error(path, line_no, "converged record missing estimate or CI bounds");
    if (!(*r.ci_lower <= *r.estimate && *r.estimate <= *r.ci_upper))
      schema_error(path, line_no, "CI bounds do not bracket the estimate");
  }
  if (r.note.find(',') != std::string::npos || r.note.find('\n') != std::string::npos)
    schema_error(path, line_no, "note contains a comma or newline");
}

}  // namespace detail

// --- study data CSV ----------------------------------------------------------

inline std::string render_data_csv(const std::vector<StudyRow>& rows, const fs::path& path) {
  std::string out(kDataHeader);
  out += '\n';
  std::set<std::pair<int, int>> seen;
  std::map<int, std::set<int>> per_rep;
  std::size_t line_no = 1;
  for (const auto& r : rows) {
    ++line_no;
    if (r.repetition < 1) detail::schema_error(path, line_no, "repetition must be >= 1");
    if (r.study < 1) detail::schema_error(path, line_no, "study must be >= 1");
    if (!(r.sei > 0)) detail::schema_error(path, line_no, "sei must be > 0");
    if (r.n_total < 4) detail::schema_error(path, line_no, "n_total must be >= 4");
    if (!seen.insert({r.repetition, r.study}).second)
      detail::schema_error(path, line_no, "duplicate (repetition, study) pair");
    per_rep[r.repetition].insert(r.study);
    out += csv::format_int(r.repetition);
    out += ',';
    out += csv::format_int(r.study);
    out += ',';
    out += csv::format_double(r.yi);
    out += ',';
    out += csv::format_double(r.sei);
    out += ',';
    out += csv::format_int(r.n_total);
    out += '\n';
  }
  for (const auto& [rep, studies] : per_rep) {
    if (*studies.rbegin() != static_cast<int>(studies.size()))
      raise(Errc::schema_violation, path.string() + ": repetition " + std::to_string(rep) +
                                        " study indices are not contiguous 1..k");
  }
  return out;
}

inline void write_data_csv(const fs::path& path, const std::vector<StudyRow>& rows) {
  csv::atomic_write_file(path, render_data_csv(rows, path));
}

inline std::vector<StudyRow> read_data_csv(const fs::path& path) {
  auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != kDataHeader) {
    std::string msg = "bad header, expected '" + std::string(kDataHeader) + "'";
    if (!lines.empty()) {
      std::vector<std::string_view> have, want;
      csv::split(lines[0], have);
      csv::split(kDataHeader, want);
      for (const auto& col : want)
        if (std::find(have.begin(), have.end(), col) == have.end())
          msg = "missing column '" + std::string(col) + "'";
    }
    detail::schema_error(path, 1, msg);
  }
  std::vector<StudyRow> rows;
  rows.reserve(lines.size() - 1);
  std::vector<std::string_view> f;
  std::set<std::pair<int, int>> seen;
  std::map<int, std::set<int>> per_rep;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    csv::split(lines[i], f);
    if (f.size() != 5) detail::schema_error(path, i + 1, "expected 5 fields");
    StudyRow r;
    long long rep, study;
    if (!csv::parse_int(f[0], rep)) detail::schema_error(path, i + 1, "non-numeric repetition");
    if (!csv::parse_int(f[1], study)) detail::schema_error(path, i + 1, "non-numeric study");
    if (!csv::parse_double(f[2], r.yi)) detail::schema_error(path, i + 1, "non-numeric yi");
    if (!csv::parse_double(f[3], r.sei)) detail::schema_error(path, i + 1, "non-numeric sei");
    if (!csv::parse_int(f[4], r.n_total)) detail::schema_error(path, i + 1, "non-numeric n_total");
    r.repetition = static_cast<int>(rep);
    r.study = static_cast<int>(study);
    if (r.repetition < 1) detail::schema_error(path, i + 1, "repetition must be >= 1");
    if (r.study < 1) detail::schema_error(path, i + 1, "study must be >= 1");
    if (!(r.sei > 0)) detail::schema_error(path, i + 1, "sei must be > 0");
    if (r.n_total < 4) detail::schema_error(path, i + 1, "n_total must be >= 4");
    if (!seen.insert({r.repetition, r.study}).second)
      detail::schema_error(path, i + 1, "duplicate (repetition, study) pair");
    per_rep[r.repetition].insert(r.study);
    rows.push_back(r);
  }
  for (const auto& [rep, studies] : per_rep) {
    if (*studies.rbegin() != static_cast<int>(studies.size()))
      raise(Errc::schema_violation, path.string() + ": repetition " + std::to_string(rep) +
                                        " study indices are not contiguous 1..k");
  }
  return rows;
}

// --- results CSV --------------------------------------------------------------

inline std::string render_results_csv(const std::vector<ResultRecord>& rows,
                                      const fs::path& path) {
  std::string out(kResultsHeader);
  out += '\n';
  auto field = [](const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string();
  };
  std::size_t line_no = 1;
  for (const auto& r : rows) {
    detail::check_result_invariants(r, path, ++line_no);
    out += csv::format_int(r.repetition);
    out += ',';
    out += field(r.estimate);
    out += ',';
    out += field(r.se);
    out += ',';
    out += field(r.ci_lower);
    out += ',';
    out += field(r.ci_upper);
    out += ',';
    out += field(r.p_value);
    out += ',';
    out += r.converged ? "true" : "false";
    out += ',';
    out += r.note;
    out += '\n';
  }
  return out;
}

inline void write_results_csv(const fs::path& path, const std::vector<ResultRecord>& rows) {
  csv::atomic_write_file(path, render_results_csv(rows, path));
}

inline std::vector<ResultRecord> read_results_csv(const fs::path& path) {
  auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != kResultsHeader) {
    std::string msg = "bad header, expected '" + std::string(kResultsHeader) + "'";
    if (!lines.empty()) {
      std::vector<std::string_view> have, want;
      csv::split(lines[0], have);
      csv::split(kResultsHeader, want);
      for (const auto& col : want)
        if (std::find(have.begin(), have.end(), col) == have.end())
          msg = "missing column '" + std::string(col) + "'";
    }
    detail::schema_error(path, 1, msg);
  }
  std::vector<ResultRecord> rows;
  rows.reserve(lines.size() - 1);
  std::vector<std::string_view> f;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    csv::split(lines[i], f);
    if (f.size() != 8) detail::schema_error(path, i + 1, "expected 8 fields");
    ResultRecord r;
    long long rep;
    if (!csv::parse_int(f[0], rep)) detail::schema_error(path, i + 1, "non-numeric repetition");
    r.repetition = static_cast<int>(rep);
    auto opt_field = [&](std::string_view s, const char* name) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      double v;
      if (!csv::parse_double(s, v))
        detail::schema_error(path, i + 1, std::string("non-numeric ") + name);
      return v;
    };
    r.estimate = opt_field(f[1], "estimate");
    r.se = opt_field(f[2], "se");
    r.ci_lower = opt_field(f[3], "ci_lower");
    r.ci_upper = opt_field(f[4], "ci_upper");
    r.p_value = opt_field(f[5], "p_value");
    if (!csv::parse_bool(f[6], r.converged))
      detail::schema_error(path, i + 1, "converged must be true/false");
    r.note = std::string(f[7]);
    detail::check_result_invariants(r, path, i + 1);
    rows.push_back(r);
  }
  return rows;
}

// --- benchmark repository ------------------------------------------------------

class BenchStore {
 public:
  // Opens an existing benchmark root.
  explicit BenchStore(fs::path root) : root_(std::move(root)) {
    if (!fs::exists(manifest_path()))
      raise(Errc::not_found, "no manifest at " + manifest_path().string());
  }

  // Creates the directory skeleton and an empty manifest. Refuses to touch a
  // root that is already initialized.
  static BenchStore init(const fs::path& root, const std::string& name) {
    if (fs::exists(root / "manifest.json"))
      raise(Errc::already_initialized, root.string() + " already contains a manifest");
    fs::create_directories(root);
    for (const char* d : {"dgms", "data", "results", "measures", "methods"})
      fs::create_directories(root / d);
    Manifest m;
    m.benchmark_name = name;
    write_manifest(root / "manifest.json", m);
    return BenchStore(root);
  }

  const fs::path& root() const { return root_; }
  fs::path manifest_path() const { return root_ / "manifest.json"; }

  Manifest manifest() const { return read_manifest(manifest_path()); }
  void save_manifest(const Manifest& m) const { write_manifest(manifest_path(), m); }

  fs::path dgm_dir(const std::string& dgm_id) const { return root_ / "dgms" / dgm_id; }
  fs::path conditions_path(const std::string& dgm_id) const {
    return dgm_dir(dgm_id) / "conditions.csv";
  }
  fs::path dgm_meta_path(const std::string& dgm_id) const { return dgm_dir(dgm_id) / "meta.json"; }
  fs::path data_dir(const std::string& dgm_id) const { return root_ / "data" / dgm_id; }
  fs::path data_path(const std::string& dgm_id, const std::string& condition_id) const {
    return data_dir(dgm_id) / ("cond-" + condition_id + ".csv");
  }
  fs::path results_dir(const std::string& dgm_id, const std::string& method_id) const {
    return root_ / "results" / dgm_id / method_id;
  }
  fs::path results_path(const std::string& dgm_id, const std::string& method_id,
                        const std::string& condition_id) const {
    return results_dir(dgm_id, method_id) / ("cond-" + condition_id + ".csv");
  }
  fs::path measures_dir(const std::string& dgm_id) const { return root_ / "measures" / dgm_id; }
  fs::path measure_path(const std::string& dgm_id, const std::string& measure_id) const {
    return measures_dir(dgm_id) / (measure_id + ".csv");
  }
  fs::path leaderboard_path(const std::string& dgm_id, const std::string& measure_id,
                            const std::string& strategy, const std::string& mode) const {
    return measures_dir(dgm_id) /
           ("leaderboard-" + measure_id + "-" + strategy + "-" + mode + ".csv");
  }
  fs::path method_meta_path(const std::string& method_id) const {
    return root_ / "methods" / method_id / "meta.json";
  }

  // Condition ids as listed in the DGM's conditions.csv (first column).
  std::vector<std::string> condition_ids(const std::string& dgm_id) const {
    auto path = conditions_path(dgm_id);
    if (!fs::exists(path)) raise(Errc::not_found, "no conditions file for dgm '" + dgm_id + "'");
    auto lines = csv::read_lines(path);
    std::vector<std::string> ids;
    std::vector<std::string_view> f;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      csv::split(lines[i], f);
      if (!f.empty() && !f[0].empty()) ids.emplace_back(f[0]);
    }
    return ids;
  }

 private:
  fs::path root_;
};

// --- submission validation ------------------------------------------------------

struct ConditionValidation {
  std::string condition_id;
  bool ok = false;
  std::string message;          // failure reason when !ok
  int rows_expected = 0;        // repetitions present in the data file
  int rows_found = 0;
  double convergence_rate = 0;  // meaningful when the file was readable
};

struct ValidationReport {
  std::string dgm_id;
  std::string method_id;
  bool pass = false;
  std::vector<ConditionValidation> conditions;
};

// Checks a method's result files against the DGM's data files: one readable,
// schema-valid record per repetition for every condition. Failures are
// reported, not thrown.
inline ValidationReport validate_submission(const BenchStore& store, const std::string& dgm_id,
                                            const std::string& method_id) {
  ValidationReport report;
  report.dgm_id = dgm_id;
  report.method_id = method_id;
  report.pass = true;
  for (const auto& cid : store.condition_ids(dgm_id)) {
    ConditionValidation cv;
    cv.condition_id = cid;
    auto res_path = store.results_path(dgm_id, method_id, cid);
    try {
      auto data = read_data_csv(store.data_path(dgm_id, cid));
      std::set<int> reps;
      for (const auto& row : data) reps.insert(row.repetition);
      cv.rows_expected = static_cast<int>(reps.size());
      if (!fs::exists(res_path)) {
        cv.message = "missing results file for condition " + cid;
      } else {
        auto results = read_results_csv(res_path);
        cv.rows_found = static_cast<int>(results.size());
        std::set<int> res_reps;
        int converged = 0;
        for (const auto& r : results) {
          if (!res_reps.insert(r.repetition).second) {
            cv.message = "duplicate repetition " + std::to_string(r.repetition);
            break;
          }
          if (r.converged) ++converged;
        }
        if (cv.message.empty() && res_reps != reps)
          cv.message = "row count mismatch: expected " + std::to_string(cv.rows_expected) +
                       " repetitions, found " + std::to_string(cv.rows_found);
        if (!results.empty())
          cv.convergence_rate = static_cast<double>(converged) / results.size();
      }
    } catch (const Error& e) {
      cv.message = e.what();
    }
    cv.ok = cv.message.empty();
    report.pass = report.pass && cv.ok;
    report.conditions.push_back(std::move(cv));
  }
  return report;
}

}  // namespace pbbench
