#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pbbench/aggregate.hpp"
#include "pbbench/manifest.hpp"
#include "pbbench/measures.hpp"
#include "pbbench/store.hpp"

namespace pbbench {

namespace html {

inline std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// `v (±m)` with three significant digits; bare value without an MCSE.
inline std::string cell(const std::optional<double>& value, const std::optional<double>& mcse) {
  if (!value) return "missing";
  std::string out = num3(*value);
  if (mcse) out += " (&plusmn;" + num3(*mcse) + ")";
  return out;
}

inline std::string page(const std::string& title, const std::string& css_href,
                        const std::string& body) {
  std::string out = "<!doctype html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
  out += "<title>" + escape(title) + "</title>\n";
  out += "<link rel=\"stylesheet\" href=\"" + css_href + "\">\n</head>\n<body>\n";
  out += body;
  out += "</body>\n</html>\n";
  return out;
}

}  // namespace html

inline constexpr const char* kReportCss = R"(body {
  font-family: sans-serif;
  margin: 2rem auto;
  max-width: 72rem;
  padding: 0 1rem;
  color: #222;
}
h1, h2 { font-weight: 600; }
table { border-collapse: collapse; margin: 1rem 0; }
th, td { border: 1px solid #ccc; padding: 0.3rem 0.6rem; text-align: left; }
th { background: #f2f2f2; }
tr.deprecated td { color: #999; }
.scroll { overflow-x: auto; }
nav a { margin-right: 1rem; }
)";

namespace detail {

inline std::string table_open(const std::vector<std::string>& headers) {
  std::string out = "<div class=\"scroll\"><table>\n<tr>";
  for (const auto& h : headers) out += "<th>" + html::escape(h) + "</th>";
  out += "</tr>\n";
  return out;
}

inline std::string read_environment(const BenchStore& store, const std::string& method_id) {
  auto path = store.method_meta_path(method_id);
  if (!fs::exists(path)) return {};
  std::ifstream in(path, std::ios::binary);
  nlohmann::json j;
  try {
    in >> j;
    return j.value("environment", std::string());
  } catch (const nlohmann::json::exception&) {
    return {};
  }
}

inline std::string leaderboard_table(const std::vector<LeaderboardRow>& rows) {
  std::string out =
      table_open({"method", "mean rank", "min", "max", "mean", "median", "n cells"});
  auto field = [](const std::optional<double>& v) { return v ? html::num3(*v) : std::string(); };
  for (const auto& r : rows) {
    out += "<tr><td>" + html::escape(r.method_id) + "</td><td>" + html::num3(r.mean_rank) +
           "</td><td>" + field(r.summary.min) + "</td><td>" + field(r.summary.max) + "</td><td>" +
           field(r.summary.mean) + "</td><td>" + field(r.summary.median) + "</td><td>" +
           std::to_string(r.n_cells) + "</td></tr>\n";
  }
  out += "</table></div>\n";
  return out;
}

// method x condition grid of `value (±mcse)` cells from one measure file.
inline std::string heat_table(const std::vector<MeasureValue>& rows) {
  std::set<std::string> methods, conditions;
  std::map<std::pair<std::string, std::string>, const MeasureValue*> cells;
  for (const auto& r : rows) {
    methods.insert(r.method_id);
    conditions.insert(r.condition_id);
    cells[{r.method_id, r.condition_id}] = &r;
  }
  std::vector<std::string> headers = {"method"};
  headers.insert(headers.end(), conditions.begin(), conditions.end());
  std::string out = table_open(headers);
  for (const auto& m : methods) {
    out += "<tr><td>" + html::escape(m) + "</td>";
    for (const auto& c : conditions) {
      auto it = cells.find({m, c});
      out += "<td>";
      out += it == cells.end() ? "missing" : html::cell(it->second->value, it->second->mcse);
      out += "</td>";
    }
    out += "</tr>\n";
  }
  out += "</table></div>\n";
  return out;
}

}  // namespace detail

// Emits the static report site: index, methods page, and per-DGM measure and
// convergence pages. Reads nothing but the store's JSON and CSV files.
inline void write_report(const BenchStore& store, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  csv::atomic_write_file(out_dir / "style.css", kReportCss);

  auto manifest = store.manifest();

  // Methods page.
  {
    std::string body = "<nav><a href=\"index.html\">index</a></nav>\n<h1>Methods</h1>\n";
    body += detail::table_open(
        {"id", "version", "status", "provenance", "added", "environment"});
    for (const auto& e : manifest.methods) {
      bool dep = e.status == ComponentStatus::deprecated;
      body += dep ? "<tr class=\"deprecated\">" : "<tr>";
      body += "<td>" + html::escape(e.id) + "</td><td>" + html::escape(e.version) + "</td><td>" +
              status_name(e.status) + "</td><td>" + html::escape(e.provenance) + "</td><td>" +
              html::escape(e.added_at) + "</td><td>" +
              html::escape(detail::read_environment(store, e.id)) + "</td></tr>\n";
    }
    body += "</table></div>\n";
    csv::atomic_write_file(out_dir / "methods.html",
                           html::page("Methods", "style.css", body));
  }

  std::string index_body = "<h1>" + html::escape(manifest.benchmark_name) + "</h1>\n";
  index_body += "<p>Schema version " + html::escape(manifest.schema_version) + "</p>\n";
  index_body += "<p><a href=\"methods.html\">Methods</a></p>\n";

  index_body += "<h2>Components</h2>\n";
  index_body += detail::table_open({"kind", "id", "version", "status", "added"});
  auto component_rows = [&](const std::vector<ComponentEntry>& entries, const char* kind) {
    std::string out;
    for (const auto& e : entries) {
      bool dep = e.status == ComponentStatus::deprecated;
      out += dep ? "<tr class=\"deprecated\">" : "<tr>";
      out += std::string("<td>") + kind + "</td><td>" + html::escape(e.id) + "</td><td>" +
             html::escape(e.version) + "</td><td>" + status_name(e.status) + "</td><td>" +
             html::escape(e.added_at) + "</td></tr>\n";
    }
    return out;
  };
  index_body += component_rows(manifest.dgms, "dgm");
  index_body += component_rows(manifest.methods, "method");
  index_body += component_rows(manifest.measures, "measure");
  index_body += "</table></div>\n";

  for (const auto& dgm : manifest.dgms) {
    const auto& dgm_id = dgm.id;
    fs::create_directories(out_dir / dgm_id);
    index_body += "<h2>" + html::escape(dgm_id) + "</h2>\n<ul>\n";

    std::vector<std::string> have;
    for (const auto& mid : measure_ids())
      if (fs::exists(store.measure_path(dgm_id, mid))) have.push_back(mid);

    for (const auto& mid : have) {
      auto rows = read_measure_csv(store.measure_path(dgm_id, mid));
      std::string body = "<nav><a href=\"../index.html\">index</a></nav>\n";
      body += "<h1>" + html::escape(mid) + " on " + html::escape(dgm_id) + "</h1>\n";

      std::string label = rows.empty() ? std::string("method_wise") : rows.front().strategy_label;
      auto strategy = MissingnessStrategy::parse(label);
      body += "<p>Missingness strategy: " + html::escape(label) + "</p>\n";

      for (auto mode : {AggregateMode::by_condition, AggregateMode::by_set}) {
        body += std::string("<h2>Leaderboard, ") + aggregate_mode_name(mode) + "</h2>\n";
        if (!strategy) {
          body += "<p>not available</p>\n";
          continue;
        }
        try {
          body += detail::leaderboard_table(
              build_leaderboard(store, dgm_id, mid, *strategy, mode));
        } catch (const Error& e) {
          body += "<p>not available: " + html::escape(e.what()) + "</p>\n";
        }
      }

      body += "<h2>Per-condition values</h2>\n";
      body += detail::heat_table(rows);
      csv::atomic_write_file(out_dir / dgm_id / ("measure-" + mid + ".html"),
                             html::page(mid + " - " + dgm_id, "../style.css", body));
      if (mid != "convergence")
        index_body += "<li><a href=\"" + dgm_id + "/measure-" + mid + ".html\">" +
                      html::escape(mid) + "</a></li>\n";
    }

    // Convergence page: the convergence measure rendered on its own.
    if (fs::exists(store.measure_path(dgm_id, "convergence"))) {
      auto rows = read_measure_csv(store.measure_path(dgm_id, "convergence"));
      std::string body = "<nav><a href=\"../index.html\">index</a></nav>\n";
      body += "<h1>Convergence on " + html::escape(dgm_id) + "</h1>\n";
      body += detail::heat_table(rows);
      csv::atomic_write_file(out_dir / dgm_id / "convergence.html",
                             html::page("Convergence - " + dgm_id, "../style.css", body));
      index_body += "<li><a href=\"" + dgm_id + "/convergence.html\">convergence</a></li>\n";
    }
    index_body += "</ul>\n";
  }

  csv::atomic_write_file(out_dir / "index.html",
                         html::page(manifest.benchmark_name, "style.css", index_body));
}

}  // namespace pbbench
