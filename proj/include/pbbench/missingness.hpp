#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pbbench/error.hpp"
#include "pbbench/store.hpp"

namespace pbbench {

inline constexpr const char* kReplacedNotePrefix = "replaced_by:";

struct MissingnessStrategy {
  enum class Kind { repetition_wise, method_wise, replacement };
  Kind kind = Kind::method_wise;
  std::string replacement_method_id;  // set iff kind == replacement

  // Canonical label used in measure rows and leaderboard filenames.
  std::string label() const {
    switch (kind) {
      case Kind::repetition_wise: return "repetition_wise";
      case Kind::method_wise: return "method_wise";
      case Kind::replacement: return "replacement_" + replacement_method_id;
    }
    return {};
  }

  static std::optional<MissingnessStrategy> parse(std::string_view s) {
    MissingnessStrategy st;
    if (s == "repetition_wise") {
      st.kind = Kind::repetition_wise;
      return st;
    }
    if (s == "method_wise") {
      st.kind = Kind::method_wise;
      return st;
    }
    constexpr std::string_view prefix = "replacement_";
    if (s.substr(0, prefix.size()) == prefix && s.size() > prefix.size()) {
      st.kind = Kind::replacement;
      st.replacement_method_id = std::string(s.substr(prefix.size()));
      return st;
    }
    return std::nullopt;
  }
};

// Applies a missingness strategy to one condition's per-method result records.
// Returns the surviving records per method; every surviving record is
// converged (replacement substitutes the stand-in's values, marking the note).
inline std::map<std::string, std::vector<ResultRecord>> apply_missingness(
    const std::map<std::string, std::vector<ResultRecord>>& by_method,
    const MissingnessStrategy& strategy) {
  std::map<std::string, std::vector<ResultRecord>> out;
  using Kind = MissingnessStrategy::Kind;

  if (strategy.kind == Kind::repetition_wise) {
    std::set<int> bad;
    for (const auto& [id, records] : by_method)
      for (const auto& r : records)
        if (!r.converged) bad.insert(r.repetition);
    for (const auto& [id, records] : by_method) {
      auto& kept = out[id];
      for (const auto& r : records)
        if (r.converged && !bad.count(r.repetition)) kept.push_back(r);
    }
    return out;
  }

  if (strategy.kind == Kind::method_wise) {
    for (const auto& [id, records] : by_method) {
      auto& kept = out[id];
      for (const auto& r : records)
        if (r.converged) kept.push_back(r);
    }
    return out;
  }

  auto sub_it = by_method.find(strategy.replacement_method_id);
  if (sub_it == by_method.end())
    raise(Errc::aggregation_error,
          "replacement method '" + strategy.replacement_method_id + "' has no results");
  std::map<int, const ResultRecord*> stand_in;
  for (const auto& r : sub_it->second) stand_in[r.repetition] = &r;

  for (const auto& [id, records] : by_method) {
    auto& kept = out[id];
    for (const auto& r : records) {
      if (r.converged) {
        kept.push_back(r);
        continue;
      }
      auto it = stand_in.find(r.repetition);
      if (it == stand_in.end() || !it->second->converged)
        raise(Errc::aggregation_error, "replacement method '" + strategy.replacement_method_id +
                                           "' non-converged on repetition " +
                                           std::to_string(r.repetition));
      ResultRecord sub = *it->second;
      sub.note = kReplacedNotePrefix + strategy.replacement_method_id;
      kept.push_back(sub);
    }
  }
  return out;
}

}  // namespace pbbench
