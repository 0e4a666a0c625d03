#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbbench/csv.hpp"
#include "pbbench/error.hpp"
#include "pbbench/semver.hpp"

namespace pbbench {

enum class ComponentKind { dgm, method, measure };

inline const char* kind_name(ComponentKind k) {
  switch (k) {
    case ComponentKind::dgm: return "dgm";
    case ComponentKind::method: return "method";
    case ComponentKind::measure: return "measure";
  }
  return "?";
}

enum class ComponentStatus { active, deprecated };

inline const char* status_name(ComponentStatus s) {
  return s == ComponentStatus::active ? "active" : "deprecated";
}

inline std::optional<ComponentStatus> parse_status(const std::string& s) {
  if (s == "active") return ComponentStatus::active;
  if (s == "deprecated") return ComponentStatus::deprecated;
  return std::nullopt;
}

inline bool valid_component_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

struct ComponentEntry {
  std::string id;
  std::string version;
  ComponentStatus status = ComponentStatus::active;
  std::string provenance;
  std::string added_at;  // ISO-8601 date

  bool operator==(const ComponentEntry&) const = default;
};

struct Manifest {
  std::string benchmark_name;
  std::string schema_version = "1.0.0";
  std::vector<ComponentEntry> dgms;
  std::vector<ComponentEntry> methods;
  std::vector<ComponentEntry> measures;

  bool operator==(const Manifest&) const = default;

  std::vector<ComponentEntry>& list(ComponentKind k) {
    switch (k) {
      case ComponentKind::dgm: return dgms;
      case ComponentKind::method: return methods;
      default: return measures;
    }
  }
  const std::vector<ComponentEntry>& list(ComponentKind k) const {
    return const_cast<Manifest*>(this)->list(k);
  }

  const ComponentEntry* find(ComponentKind k, const std::string& id) const {
    for (const auto& e : list(k))
      if (e.id == id) return &e;
    return nullptr;
  }
};

inline void validate_manifest(const Manifest& m) {
  if (!parse_semver(m.schema_version))
    raise(Errc::schema_violation, "schema_version '" + m.schema_version + "' is not semver");
  for (ComponentKind k : {ComponentKind::dgm, ComponentKind::method, ComponentKind::measure}) {
    const auto& entries = m.list(k);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (!valid_component_id(e.id))
        raise(Errc::schema_violation, std::string(kind_name(k)) + " id '" + e.id +
                                          "' not in [a-z0-9_-]+");
      if (!parse_semver(e.version))
        raise(Errc::schema_violation, std::string(kind_name(k)) + " '" + e.id +
                                          "' version '" + e.version + "' is not semver");
      for (std::size_t j = i + 1; j < entries.size(); ++j)
        if (entries[j].id == e.id)
          raise(Errc::schema_violation,
                std::string("duplicate ") + kind_name(k) + " id '" + e.id + "'");
    }
  }
}

// --- JSON (de)serialization ------------------------------------------------
// Key order is pinned via ordered_json so manifest bytes are deterministic.

inline nlohmann::ordered_json entry_to_json(const ComponentEntry& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["version"] = e.version;
  j["status"] = status_name(e.status);
  j["provenance"] = e.provenance;
  j["added_at"] = e.added_at;
  return j;
}

inline ComponentEntry entry_from_json(const nlohmann::ordered_json& j) {
  ComponentEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    e.version = j.at("version").get<std::string>();
    auto st = parse_status(j.at("status").get<std::string>());
    if (!st) raise(Errc::schema_violation, "bad component status");
    e.status = *st;
    e.provenance = j.at("provenance").get<std::string>();
    e.added_at = j.at("added_at").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    raise(Errc::schema_violation, std::string("manifest entry: ") + ex.what());
  }
  return e;
}

inline std::string manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["benchmark_name"] = m.benchmark_name;
  j["schema_version"] = m.schema_version;
  for (ComponentKind k : {ComponentKind::dgm, ComponentKind::method, ComponentKind::measure}) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : m.list(k)) arr.push_back(entry_to_json(e));
    j[std::string(kind_name(k)) + "s"] = arr;
  }
  return j.dump(2) + "\n";
}

inline Manifest manifest_from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    raise(Errc::schema_violation, std::string("manifest.json: ") + ex.what());
  }
  Manifest m;
  try {
    m.benchmark_name = j.at("benchmark_name").get<std::string>();
    m.schema_version = j.at("schema_version").get<std::string>();
    for (ComponentKind k :
         {ComponentKind::dgm, ComponentKind::method, ComponentKind::measure}) {
      for (const auto& e : j.at(std::string(kind_name(k)) + "s"))
        m.list(k).push_back(entry_from_json(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    raise(Errc::schema_violation, std::string("manifest.json: ") + ex.what());
  }
  validate_manifest(m);
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  validate_manifest(m);
  csv::atomic_write_file(path, manifest_to_json(m));
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return manifest_from_json(text);
}

// --- Registry operations ----------------------------------------------------

// Appends a new component or applies a strictly-greater version bump. On a
// bump the previous status is preserved (retiring is a separate operation).
inline Manifest register_component(Manifest manifest, ComponentKind kind,
                                   ComponentEntry entry) {
  if (!valid_component_id(entry.id))
    raise(Errc::invalid_argument, "component id '" + entry.id + "' not in [a-z0-9_-]+");
  if (!parse_semver(entry.version))
    raise(Errc::invalid_argument, "version '" + entry.version + "' is not semver");
  auto& entries = manifest.list(kind);
  for (auto& existing : entries) {
    if (existing.id != entry.id) continue;
    if (!version_less(existing.version, entry.version))
      raise(Errc::duplicate_component,
            std::string(kind_name(kind)) + " '" + entry.id + "' already registered at version " +
                existing.version + " (got " + entry.version + ")");
    entry.status = existing.status;
    existing = entry;
    return manifest;
  }
  entries.push_back(std::move(entry));
  return manifest;
}

// Marks a component deprecated. Never touches files: retired components keep
// all of their on-disk data and results.
inline Manifest retire_component(Manifest manifest, ComponentKind kind, const std::string& id) {
  for (auto& e : manifest.list(kind)) {
    if (e.id != id) continue;
    if (e.status == ComponentStatus::deprecated)
      raise(Errc::invalid_argument,
            std::string(kind_name(kind)) + " '" + id + "' is already deprecated");
    e.status = ComponentStatus::deprecated;
    return manifest;
  }
  raise(Errc::not_found, std::string(kind_name(kind)) + " '" + id + "' not registered");
}

}  // namespace pbbench
