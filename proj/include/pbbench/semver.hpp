#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

namespace pbbench {

// Plain numeric semver (major.minor.patch). No pre-release or build metadata.
struct Semver {
  long major = 0;
  long minor = 0;
  long patch = 0;

  friend bool operator==(const Semver& a, const Semver& b) {
    return a.major == b.major && a.minor == b.minor && a.patch == b.patch;
  }
  friend bool operator<(const Semver& a, const Semver& b) {
    return std::tie(a.major, a.minor, a.patch) < std::tie(b.major, b.minor, b.patch);
  }
};

inline std::optional<Semver> parse_semver(std::string_view s) {
  Semver v;
  long* parts[3] = {&v.major, &v.minor, &v.patch};
  for (int i = 0; i < 3; ++i) {
    if (s.empty()) return std::nullopt;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *parts[i]);
    if (ec != std::errc() || *parts[i] < 0) return std::nullopt;
    s.remove_prefix(static_cast<size_t>(ptr - s.data()));
    if (i < 2) {
      if (s.empty() || s.front() != '.') return std::nullopt;
      s.remove_prefix(1);
    }
  }
  return s.empty() ? std::optional<Semver>(v) : std::nullopt;
}

// Strict "a < b" on version strings; false when either does not parse.
inline bool version_less(const std::string& a, const std::string& b) {
  auto pa = parse_semver(a);
  auto pb = parse_semver(b);
  if (!pa || !pb) return false;
  return *pa < *pb;
}

}  // namespace pbbench
