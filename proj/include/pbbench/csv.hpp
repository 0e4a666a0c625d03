#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pbbench/error.hpp"

namespace pbbench::csv {

// Shortest decimal string that parses back to the same double. This is what
// keeps the CSV files byte-deterministic: read(write(x)) == x and a rewrite
// of a file we produced reproduces it exactly.
inline std::string format_double(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::string format_int(long long v) {
  char buf[24];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool parse_bool(std::string_view s, bool& out) {
  if (s == "true") { out = true; return true; }
  if (s == "false") { out = false; return true; }
  return false;
}

inline void split(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Whole-file line reader. Strips one trailing '\n' per line; a '\r' anywhere
// is a schema violation (files are LF-only by contract).
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.find('\r') != std::string::npos)
    raise(Errc::schema_violation, path.string() + ": CR line endings (LF required)");
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < content.size()) {
    size_t pos = content.find('\n', start);
    if (pos == std::string::npos) {
      lines.push_back(content.substr(start));
      break;
    }
    lines.push_back(content.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

// Writes content to path via temp-file + rename so readers never observe a
// partially written file.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::io_error, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) raise(Errc::io_error, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) raise(Errc::io_error, "rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

}  // namespace pbbench::csv
