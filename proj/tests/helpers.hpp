#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

namespace pbtest {

namespace fs = std::filesystem;

// Unique scratch directory, removed on destruction.
struct TempDir {
  fs::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    auto base = fs::temp_directory_path() / "pbbench-test";
    fs::create_directories(base);
    path = base / ("t" + std::to_string(::getpid()) + "-" +
                   std::to_string(counter.fetch_add(1)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  operator const fs::path&() const { return path; }
  fs::path operator/(const std::string& sub) const { return path / sub; }
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace pbtest
