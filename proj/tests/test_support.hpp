#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sfada/raster.hpp"
#include "sfada/util.hpp"

namespace sfada::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "sfada") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_sink(nullptr); }
  std::vector<std::string> messages;
};

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double p = 0.5) {
  BinaryMask m(w, h);
  std::bernoulli_distribution bit(p);
  for (auto& v : m.values()) v = bit(rng) ? 1 : 0;
  return m;
}

inline std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  const std::string s = read_file(p);
  return {s.begin(), s.end()};
}

}  // namespace sfada::testing
