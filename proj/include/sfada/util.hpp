#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace sfada {

namespace fs = std::filesystem;

// Warnings go to stderr unless a sink is installed (tests capture them).
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

std::string read_file(const fs::path& path);

// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const fs::path& path, std::string_view bytes);

// Output directory assembled off to the side and swapped in on commit().
// An uncommitted staging directory is removed on destruction.
class StagedDirectory {
 public:
  explicit StagedDirectory(fs::path target);
  ~StagedDirectory();
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;

  const fs::path& path() const { return staging_; }
  const fs::path& target() const { return target_; }
  void commit();

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

// Runs fn(i) for i in [0, count) on up to `workers` threads. If any call
// throws, the exception from the lowest failing index is rethrown.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

// splitmix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sfada
