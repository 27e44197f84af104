#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace lenmap::cli {

/// 17 significant digits in scientific notation; "nan", "inf", "-inf".
std::string format_real(double value);

/// Joins cells with commas and appends a newline.
std::string csv_row(const std::vector<std::string>& cells);

/// Files written under an output directory. Inactive without a directory.
class ArtifactDir {
 public:
  explicit ArtifactDir(std::string dir);

  bool active() const { return !dir_.empty(); }
  /// Writes `content` to `name` and records it. No-op when inactive.
  void write(const std::string& name, const std::string& content);
  const std::vector<std::string>& artifacts() const { return artifacts_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> artifacts_;
};

struct ManifestInfo {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::chrono::system_clock::time_point started;
  double wall_seconds = 0.0;
};

/// Writes manifest.json next to the artifacts.
void write_manifest(const ArtifactDir& dir, const ManifestInfo& info);

}  // namespace lenmap::cli
