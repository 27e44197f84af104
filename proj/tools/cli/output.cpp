#include "output.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "lenmap/version.hpp"

namespace lenmap::cli {

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.16e", value);
  return buffer;
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) line += ',';
    line += cells[i];
  }
  line += '\n';
  return line;
}

ArtifactDir::ArtifactDir(std::string dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

void ArtifactDir::write(const std::string& name, const std::string& content) {
  if (dir_.empty()) return;
  std::ofstream file(dir_ / name, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + (dir_ / name).string());
  file << content;
  artifacts_.push_back(name);
}

void write_manifest(const ArtifactDir& dir, const ManifestInfo& info) {
  const std::time_t t = std::chrono::system_clock::to_time_t(info.started);
  std::tm utc{};
  gmtime_r(&t, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &utc);

  const nlohmann::json manifest = {
      {"command", info.command},
      {"argv", info.argv},
      {"config", info.config},
      {"seed", info.seed},
      {"workers", info.workers},
      {"artifacts", dir.artifacts()},
      {"started_utc", stamp},
      {"wall_clock_seconds", info.wall_seconds},
      {"version", kVersion},
  };
  std::ofstream file(dir.path("manifest.json"), std::ios::binary);
  if (!file) throw std::runtime_error("cannot write manifest.json");
  file << manifest.dump(2) << '\n';
}

}  // namespace lenmap::cli
