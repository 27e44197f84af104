#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "cli/cli.hpp"
#include "cli/output.hpp"
#include "json.hpp"

using lenmap::cli::run_cli;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  std::stringstream ss;
  ss << file.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lenmap_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

struct TableRow {
  int layer;
  double qtilde;
  double trtilde;
  std::string status;
};

std::vector<TableRow> parse_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<TableRow> rows;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    TableRow row;
    std::string q, tr;
    fields >> row.layer >> q >> tr >> row.status;
    row.qtilde = std::strtod(q.c_str(), nullptr);
    row.trtilde = std::strtod(tr.c_str(), nullptr);
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value, 1);
  }
  ~ScopedEnv() {
    if (old_) ::setenv(name_, old_->c_str(), 1);
    else ::unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST(Format, RealsRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 2.0, -1e-300, 6.02214076e23, 5e-324}) {
    EXPECT_EQ(std::strtod(lenmap::cli::format_real(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(lenmap::cli::format_real(NAN), "nan");
  EXPECT_EQ(lenmap::cli::format_real(-INFINITY), "-inf");
  EXPECT_EQ(lenmap::cli::format_real(0.5), "5.0000000000000000e-01");
}

TEST(LengthmapCommand, ReluNearCriticalStaysAtTwo) {
  const Outcome r = run({"lengthmap", "--act", "relu", "--sw", "1.4142135", "--sb", "0", "--depth", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_table(r.out);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t l = 1; l < rows.size(); ++l) {
    EXPECT_NEAR(rows[l].qtilde, 2.0, 1e-6);
    EXPECT_EQ(rows[l].status, "finite");
  }
}

TEST(LengthmapCommand, ExpSquareDivergesAtLayerOne) {
  const Outcome r = run({"lengthmap", "--act", "exp_square:1", "--sw", "0.5", "--sb", "0", "--depth", "3"});
  ASSERT_EQ(r.code, 0);
  const auto rows = parse_table(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].status, "finite");
  EXPECT_DOUBLE_EQ(rows[1].qtilde, 0.25);
  for (std::size_t l = 1; l < rows.size(); ++l) EXPECT_EQ(rows[l].status, "diverged");
  EXPECT_TRUE(std::isnan(rows[1].trtilde));
}

TEST(LengthmapCommand, IdentityIsAllOnes) {
  const Outcome r = run({"lengthmap", "--act", "identity", "--sw", "1", "--sb", "0", "--depth", "9"});
  ASSERT_EQ(r.code, 0);
  for (const TableRow& row : parse_table(r.out)) {
    EXPECT_NEAR(row.qtilde, 1.0, 1e-10);
    EXPECT_NEAR(row.trtilde, 1.0, 1e-10);
  }
}

TEST(LengthmapCommand, JsonAndTableCarryTheSameNumbers) {
  const std::vector<std::string> base = {"lengthmap", "--act", "tanh", "--sw", "1.3", "--sb", "0.2", "--depth", "6"};
  const Outcome table = run(base);
  auto with_json = base;
  with_json.push_back("--json");
  const Outcome js = run(with_json);
  ASSERT_EQ(table.code, 0);
  ASSERT_EQ(js.code, 0);
  const auto rows = parse_table(table.out);
  const json doc = json::parse(js.out);
  ASSERT_EQ(doc["layers"].size(), rows.size());
  for (std::size_t l = 0; l < rows.size(); ++l) {
    EXPECT_EQ(doc["layers"][l]["qtilde"].get<double>(), rows[l].qtilde);
    EXPECT_EQ(doc["layers"][l]["trtilde"].get<double>(), rows[l].trtilde);
    EXPECT_EQ(doc["layers"][l]["status"], rows[l].status);
  }
  EXPECT_EQ(doc["sigma_w"].get<double>(), 1.3);
}

TEST(Cli, InvalidFlagsExitTwo) {
  EXPECT_EQ(run({"lengthmap", "--act", "softplus"}).code, 2);
  EXPECT_EQ(run({"lengthmap", "--sw", "-1"}).code, 2);
  EXPECT_EQ(run({"lengthmap", "--depth", "0"}).code, 2);
  EXPECT_EQ(run({"lengthmap", "--nonsense"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"converge", "--depth", "2"}).code, 2);
  EXPECT_EQ(run({"converge", "--width", "100,10"}).code, 2);
  EXPECT_EQ(run({"converge", "--width", "10", "--eps", "0"}).code, 2);
  EXPECT_EQ(run({"converge", "--width", "10", "--input", "zeros"}).code, 2);
  EXPECT_EQ(run({"cauchy", "--capture", "2"}).code, 2);
  EXPECT_EQ(run({"cauchy", "--capture", "0:all"}).code, 2);
  EXPECT_EQ(run({"cauchy", "--capture", "3:all", "--depth", "2"}).code, 2);
  EXPECT_EQ(run({"cauchy", "--range", "5:1"}).code, 2);
  EXPECT_EQ(run({"independence", "--capture", "2:0-2"}).code, 2);
  EXPECT_EQ(run({"replay", "--manifest", "/nonexistent/manifest.json"}).code, 2);
}

TEST(Cli, HelpAndVersionExitZero) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"--version"}).code, 0);
  EXPECT_EQ(run({"converge", "--help"}).code, 0);
}

TEST(ConvergeCommand, UndefinedMapExitsThree) {
  const Outcome r = run({"converge", "--act", "exp_square:1", "--sw", "0.5", "--depth", "2", "--width", "8"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("layer"), std::string::npos);
  EXPECT_EQ(run({"converge", "--act", "reciprocal", "--depth", "2", "--width", "8"}).code, 3);
}

TEST(ConvergeCommand, CsvSchema) {
  const Outcome r = run({"converge", "--sw", "1.4142135623730951", "--depth", "3", "--width", "16,64", "--trials", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 1u + 2u * 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"width", "layer", "success_fraction", "ci_lo", "ci_hi", "successes",
                                               "trials"}));
  EXPECT_EQ(rows[4][0], "16");
  EXPECT_EQ(rows[4][1], "all");
  EXPECT_EQ(rows[8][0], "64");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double frac = std::stod(rows[i][2]);
    EXPECT_LE(std::stod(rows[i][3]), frac);
    EXPECT_GE(std::stod(rows[i][4]), frac);
    EXPECT_EQ(frac, std::stod(rows[i][5]) / std::stod(rows[i][6]));
  }
}

TEST(ConvergeCommand, SameSeedSameBytesAcrossWorkerCounts) {
  const std::vector<std::string> args = {"converge", "--sw", "1.4142135623730951", "--depth", "4",
                                         "--width", "32,128", "--trials", "40", "--seed", "11"};
  const Outcome a = run(args);
  const Outcome b = run(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  for (const char* workers : {"1", "3"}) {
    ScopedEnv env("LENMAP_WORKERS", workers);
    EXPECT_EQ(run(args).out, a.out) << "LENMAP_WORKERS=" << workers;
  }
  auto other = args;
  other.back() = "12";
  EXPECT_NE(run(other).out, a.out);
}

TEST(Manifest, ListsArtifactsAndReplaysIdentically) {
  const fs::path dir = fresh_dir("manifest");
  const fs::path again = fresh_dir("replay");
  const std::vector<std::string> args = {"converge", "--depth", "2", "--width", "16,32", "--trials", "30",
                                         "--seed", "5", "--out", dir.string()};
  ASSERT_EQ(run(args).code, 0);
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["command"], "converge");
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_EQ(manifest["argv"].get<std::vector<std::string>>(), args);
  EXPECT_EQ(manifest["artifacts"].get<std::vector<std::string>>(),
            (std::vector<std::string>{"converge.csv", "converge.json"}));
  EXPECT_EQ(manifest["config"]["trials"], 30);
  EXPECT_TRUE(manifest.contains("version"));
  EXPECT_TRUE(manifest.contains("wall_clock_seconds"));
  EXPECT_TRUE(manifest.contains("started_utc"));
  for (const auto& name : manifest["artifacts"]) EXPECT_TRUE(fs::exists(dir / name.get<std::string>()));

  ASSERT_EQ(run({"replay", "--manifest", (dir / "manifest.json").string(), "--out", again.string()}).code, 0);
  EXPECT_EQ(slurp(dir / "converge.csv"), slurp(again / "converge.csv"));
  const json replayed = json::parse(slurp(again / "manifest.json"));
  EXPECT_EQ(replayed["argv"].back(), again.string());
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST(Manifest, NotWrittenWithoutOut) {
  const Outcome r = run({"audit", "--act", "tanh"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["verdict"], "permissible-evidence");
}

TEST(CauchyCommand, HistogramsAndFit) {
  const fs::path dir = fresh_dir("cauchy");
  const Outcome r = run({"cauchy", "--width", "20,40", "--trials", "30", "--bins", "8", "--per-init", "2",
                     "--seed", "3", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(slurp(dir / "cauchy_hist.csv"));
  ASSERT_EQ(rows.size(), 1u + 2u * 3u * 8u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"width", "init", "bin_lo", "bin_hi", "count", "density"}));
  EXPECT_EQ(rows[1][1], "all");
  EXPECT_EQ(rows[9][1], "0");
  EXPECT_EQ(rows[17][1], "1");
  EXPECT_DOUBLE_EQ(std::stod(rows[1][2]), -10.0 * std::sqrt(20.0));
  EXPECT_DOUBLE_EQ(std::stod(rows[8][3]), 10.0 * std::sqrt(20.0));

  const json fit = json::parse(slurp(dir / "cauchy_fit.json"));
  EXPECT_EQ(fit["activation"], "reciprocal");
  ASSERT_EQ(fit["results"].size(), 2u);
  const json& first = fit["results"][0];
  EXPECT_EQ(first["samples"], 30 * 20);
  EXPECT_EQ(first["seed"], 3);
  EXPECT_EQ(fit["results"][1]["seed"], 4);
  EXPECT_DOUBLE_EQ(first["reference_scale"].get<double>(), std::sqrt(20.0));
  EXPECT_LT(first["ks_vs_reference_cauchy"].get<double>(), first["ks_vs_fitted_gaussian"].get<double>());

  // Pooled counts plus out-of-range mass equal the sample count.
  std::uint64_t in_range = 0;
  for (int k = 1; k <= 8; ++k) in_range += std::stoull(rows[k][4]);
  EXPECT_EQ(in_range + first["histogram_underflow"].get<std::uint64_t>() +
                first["histogram_overflow"].get<std::uint64_t>(),
            600u);
  fs::remove_all(dir);
}

TEST(CauchyCommand, ListedUnitsOnly) {
  const Outcome r = run({"cauchy", "--width", "30", "--trials", "200", "--capture", "2:0-4", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["results"][0]["samples"], 1000);
}

TEST(IndependenceCommand, ReportsGapAndTheory) {
  const Outcome r = run({"independence", "--act", "relu", "--width", "10", "--trials", "20000", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_DOUBLE_EQ(doc["theoretical_gap"].get<double>(), 0.125);
  EXPECT_EQ(doc["pairs"], 20000);
  const double gap = doc["gap_estimate"].get<double>();
  const double se = doc["std_error"].get<double>();
  EXPECT_DOUBLE_EQ(doc["z_vs_zero"].get<double>(), gap / se);
  EXPECT_DOUBLE_EQ(doc["z_vs_theory"].get<double>(), (gap - 0.125) / se);
}

TEST(IndependenceCommand, UnsupportedActivationHasNoTheory) {
  const Outcome r = run({"independence", "--act", "tanh", "--width", "10", "--trials", "2000"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_TRUE(doc["theoretical_gap"].is_null());
  EXPECT_TRUE(doc["z_vs_theory"].is_null());
}

TEST(AuditCommand, Verdicts) {
  EXPECT_EQ(json::parse(run({"audit", "--act", "exp_square:1"}).out)["verdict"], "violates-growth");
  EXPECT_EQ(json::parse(run({"audit", "--act", "reciprocal"}).out)["verdict"], "violates-boundedness");
  EXPECT_EQ(run({"audit", "--points", "10"}).code, 2);
}
