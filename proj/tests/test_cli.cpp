// Drives the momap executable end to end.

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(MOMAP_TEST_SCRATCH) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Result momap(const std::string& args, const std::string& tag) {
  const fs::path log = scratch("logs_" + tag) / "out.txt";
  const std::string cmd = std::string("\"") + MOMAP_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> series(const fs::path& csv, const std::string& name) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> v;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    if (line.substr(a + 1, b - a - 1) == name) v.push_back(std::stod(line.substr(b + 1)));
  }
  return v;
}

}  // namespace

TEST(Cli, HarmonicKvnMatchesPinnedReference) {
  const fs::path out = scratch("harmonic_kvn");
  const Result r = momap("run --scenario harmonic_kvn --out \"" + out.string() + "\"", "hk");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto drift = series(out / "diagnostics.csv", "norm_drift");
  ASSERT_FALSE(drift.empty());
  for (double d : drift) EXPECT_LE(d, 1e-6);
  const auto ref = series(fs::path(MOMAP_REFERENCE_DIR) / "harmonic_kvn_diagnostics.csv", "norm");
  const auto got = series(out / "diagnostics.csv", "norm");
  ASSERT_EQ(ref.size(), got.size());
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(got[k], ref[k], 1e-12);
  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["schema"], "momap-run-manifest/1");
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_TRUE(fs::exists(out / "snapshots" / "snapshot_0000.csv"));
}

TEST(Cli, RunsAreBitIdentical) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(momap("run --scenario klimontovich_harmonic --out \"" + a.string() + "\"", "da").code, 0);
  ASSERT_EQ(momap("run --scenario klimontovich_harmonic --out \"" + b.string() + "\"", "db").code, 0);
  EXPECT_EQ(slurp(a / "diagnostics.csv"), slurp(b / "diagnostics.csv"));
  EXPECT_EQ(slurp(a / "snapshots" / "snapshot_0000.csv"), slurp(b / "snapshots" / "snapshot_0000.csv"));
  auto ma = nlohmann::json::parse(slurp(a / "manifest.json")), mb = nlohmann::json::parse(slurp(b / "manifest.json"));
  ma.erase("wall_time_s");
  mb.erase("wall_time_s");
  EXPECT_EQ(ma, mb);
}

TEST(Cli, UnknownKeyExitsTwo) {
  const fs::path out = scratch("unknown");
  const fs::path cfg = out / "bad.json";
  std::ofstream(cfg) << R"({"system": "kvn", "grid": {"nq": 32, "colour": "blue"}})";
  const Result r = momap("run --scenario \"" + cfg.string() + "\" --out \"" + out.string() + "\"", "uk");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("grid.colour"), std::string::npos) << r.output;
  EXPECT_EQ(momap("run --scenario no_such_scenario", "ns").code, 2);
  EXPECT_EQ(momap("run --scenario quantum_random --override nonsense", "ov").code, 2);
}

TEST(Cli, CflViolationExitsThree) {
  const fs::path out = scratch("cfl");
  const Result r = momap("run --scenario harmonic_kvn --override time.dt=0.5 --out \"" + out.string() + "\"", "cfl");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("reduce dt below"), std::string::npos) << r.output;
  EXPECT_EQ(nlohmann::json::parse(slurp(out / "manifest.json"))["exit_code"], 3);
}

TEST(Cli, NonPsdHybridExitsFour) {
  const Result r = momap("run --scenario hybrid_non_psd --out \"" + scratch("nonpsd").string() + "\"", "np");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.output.find("not positive"), std::string::npos) << r.output;
}

TEST(Cli, VerifyExitCodes) {
  const fs::path out = scratch("verify");
  const Result all = momap("verify all --out \"" + out.string() + "\"", "va");
  EXPECT_EQ(all.code, 0) << all.output;
  EXPECT_NE(all.output.find("expected-fail"), std::string::npos);
  const auto rep = nlohmann::json::parse(slurp(out / "verify_report.json"));
  EXPECT_EQ(rep["schema"], "momap-verify-report/1");
  const Result tight = momap("verify --tol 1e-4", "vt");
  EXPECT_EQ(tight.code, 1);
  EXPECT_NE(tight.output.find("slope"), std::string::npos);
  EXPECT_EQ(momap("verify warp", "vw").code, 2);
}

TEST(Cli, ConvergeReportsSlope) {
  const fs::path out = scratch("converge");
  const Result r = momap("converge --scenario berry_chern --refinements 3 --out \"" + out.string() + "\"", "cv");
  EXPECT_EQ(r.code, 0) << r.output;
  const auto j = nlohmann::json::parse(slurp(out / "convergence.json"));
  EXPECT_NEAR(j["slope"].get<double>(), 2.0, 0.3);
  EXPECT_EQ(slurp(out / "convergence.csv").rfind("h,dt,error\n", 0), 0u);
  EXPECT_EQ(momap("converge --scenario berry_chern --refinements 2", "c2").code, 2);
  EXPECT_EQ(momap("converge --scenario quantum_random", "cq").code, 2);
}

TEST(Cli, ListNamesScenarios) {
  const Result r = momap("list", "ls");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("harmonic_kvn"), std::string::npos);
  EXPECT_NE(r.output.find("weak_liouville"), std::string::npos);
}
