#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "tuckeropt/tuckeropt.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

fs::path workdir() {
  const fs::path d = fs::temp_directory_path() / "tuckeropt_test_cli";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// runs the CLI with stdout and stderr captured together
CliRun cli(const std::string& args) {
  const fs::path log = workdir() / "last_run.txt";
  const std::string cmd = std::string("\"") + TUCKEROPT_CLI + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(log);
  return r;
}

const std::string data = TUCKEROPT_TEST_DATA;

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST(Cli, TinyBundleConvergesWithRfgrapR) {
  const fs::path sum = workdir() / "tiny_summary.json";
  const CliRun r = cli("complete --bundle " + data + "/tiny --solver rfgrap-r --rank 2 --summary " +
                    sum.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("rank = (2,2,2)"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(slurp(sum));
  EXPECT_EQ(j["termination"], "converged");
  EXPECT_EQ(j["rank"], nlohmann::json({2, 2, 2}));
  EXPECT_LT(j["test_error"].get<double>(), 1e-6);
}

TEST(Cli, MissingFileExitsOneWithPath) {
  const CliRun r = cli("complete --omega /nonexistent/omega.coo --rank 2");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("/nonexistent/omega.coo"), std::string::npos) << r.out;
}

TEST(Cli, ZeroIterationsExitsTwoWithOneRecord) {
  const fs::path trace = workdir() / "zero_trace.csv";
  const CliRun r = cli("complete --bundle " + data + "/tiny --rank 2 --max-iters 0 --trace " +
                    trace.string());
  EXPECT_EQ(r.code, 2) << r.out;
  const std::string csv = slurp(trace);
  EXPECT_EQ(count_lines(csv), 2u) << csv;  // header plus the initial record
  EXPECT_EQ(csv.rfind("iter,f,stationarity", 0), 0u);
}

TEST(Cli, SaveAndResume) {
  const fs::path ck = workdir() / "ck.ttkr";
  const CliRun a = cli("complete --bundle " + data + "/tiny --solver rfgrap --rank 2 --max-iters 5 --save " +
                    ck.string());
  EXPECT_EQ(a.code, 2) << a.out;
  const auto x = tuckeropt::io::read_tucker(ck);
  EXPECT_EQ(x.dims(), (tuckeropt::Dims{8, 8, 8}));
  const CliRun b = cli("complete --bundle " + data + "/tiny --solver rfgrap --rank 2 --resume " +
                    ck.string());
  EXPECT_EQ(b.code, 0) << b.out;
}

TEST(Cli, BadArgumentsExitOne) {
  EXPECT_EQ(cli("complete --bundle " + data + "/tiny --rank 2 --solver newton").code, 1);
  EXPECT_EQ(cli("complete --bundle " + data + "/tiny").code, 1);
  EXPECT_EQ(cli("complete --bundle " + data + "/tiny --rank 9").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, HosvdRankOneFixtureIsExact) {
  const CliRun r = cli("hosvd --input " + data + "/rank1_4x3x5.tdns --rank 1");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto pos = r.out.find("truncation error ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LE(std::stod(r.out.substr(pos + 17)), 1e-12);
  EXPECT_NE(r.out.find("rank (1,1,1)"), std::string::npos);
}

TEST(Cli, HosvdFullRankGivesZeroError) {
  const CliRun r = cli("hosvd --input " + data + "/random_4x3x5.tdns --rank 4,3,5");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto pos = r.out.find("relative error ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LE(std::stod(r.out.substr(pos + 15)), 1e-14);
}

TEST(Cli, HosvdMatchesLibrary) {
  const fs::path out = workdir() / "h.ttkr";
  const CliRun r = cli("hosvd --input " + data + "/random_4x3x5.tdns --rank 2,2,3 --output " +
                    out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto a = tuckeropt::io::read_dense(data + "/random_4x3x5.tdns");
  const auto direct = tuckeropt::hosvd(a, {2, 2, 3});
  const double err = tuckeropt::fro_norm(a - tuckeropt::to_dense(direct));
  const auto pos = r.out.find("truncation error ");
  EXPECT_NEAR(std::stod(r.out.substr(pos + 17)), err, 1e-9 * err);
  EXPECT_TRUE(tuckeropt::io::read_tucker(out) == direct);
}

TEST(Cli, CheckAngleSuiteOnly) {
  const CliRun r = cli("check --suite angle --restarts 5");
  EXPECT_EQ(r.code, 0) << r.out;
  std::istringstream lines(r.out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["name"].get<std::string>().rfind("angle", 0), 0u) << line;
    EXPECT_TRUE(j["pass"].get<bool>()) << line;
    ++n;
  }
  EXPECT_EQ(n, 5u);
}

TEST(Cli, BenchIsByteIdenticalAcrossReruns) {
  const fs::path d1 = workdir() / "bench1", d2 = workdir() / "bench2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  const std::string common =
      "bench over-rank --n 10 --true-rank 1 --rank 2 --p 0.4 --max-iters 8 --seed 5 --no-timing";
  const CliRun a = cli(common + " --out-dir " + d1.string());
  const CliRun b = cli(common + " --out-dir " + d2.string());
  ASSERT_NE(a.code, 1) << a.out;
  EXPECT_EQ(a.code, b.code);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d1)) {
    EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename())) << e.path();
    ++files;
  }
  // four traces, the comparison table and the summary
  EXPECT_EQ(files, 6u);
  EXPECT_TRUE(fs::exists(d1 / "over-rank_r2_grap-r.csv"));
  const auto summary = nlohmann::json::parse(slurp(d1 / "over-rank_summary.json"));
  EXPECT_EQ(summary.size(), 4u);
}

TEST(Cli, GenerateWritesBundle) {
  const fs::path out = workdir() / "gen";
  fs::remove_all(out);
  const CliRun r = cli("generate --n 6 --true-rank 2 --p 0.3 --seed 4 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto b = tuckeropt::io::read_bundle(out);
  EXPECT_EQ(b.problem.omega.nnz(), 65u);
  EXPECT_EQ(b.meta["seed"], 4);
  EXPECT_TRUE(fs::exists(out / "truth.ttkr"));
  EXPECT_EQ(cli("generate --n 6 --p 0.9 --out " + out.string()).code, 1);
}
