#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "mdd/data.hpp"
#include "mdd/model_io.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(MDD_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the time_s column of a report CSV.
std::string without_times(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k == 3) continue;
      out += cells[k] + ",";
    }
    out += "\n";
  }
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mdd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream out(path("d.libsvm"));
    mdd::write_libsvm(oracle::synthetic_linear(80, 4, 0.3, 5), out);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, TrainMddWritesModelAndTrace) {
  const auto o = run("train --method mdd-ls --data " + path("d.libsvm") + " --m 5 --lambda 1e-3 --gamma 1e-2 --out " +
                     path("model.json") + " --trace " + path("trace.csv"));
  ASSERT_EQ(o.code, 0) << o.out;
  ASSERT_TRUE(fs::exists(path("model.json")));
  ASSERT_TRUE(fs::exists(path("trace.csv")));
  const auto model = mdd::load_model(path("model.json"));
  EXPECT_EQ(model.kind, "mdd-ls");
  EXPECT_EQ(model.linear_shards.size(), 5u);
  EXPECT_EQ(slurp(path("trace.csv")).substr(0, 20), "t,consensus_delta,di");
  EXPECT_NE(o.out.find("train rmse"), std::string::npos);
}

TEST_F(Cli, MddNeedsTwoShards) {
  const auto o = run("train --method mdd-ls --data " + path("d.libsvm") + " --m 1 --out " + path("m.json"));
  EXPECT_EQ(o.code, 2);
}

TEST_F(Cli, GammaZeroMatchesDrr) {
  const std::string common = " --data " + path("d.libsvm") + " --m 4 --lambda 1e-2 --seed 9";
  ASSERT_EQ(run("train --method mdd-ls --gamma 0" + common + " --out " + path("a.json") + " --trace " +
                path("t.csv")).code, 0);
  ASSERT_EQ(run("train --method drr" + common + " --out " + path("b.json")).code, 0);
  const auto a = mdd::load_model(path("a.json"));
  const auto b = mdd::load_model(path("b.json"));
  ASSERT_EQ(a.linear_shards.size(), b.linear_shards.size());
  for (std::size_t i = 0; i < a.linear_shards.size(); ++i) EXPECT_EQ(a.linear_shards[i], b.linear_shards[i]);
}

TEST_F(Cli, BadInputsExitCodes) {
  EXPECT_EQ(run("train --method svm --data " + path("d.libsvm")).code, 2);
  EXPECT_EQ(run("train --method rr --data " + path("d.libsvm") + " --lambda -1 --out " + path("m.json")).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train --method rr --data " + path("missing.libsvm") + " --out " + path("m.json")).code, 1);
  std::ofstream(path("bad.libsvm")) << "1 1:1\n1 x:2\n";
  EXPECT_EQ(run("train --method rr --data " + path("bad.libsvm") + " --out " + path("m.json")).code, 1);
}

TEST_F(Cli, BenchmarkTwoTrialsThreeSections) {
  const auto o = run("benchmark --data " + path("d.libsvm") + " --methods rr,drr,mdd-ls --m 5 --trials 2" +
                     " --lambda-grid 1e-3,1e-1 --gamma-grid 1e-3,1e-2 --out-csv " + path("r.csv") + " --out-json " +
                     path("r.json"));
  ASSERT_EQ(o.code, 0) << o.out;
  const auto doc = nlohmann::json::parse(slurp(path("r.json")));
  ASSERT_EQ(doc["reports"].size(), 3u);
  EXPECT_EQ(doc["reports"][2]["method"], "mdd-ls-5");
  for (const auto& r : doc["reports"]) EXPECT_EQ(r["trials"].size(), 2u);
  std::istringstream csv(slurp(path("r.csv")));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 1 + 3 * 2);
}

TEST_F(Cli, BenchmarkDefaultsFollowProtocol) {
  const auto o = run("benchmark --data " + path("d.libsvm") + " --methods rr,mdd-ls,kdrr --dry-run --out-csv " +
                     path("r.csv") + " --out-json " + path("r.json"));
  ASSERT_EQ(o.code, 0) << o.out;
  const auto doc = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(doc["protocol"]["trials"], 30);
  EXPECT_EQ(doc["protocol"]["folds"], 5);
  EXPECT_EQ(doc["protocol"]["methods"][1]["gamma_points"], 10);
  EXPECT_EQ(doc["protocol"]["methods"][2]["sigma_points"], 21);
}

TEST_F(Cli, BenchmarkDeterministicPerSeed) {
  const std::string common = "benchmark --data " + path("d.libsvm") + " --methods drr,mdd-ls --m 3 --trials 3" +
                             " --seed 5 --lambda-grid 1e-3,1e-1 --gamma-grid 1e-3,1e-1 --out-json " + path("r.json");
  ASSERT_EQ(run(common + " --out-csv " + path("a.csv")).code, 0);
  ASSERT_EQ(run(common + " --out-csv " + path("b.csv")).code, 0);
  EXPECT_EQ(without_times(slurp(path("a.csv"))), without_times(slurp(path("b.csv"))));
}

TEST_F(Cli, DiversityOfModels) {
  mdd::SavedModel a;
  a.kind = "rr";
  a.lambda = 1.0;
  a.linear_shards = {Eigen::VectorXd::Constant(1, 0.0)};
  mdd::SavedModel b = a;
  b.linear_shards = {Eigen::VectorXd::Constant(1, 2.0)};
  mdd::save_model(a, path("a.json"));
  mdd::save_model(b, path("b.json"));
  auto o = run("diversity " + path("a.json") + " " + path("b.json"));
  ASSERT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("diversity 2\n"), std::string::npos) << o.out;
  o = run("diversity " + path("a.json") + " " + path("a.json"));
  EXPECT_NE(o.out.find("diversity 0\n"), std::string::npos) << o.out;

  mdd::SavedModel k;
  k.kind = "krr";
  k.lambda = 1.0;
  k.sigma = 1.0;
  k.kernel_model.kernel.sigma = 1.0;
  k.kernel_model.shards.push_back({Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1)});
  mdd::save_model(k, path("k.json"));
  EXPECT_EQ(run("diversity " + path("a.json") + " " + path("k.json")).code, 2);
}

TEST_F(Cli, CacheRoundTrip) {
  ASSERT_EQ(run("cache --data " + path("d.libsvm") + " --out " + path("d.bin")).code, 0);
  const auto text = mdd::load_dataset(path("d.libsvm"));
  const auto bin = mdd::load_dataset(path("d.bin"));
  EXPECT_EQ(text.features, bin.features);
  EXPECT_EQ(run("train --method rr --data " + path("d.bin") + " --out " + path("m.json")).code, 0);
}

}  // namespace
