#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

#include "beamqopt/beamqopt.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("beamqopt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string &args, const std::string &env = "") {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = env + " '" + BEAMQOPT_CLI + "' " + args + " >'" + out.string() + "' 2>'" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  std::string path(const std::string &name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

} // namespace

TEST_F(Cli, GenerateIsDeterministicAndLoadable) {
  ASSERT_EQ(run("generate --profile uniform --flows 2 --units 2 --seed 7 --out " + path("a.json")).code, 0);
  ASSERT_EQ(run("generate --profile uniform --flows 2 --units 2 --seed 7 --out " + path("b.json")).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const auto s = beamqopt::load_scenario(path("a.json"));
  EXPECT_EQ(s.flow_count(), 2u);
  EXPECT_EQ(run("build --scenario " + path("a.json") + " --out " + path("a.qubo")).code, 0);
}

TEST_F(Cli, GenerateRejectsZeroFlows) {
  const auto r = run("generate --flows 0 --out " + path("x.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, BuildPrintsBitCounts) {
  const auto s = fixtures::make_scenario({{1.0, 2.0, {1.0, 1.0}}, {1.0, 2.0, {1.0, 1.0}}},
                                         {{0, 1.0}, {0, 1.0}}, {{0, 2.0}});
  beamqopt::save_scenario(s, path("s.json"));
  const auto r = run("build --scenario " + path("s.json") + " --out " + path("s.qubo"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("N=10\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("power_slack slot=0 bits=2"), std::string::npos);
  EXPECT_NE(r.out.find("queue_slack flow=1 bits=2"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("s.qubo.index.json")));
}

TEST_F(Cli, BuildRescaleShrinksQueueSlack) {
  const auto s = fixtures::make_scenario({{1.0, 1000.0, {500.0}}, {1.0, 1000.0, {500.0}}}, {{0, 500.0}},
                                         {{0, 1000.0}});
  beamqopt::save_scenario(s, path("s.json"));
  auto r = run("build --scenario " + path("s.json") + " --out " + path("s.qubo"));
  EXPECT_NE(r.out.find("queue_slack flow=0 bits=10"), std::string::npos) << r.out;
  r = run("build --scenario " + path("s.json") + " --rescale 500 --out " + path("s.qubo"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("queue_slack flow=0 bits=2"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("queue_slack flow=1 bits=2"), std::string::npos) << r.out;
}

TEST_F(Cli, BuildMissingScenarioFails) {
  EXPECT_NE(run("build --scenario " + path("missing.json") + " --out " + path("q.qubo")).code, 0);
}

TEST_F(Cli, BuildWarnsButSucceedsOnSubQuantumCapacity) {
  const auto s = fixtures::make_scenario({{1.0, 0.5, {0.5}}}, {{0, 1.0}}, {{0, 1.0}});
  beamqopt::save_scenario(s, path("s.json"));
  const auto r = run("build --scenario " + path("s.json") + " --out " + path("s.qubo"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(Cli, SolveExactReportsOptimal) {
  beamqopt::save_scenario(fixtures::toy6(), path("s.json"));
  ASSERT_EQ(run("build --scenario " + path("s.json") + " --out " + path("s.qubo")).code, 0);
  const auto r = run("solve --scenario " + path("s.json") + " --qubo " + path("s.qubo") +
                     " --solver exact --out-dir " + path("out"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("out/result.json")));
  EXPECT_TRUE(j.at("optimal").get<bool>());
  EXPECT_EQ(j.at("objective").get<double>(), 6.0);
  EXPECT_EQ(slurp(path("out/schedule.txt")), "0 0\n");
}

TEST_F(Cli, SolveQaoaWritesMonotoneTrace) {
  beamqopt::save_scenario(fixtures::toy6(), path("s.json"));
  ASSERT_EQ(run("build --scenario " + path("s.json") + " --out " + path("s.qubo")).code, 0);
  const auto r = run("solve --scenario " + path("s.json") + " --qubo " + path("s.qubo") +
                     " --solver qaoa --layers 1 --iters 200 --exact-expectation --seed 1 --out-dir " +
                     path("out"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(path("out/trace.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "iteration,energy,accepted,depth");
  int rows = 0;
  double last = 1e300;
  while (std::getline(csv, line)) {
    ++rows;
    std::istringstream f(line);
    std::string it, e, acc;
    std::getline(f, it, ',');
    std::getline(f, e, ',');
    std::getline(f, acc, ',');
    const double energy = std::stod(e);
    EXPECT_LE(energy, last);
    if (acc == "1") {
      EXPECT_LT(energy, last);
    }
    last = energy;
  }
  EXPECT_EQ(rows, 200);
  EXPECT_TRUE(fs::exists(path("out/histogram.csv")));
  EXPECT_TRUE(fs::exists(path("out/profile.csv")));
  const auto j = nlohmann::json::parse(slurp(path("out/result.json")));
  EXPECT_TRUE(j.at("feasibility").at("feasible").get<bool>());
}

TEST_F(Cli, SolveLayerwisePrintsNonIncreasingDepthSummary) {
  beamqopt::save_scenario(fixtures::toy6(), path("s.json"));
  ASSERT_EQ(run("build --scenario " + path("s.json") + " --out " + path("s.qubo")).code, 0);
  const auto r = run("solve --scenario " + path("s.json") + " --qubo " + path("s.qubo") +
                     " --solver layerwise --layers 3 --iters 60 --seed 2 --mixer ry --out-dir " +
                     path("out"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("out/result.json")));
  const auto best = j.at("best_energy_per_depth").get<std::vector<double>>();
  ASSERT_EQ(best.size(), 3u);
  EXPECT_LE(best[1], best[0]);
  EXPECT_LE(best[2], best[1]);
  EXPECT_NE(r.out.find("depth 3 best_energy="), std::string::npos) << r.out;
}

TEST_F(Cli, SolveRepeatsWritesOneSetPerSeed) {
  beamqopt::save_scenario(fixtures::toy6(), path("s.json"));
  ASSERT_EQ(run("build --scenario " + path("s.json") + " --out " + path("s.qubo")).code, 0);
  const auto r = run("solve --scenario " + path("s.json") + " --qubo " + path("s.qubo") +
                     " --solver qaoa --iters 20 --seed 4 --repeats 3 --out-dir " + path("out"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (int seed : {4, 5, 6})
    EXPECT_TRUE(fs::exists(path("out/trace_seed" + std::to_string(seed) + ".csv")));
}

TEST_F(Cli, SolveCapacityErrorNamesSizeAndCap) {
  beamqopt::save_scenario(fixtures::toy6(), path("s.json"));
  ASSERT_EQ(run("build --scenario " + path("s.json") + " --out " + path("s.qubo")).code, 0);
  const auto r = run("solve --scenario " + path("s.json") + " --qubo " + path("s.qubo") +
                         " --solver qaoa --out-dir " + path("out"),
                     "BEAMQOPT_MAX_QUBITS=4");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("N=6"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("cap is 4"), std::string::npos) << r.err;
}

TEST_F(Cli, VerifyDefaultLambdasPass) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = beamqopt::generate_scenario(fixtures::random_profile(beamqopt::TrafficKind::Uniform, seed), seed);
    beamqopt::save_scenario(s, path("s.json"));
    ASSERT_EQ(run("build --scenario " + path("s.json") + " --out " + path("s.qubo")).code, 0);
    const auto r = run("verify --scenario " + path("s.json") + " --qubo " + path("s.qubo"));
    EXPECT_EQ(r.code, 0) << "seed " << seed << "\n" << r.out;
  }
}

TEST_F(Cli, VerifyTinyLambdasFailWithReport) {
  // Both flows want the single unit; cheap penalties make sharing it optimal.
  const auto s = fixtures::make_scenario({{2.0, 3.0, {3.0}}, {2.0, 3.0, {3.0}}}, {{0, 1.0}}, {{0, 1.0}});
  beamqopt::save_scenario(s, path("s.json"));
  ASSERT_EQ(run("build --scenario " + path("s.json") + " --lambdas 0.01 0.01 0.01 --out " + path("s.qubo")).code, 0);
  const auto r = run("verify --scenario " + path("s.json") + " --qubo " + path("s.qubo"));
  EXPECT_EQ(r.code, 1);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_FALSE(j.at("ok").get<bool>());
  EXPECT_FALSE(j.at("minimizers").at(0).at("feasibility").at("feasible").get<bool>());
}

TEST_F(Cli, VerifyRefusesLargeModels) {
  beamqopt::TrafficProfile p;
  p.flow_count = 4;
  p.unit_count = 5;
  const auto s = beamqopt::generate_scenario(p, 1);
  beamqopt::save_scenario(s, path("s.json"));
  ASSERT_EQ(run("build --scenario " + path("s.json") + " --out " + path("s.qubo")).code, 0);
  const auto r = run("verify --scenario " + path("s.json") + " --qubo " + path("s.qubo"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("capacity"), std::string::npos);
}

TEST_F(Cli, PipelineIsByteDeterministic) {
  auto pipeline = [&](const std::string &tag) {
    run("generate --profile hotspot --flows 2 --units 2 --beams 2 --seed 5 --out " + path(tag + ".json"));
    run("build --scenario " + path(tag + ".json") + " --out " + path(tag + ".qubo"));
    const auto r = run("solve --scenario " + path(tag + ".json") + " --qubo " + path(tag + ".qubo") +
                       " --solver layerwise --layers 2 --iters 40 --shots 512 --seed 3 --out-dir " +
                       path(tag));
    EXPECT_EQ(r.code, 0) << r.err;
  };
  pipeline("a");
  pipeline("b");
  for (const char *f : {"trace.csv", "histogram.csv", "profile.csv"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  EXPECT_FALSE(slurp(dir_ / "a" / "trace.csv").empty());
}
