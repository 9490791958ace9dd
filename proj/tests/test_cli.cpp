#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = EMACHINE_CLI;
const std::string kConfigs = EMACHINE_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("emachine_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log) {
  const int status = std::system((kCli + " " + args + " > " + log.string() + " 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string config(const std::string& name) { return kConfigs + "/" + name; }

std::size_t file_count(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().filename() != "log.txt";
  return n;
}

}  // namespace

TEST(Cli, AfRunsAreByteIdentical) {
  const auto a = scratch("af_a"), b = scratch("af_b");
  ASSERT_EQ(run("--config " + config("af_and.json") + " --seed 7 --out-dir " + a.string() + " af", a / "log.txt"), 0)
      << slurp(a / "log.txt");
  ASSERT_EQ(run("--config " + config("af_and.json") + " --seed 7 --out-dir " + b.string() + " af", b / "log.txt"), 0);
  for (const char* f : {"af_trace.csv", "af_summary.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const auto summary = nlohmann::json::parse(slurp(a / "af_summary.json"));
  EXPECT_TRUE(summary["checks"]["equivalent_to_machine"].get<bool>());
  EXPECT_EQ(summary["outputs"][3], "1");
  EXPECT_EQ(slurp(a / "af_trace.csv").substr(0, 29), "cycle,x,win,s_win,se_win,y\n0,");
}

TEST(Cli, SeedMayComeFromConfigButNotBeMissing) {
  const auto dir = scratch("seed");
  auto cfg = nlohmann::json::parse(slurp(config("af_and.json")));
  cfg.erase("seed");
  std::ofstream(dir / "noseed.json") << cfg.dump();
  EXPECT_EQ(run("--config " + (dir / "noseed.json").string() + " --out-dir " + dir.string() + " af", dir / "log.txt"), 1);
  EXPECT_NE(slurp(dir / "log.txt").find("seed"), std::string::npos);
  EXPECT_EQ(file_count(dir), 1u);  // only the config itself
  EXPECT_EQ(run("--config " + (dir / "noseed.json").string() + " --seed 3 --out-dir " + dir.string() + " af",
                dir / "log.txt"),
            0);
}

TEST(Cli, MalformedConfigLeavesNoFiles) {
  const auto dir = scratch("bad");
  const auto out = dir / "out";
  std::ofstream(dir / "bad.json") << R"({"seed": 1, "machine": {"alphabet_x": ["a"], "alphabet_y": ["0"],
    "table": [["a", "9"]]}, "inputs": ["a"]})";
  EXPECT_EQ(run("--config " + (dir / "bad.json").string() + " --out-dir " + out.string() + " af", dir / "log.txt"), 1);
  EXPECT_NE(slurp(dir / "log.txt").find("config/machine"), std::string::npos) << slurp(dir / "log.txt");
  EXPECT_FALSE(fs::exists(out));

  std::ofstream(dir / "syntax.json") << "{\"seed\": 1, ";
  EXPECT_EQ(run("--config " + (dir / "syntax.json").string() + " --out-dir " + out.string() + " pmm master",
                dir / "log.txt"),
            1);
  EXPECT_FALSE(fs::exists(out));

  std::ofstream(dir / "kind.json") << R"({"kind": "pmm", "seed": 1})";
  EXPECT_EQ(run("--config " + (dir / "kind.json").string() + " --out-dir " + out.string() + " af", dir / "log.txt"), 1);
  EXPECT_NE(slurp(dir / "log.txt").find("config/kind"), std::string::npos);
}

TEST(Cli, MissingFieldNamesItsPath) {
  const auto dir = scratch("path");
  auto cfg = nlohmann::json::parse(slurp(config("spike.json")));
  cfg["ensembles"][1].erase("N");
  std::ofstream(dir / "c.json") << cfg.dump();
  EXPECT_EQ(run("--config " + (dir / "c.json").string() + " --out-dir " + dir.string() + " epmm spike", dir / "log.txt"),
            1);
  EXPECT_NE(slurp(dir / "log.txt").find("config/ensembles/1/N"), std::string::npos) << slurp(dir / "log.txt");
}

TEST(Cli, RobotTrainThenMentalExam) {
  const auto dir = scratch("robot");
  ASSERT_EQ(run("--config " + config("robot.json") + " --out-dir " + dir.string() + " robot train --tapes " +
                    config("tapes.json"),
                dir / "log.txt"),
            0)
      << slurp(dir / "log.txt");
  ASSERT_TRUE(fs::exists(dir / "brain.json"));
  ASSERT_EQ(run("--seed 1 --out-dir " + dir.string() + " robot exam --brain " + (dir / "brain.json").string() +
                    " --tape \"(())()\" --mental",
                dir / "log.txt"),
            0)
      << slurp(dir / "log.txt");
  const auto s = nlohmann::json::parse(slurp(dir / "robot_exam_summary.json"));
  EXPECT_EQ(s["real_verdict"], "Y");
  EXPECT_EQ(s["mental_verdict"], s["real_verdict"]);
  EXPECT_TRUE(s["checks"]["mental_equals_real"].get<bool>());
  const auto mental = slurp(dir / "robot_mental.csv");
  EXPECT_NE(mental.find(",AM,AS"), std::string::npos);
}

TEST(Cli, RuntimeErrorExitsTwo) {
  const auto dir = scratch("stuck");
  std::ofstream(dir / "tapes.json") << R"x(["()"])x";
  ASSERT_EQ(run("--seed 1 --out-dir " + dir.string() + " robot train --tapes " + (dir / "tapes.json").string(),
                dir / "log.txt"),
            0);
  const auto out = dir / "exam";
  EXPECT_EQ(run("--seed 1 --out-dir " + out.string() + " robot exam --brain " + (dir / "brain.json").string() +
                    " --tape \"((\"",
                dir / "log.txt"),
            2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, EveryShippedConfigRuns) {
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"ann0_identity.json", "ann0"},          {"af0_program.json", "af"},
      {"fsm_mod3.json", "fsm"},                {"pmm_two_state.json", "pmm master"},
      {"pmm_two_state.json", "pmm path"},      {"pmm_channel5_na.json", "pmm path"},
      {"ghk.json", "pmm ghk"},                 {"epmm_two_state.json", "epmm run"},
      {"spike.json", "epmm spike"}};
  for (const auto& [file, cmd] : runs) {
    const auto dir = scratch("ship");
    EXPECT_EQ(run("--config " + config(file) + " --out-dir " + dir.string() + " " + cmd, dir / "log.txt"), 0)
        << file << ": " << slurp(dir / "log.txt");
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() != ".csv") continue;
      std::istringstream lines(slurp(e.path()));
      std::string line;
      std::getline(lines, line);
      const auto columns = std::count(line.begin(), line.end(), ',');
      while (std::getline(lines, line)) ASSERT_EQ(std::count(line.begin(), line.end(), ','), columns) << e.path();
    }
  }
}

TEST(Cli, Ann0SummaryAgreesWithAf0) {
  const auto dir = scratch("ann0");
  ASSERT_EQ(run("--config " + config("ann0_identity.json") + " --out-dir " + dir.string() + " ann0", dir / "log.txt"), 0);
  const auto s = nlohmann::json::parse(slurp(dir / "ann0_summary.json"));
  EXPECT_TRUE(s["checks"]["af0_agreement"].get<bool>());
  const auto header = slurp(dir / "ann0_trace.csv").substr(0, 30);
  EXPECT_EQ(header.substr(0, 14), "t,u_1,u_2,r_1,");
}

TEST(Cli, VerifyReportsAndRejectsUnknownSuites) {
  const auto dir = scratch("verify");
  EXPECT_EQ(run("--out-dir " + dir.string() + " verify conservation", dir / "log.txt"), 0);
  EXPECT_NE(slurp(dir / "log.txt").find("[PASS] 9 conservation"), std::string::npos);
  const auto report = nlohmann::json::parse(slurp(dir / "verify_report.json"));
  EXPECT_TRUE(report["pass"].get<bool>());
  EXPECT_EQ(run("--out-dir " + dir.string() + " verify unknown", dir / "log.txt"), 1);
  EXPECT_NE(slurp(dir / "log.txt").find("af-universality"), std::string::npos);
}

TEST(Cli, VerifyReportIsReproducible) {
  const auto a = scratch("rep_a"), b = scratch("rep_b");
  ASSERT_EQ(run("--seed 4 --out-dir " + a.string() + " verify af-universality", a / "log.txt"), 0);
  ASSERT_EQ(run("--seed 4 --out-dir " + b.string() + " verify af-universality", b / "log.txt"), 0);
  EXPECT_EQ(slurp(a / "verify_report.json"), slurp(b / "verify_report.json"));
}

TEST(Cli, UsageErrorExitsOne) {
  const auto dir = scratch("usage");
  EXPECT_EQ(run("frobnicate", dir / "log.txt"), 1);
  EXPECT_EQ(run("--help", dir / "log.txt"), 0);
}
