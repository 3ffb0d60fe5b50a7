#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pentrl/commands.hpp"
#include "pentrl/common.hpp"

namespace {

using nlohmann::json;
using pentrl::cli::run_command;
namespace fs = std::filesystem;

json flags(json f) { return json{{"flags", std::move(f)}}; }

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

// Small, fast training options shared by the train tests.
json tiny_train(const std::string& envs, const std::string& run_dir) {
  return {{"train_envs", envs + "/train"}, {"val_envs", envs + "/val"}, {"total_timesteps", 256},
          {"rollout_steps", 64},           {"n_rollout_envs", 2},       {"batch_size", 64},
          {"steps_per_episode", 20},       {"n_epochs", 1},             {"n_train_envs", 4},
          {"n_val_envs", 2},               {"deterministic", true},     {"run_dir", run_dir}};
}

class CommandsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = oracle::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    envs_ = dir_ + "/envs";
    run_command("gen-envs", flags({{"count", 6}, {"split", "4/2"}, {"seed", 11}, {"out", envs_}}));
  }
  std::string dir_, envs_;
};

TEST(Commands, ExitCodes) {
  EXPECT_EQ(pentrl::cli::exit_code_for(pentrl::ErrorCode::kConfig), 2);
  EXPECT_EQ(pentrl::cli::exit_code_for(pentrl::ErrorCode::kInvalidArgument), 2);
  EXPECT_EQ(pentrl::cli::exit_code_for(pentrl::ErrorCode::kIo), 3);
  EXPECT_EQ(pentrl::cli::exit_code_for(pentrl::ErrorCode::kNumeric), 3);
}

TEST(Commands, UnknownCommandAndOption) {
  EXPECT_THROW(run_command("frobnicate", json::object()), pentrl::ConfigError);
  EXPECT_THROW(run_command("show-config", flags({{"no_such_option", 1}})), pentrl::ConfigError);
  // A key valid for another command still does not apply here.
  EXPECT_THROW(run_command("show-config", flags({{"count", 3}})), pentrl::ConfigError);
}

TEST(Commands, GenEnvsRejectsNonPositiveCount) {
  const auto dir = oracle::temp_dir("cmd-count0");
  try {
    run_command("gen-envs", flags({{"count", 0}, {"out", dir}}));
    FAIL() << "expected ConfigError";
  } catch (const pentrl::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("count must be positive"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(dir + "/manifest.json"));
}

TEST(Commands, GenEnvsSplit) {
  const auto dir = oracle::temp_dir("cmd-split");
  auto r = run_command("gen-envs", flags({{"count", 60}, {"split", "50/10"}, {"out", dir}}));
  EXPECT_EQ(r["split"]["train"], 50);
  EXPECT_EQ(r["split"]["val"], 10);
  EXPECT_EQ(pentrl::cli::load_environment_dir(dir + "/train").size(), 50u);
  EXPECT_EQ(pentrl::cli::load_environment_dir(dir + "/val").size(), 10u);
  EXPECT_TRUE(fs::exists(dir + "/manifest.json"));
  EXPECT_THROW(run_command("gen-envs", flags({{"count", 60}, {"split", "50/9"}, {"out", dir + "/x"}})),
               pentrl::ConfigError);
  EXPECT_THROW(run_command("gen-envs", flags({{"count", 60}, {"split", "fifty"}, {"out", dir + "/y"}})),
               pentrl::ConfigError);
}

TEST(Commands, GenEnvsDeterministic) {
  const auto a = oracle::temp_dir("cmd-det-a"), b = oracle::temp_dir("cmd-det-b");
  run_command("gen-envs", flags({{"count", 1}, {"seed", 42}, {"out", a}}));
  run_command("gen-envs", flags({{"count", 1}, {"seed", 42}, {"out", b}}));
  EXPECT_EQ(oracle::read_file(a + "/env_0000.json"), oracle::read_file(b + "/env_0000.json"));
  const auto c = oracle::temp_dir("cmd-det-c");
  run_command("gen-envs", flags({{"count", 1}, {"seed", 43}, {"out", c}}));
  EXPECT_NE(oracle::read_file(a + "/env_0000.json"), oracle::read_file(c + "/env_0000.json"));
}

TEST(Commands, Precedence) {
  const auto dir = oracle::temp_dir("cmd-prec");
  const auto cfg = dir + "/cfg.json";
  write(cfg, R"({"seed": 5, "gamma": 0.9})");

  auto def = run_command("show-config", json::object());
  EXPECT_EQ(def["config"]["seed"], 0);
  EXPECT_EQ(def["config"]["total_timesteps"], 1000000);

  auto from_file = run_command("show-config", {{"config", cfg}});
  EXPECT_EQ(from_file["config"]["seed"], 5);
  EXPECT_DOUBLE_EQ(from_file["config"]["gamma"].get<double>(), 0.9);

  auto flag_wins = run_command("show-config", {{"config", cfg}, {"flags", {{"seed", 7}}}});
  EXPECT_EQ(flag_wins["config"]["seed"], 7);
  EXPECT_DOUBLE_EQ(flag_wins["config"]["gamma"].get<double>(), 0.9);

  // Environment variables sit between the config file and the built-in default.
  ::setenv("PENTRL_RUN_ROOT", (dir + "/from-env").c_str(), 1);
  EXPECT_EQ(pentrl::cli::command_defaults("train")["out"], dir + "/from-env");
  ::unsetenv("PENTRL_RUN_ROOT");
  EXPECT_EQ(pentrl::cli::command_defaults("train")["out"], "runs");

  write(dir + "/bad.json", R"({"seed": 1, "bogus": true})");
  EXPECT_THROW(run_command("show-config", {{"config", dir + "/bad.json"}}), pentrl::ConfigError);
  write(dir + "/broken.json", "{");
  EXPECT_THROW(run_command("show-config", {{"config", dir + "/broken.json"}}), pentrl::ConfigError);
  EXPECT_THROW(run_command("show-config", {{"config", dir + "/missing.json"}}), pentrl::ConfigError);
}

TEST(Commands, InvalidTrainConfigListsProblems) {
  try {
    run_command("show-config", flags({{"gamma", 1.5}, {"clip_epsilon", -1.0}}));
    FAIL() << "expected ConfigError";
  } catch (const pentrl::ConfigError& e) {
    EXPECT_GE(e.problems.size(), 2u);
  }
}

TEST_F(CommandsTest, TrainMissingEnvDirCreatesNothing) {
  const auto root = dir_ + "/runs";
  auto f = tiny_train(envs_, root + "/r");
  f["train_envs"] = dir_ + "/nowhere";
  EXPECT_THROW(run_command("train", flags(f)), pentrl::ConfigError);
  EXPECT_FALSE(fs::exists(root));

  f = tiny_train(envs_, "");
  f.erase("run_dir");
  f["train_envs"] = dir_ + "/nowhere";
  f["out"] = root;
  EXPECT_THROW(run_command("train", flags(f)), pentrl::ConfigError);
  EXPECT_FALSE(fs::exists(root));
}

TEST_F(CommandsTest, TrainWritesManifest) {
  auto f = tiny_train(envs_, "");
  f.erase("run_dir");
  f["out"] = dir_ + "/runs";
  f["seed"] = 3;
  auto r = run_command("train", flags(f));
  const std::string out = r["out"];
  EXPECT_EQ(fs::path(out).parent_path(), fs::path(dir_ + "/runs"));
  EXPECT_NE(out.find("-seed3"), std::string::npos);
  auto m = json::parse(oracle::read_file(out + "/manifest.json"));
  EXPECT_EQ(m["format"], "pentrl-manifest");
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["config"]["algorithm"], "ppo");
  EXPECT_EQ(m["config"]["total_timesteps"], 256);
  for (const char* a : {"best.ckpt.json", "config.json", "final.ckpt.json", "metrics.csv"}) {
    EXPECT_TRUE(fs::exists(out + "/" + a)) << a;
    EXPECT_NE(std::find(m["artifacts"].begin(), m["artifacts"].end(), a), m["artifacts"].end()) << a;
  }
  // A run directory is never reused.
  f.erase("out");
  f["run_dir"] = out;
  EXPECT_THROW(run_command("train", flags(f)), pentrl::IoError);
}

TEST_F(CommandsTest, DefaultTimestepsRecorded) {
  // A full default run is too long here; train records the config resolved
  // by this same path.
  auto cfg = run_command("show-config", flags({{"algorithm", "ppo"}}));
  EXPECT_EQ(cfg["config"]["total_timesteps"], 1000000);
  EXPECT_EQ(pentrl::cli::command_defaults("train")["total_timesteps"], 1000000);
}

TEST_F(CommandsTest, DqnAlgorithmRecorded) {
  auto f = tiny_train(envs_, dir_ + "/dqn");
  f["algorithm"] = "dqn";
  f["learning_starts"] = 64;
  f["dqn_batch_size"] = 16;
  auto r = run_command("train", flags(f));
  EXPECT_EQ(r["algorithm"], "dqn");
  auto m = json::parse(oracle::read_file(dir_ + "/dqn/manifest.json"));
  EXPECT_EQ(m["config"]["algorithm"], "dqn");
  auto ck = json::parse(oracle::read_file(dir_ + "/dqn/best.ckpt.json"));
  EXPECT_EQ(ck["algorithm"], "dqn");
}

TEST_F(CommandsTest, EvalStatsAgree) {
  run_command("train", flags(tiny_train(envs_, dir_ + "/run")));
  auto ev = run_command("eval", flags({{"checkpoint", dir_ + "/run/best.ckpt.json"},
                                       {"envs", envs_ + "/val"},
                                       {"episodes", 10},
                                       {"max_steps", 30},
                                       {"out", dir_ + "/eval"}}));
  EXPECT_EQ(ev["episodes"], 10);
  int traces = 0;
  for (const auto& e : fs::directory_iterator(dir_ + "/eval/traces")) traces += e.path().extension() == ".jsonl";
  EXPECT_EQ(traces, 10);

  auto st = run_command("stats", flags({{"traces", dir_ + "/eval/traces"}, {"out", dir_ + "/stats"}}));
  EXPECT_EQ(st["episodes"], 10);
  EXPECT_EQ(oracle::read_file(dir_ + "/eval/stats.json"), oracle::read_file(dir_ + "/stats/stats.json"));
  EXPECT_EQ(oracle::read_file(dir_ + "/eval/stats.csv"), oracle::read_file(dir_ + "/stats/stats.csv"));

  EXPECT_THROW(run_command("eval", flags({{"checkpoint", dir_ + "/run/best.ckpt.json"},
                                          {"envs", envs_ + "/val"},
                                          {"mode", "sideways"},
                                          {"out", dir_ + "/eval2"}})),
               pentrl::ConfigError);
}

TEST_F(CommandsTest, CheckpointMismatchRefused) {
  run_command("train", flags(tiny_train(envs_, dir_ + "/run")));
  auto ck = json::parse(oracle::read_file(dir_ + "/run/best.ckpt.json"));
  ck["architecture"]["m"] = 100;
  write(dir_ + "/bad.ckpt.json", ck.dump());
  try {
    run_command("eval", flags({{"checkpoint", dir_ + "/bad.ckpt.json"}, {"envs", envs_ + "/val"}, {"out", dir_ + "/e"}}));
    FAIL() << "expected MismatchError";
  } catch (const pentrl::MismatchError& e) {
    EXPECT_EQ(pentrl::cli::exit_code_for(e.code()), 3);
  }
  EXPECT_FALSE(fs::exists(dir_ + "/e/manifest.json"));
}

TEST(Commands, ReportOnEmptyTraceDir) {
  const auto dir = oracle::temp_dir("cmd-empty-report");
  fs::create_directories(dir + "/traces");
  auto r = run_command("report", flags({{"traces", dir + "/traces"}, {"out", dir + "/report"}, {"offline", true}}));
  EXPECT_EQ(r["findings"], 0);
  auto doc = json::parse(oracle::read_file(dir + "/report/report.json"));
  auto schema = json::parse(oracle::read_file(std::string(PENTRL_DATA_DIR) + "/../schemas/report.schema.json"));
  auto errors = oracle::schema_errors(schema, doc);
  EXPECT_TRUE(errors.empty()) << (errors.empty() ? "" : errors[0]);
  EXPECT_TRUE(fs::exists(dir + "/report/report.md"));
}

TEST_F(CommandsTest, RerunIsByteIdentical) {
  run_command("train", flags(tiny_train(envs_, dir_ + "/run")));
  run_command("rerun", flags({{"manifest", dir_ + "/run/manifest.json"}, {"out", dir_ + "/again"}}));
  for (const char* a : {"best.ckpt.json", "config.json", "final.ckpt.json", "metrics.csv"})
    EXPECT_EQ(oracle::read_file(dir_ + "/run/" + a), oracle::read_file(dir_ + "/again/" + a)) << a;

  run_command("rerun", flags({{"manifest", envs_ + "/manifest.json"}, {"out", dir_ + "/envs2"}}));
  EXPECT_EQ(oracle::read_file(envs_ + "/train/env_0003.json"), oracle::read_file(dir_ + "/envs2/train/env_0003.json"));
  EXPECT_EQ(oracle::read_file(envs_ + "/val/env_0001.json"), oracle::read_file(dir_ + "/envs2/val/env_0001.json"));

  EXPECT_THROW(run_command("rerun", flags({{"manifest", dir_ + "/run/manifest.json"}, {"out", dir_ + "/run"}})),
               pentrl::ConfigError);
  EXPECT_THROW(run_command("rerun", flags({{"manifest", dir_ + "/run/manifest.json"}})), pentrl::ConfigError);
  write(dir_ + "/notmanifest.json", R"({"hello": 1})");
  EXPECT_THROW(run_command("rerun", flags({{"manifest", dir_ + "/notmanifest.json"}, {"out", dir_ + "/z"}})),
               pentrl::ParseError);
}

}  // namespace
