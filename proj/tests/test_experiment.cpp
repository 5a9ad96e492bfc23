#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "siclop/experiment.hpp"

using namespace siclop;
namespace fs = std::filesystem;

namespace {

const char* kSmokeConfig =
    "# tiny run\n"
    "width = 6\n"
    "height = 6\n"
    "agents = 2\n"
    "obstacles = 2\n"
    "step_limit = 8\n"
    "budget = 20\n"
    "gcn_width = 12\n"
    "policy_hidden = 12\n"
    "value_hidden = 12\n"
    "episodes = 5\n"
    "train_every = 5\n"
    "epochs = 1\n"
    "batch_size = 8\n"
    "eval_episodes = 3\n"
    "bench_calls = 5\n"
    "seed = 7\n";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("siclop_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("smoke.cfg", kSmokeConfig);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name));
    out << text;
  }

  int run(const std::string& args) const {
    const std::string cmd = std::string(SICLOP_CLI_PATH) + " " + args + " > " + path("stdout.txt") + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

std::vector<MetricsRow> without_timing(std::vector<MetricsRow> rows) {
  for (auto& r : rows) r.ms_per_action = 0.0;
  return rows;
}

bool same_rows(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (format_row(a[i]) != format_row(b[i])) return false;
  }
  return true;
}

ExperimentConfig small_config() {
  std::istringstream in(kSmokeConfig);
  return parse_config(in);
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.scenario.width, 8);
  EXPECT_EQ(c.scenario.agents, 4);
  EXPECT_EQ(c.train_every, 10);
  EXPECT_EQ(c.rollout_depth, 10);
  EXPECT_EQ(c.search_budget().kind, Budget::Kind::kNodes);
  EXPECT_EQ(c.model_shape().feature_dim(), 104);
}

TEST(Config, ParsesKeysAndComments) {
  const auto c = small_config();
  EXPECT_EQ(c.scenario.width, 6);
  EXPECT_EQ(c.scenario.step_limit, 8);
  EXPECT_EQ(c.model_shape().gcn_widths, (std::vector<int>{12, 12}));
  EXPECT_EQ(c.seed, 7u);
  std::istringstream in("planner = uniform-mcts\nbudget_kind = ms\nbudget = 100  # per action\n");
  const auto d = parse_config(in);
  EXPECT_EQ(d.planner, PlannerKind::kUniformMcts);
  EXPECT_EQ(d.search_budget().kind, Budget::Kind::kMilliseconds);
}

TEST(Config, Errors) {
  for (const char* text : {"widht = 3\n", "width = 0\n", "agents = two\n", "planner = greedy\n", "just words\n",
                           "conditional_fraction = 1.5\n", "budget_kind = sims\n"}) {
    std::istringstream in(text);
    try {
      parse_config(in);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kConfig) << text;
    }
  }
  try {
    load_config("/nonexistent/siclop.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kIo);
  }
}

TEST(Metrics, HeaderAndRoundTrip) {
  EXPECT_STREQ(kMetricsHeader, "episode,mean_score,collisions,oob,proximity,goals,ms_per_action");
  EpisodeStats s;
  s.agents = 4;
  s.steps = 10;
  s.mean_score = 0.3;
  s.collisions = 2;
  s.proximity_penalty = 0.15;
  s.goals = 3;
  s.plan_ms = 25.0;
  const auto row = MetricsRow::from(7, s);
  EXPECT_EQ(format_row(row), "7,0.29999999999999999,2,0,0.14999999999999999,3,2.500");
  const auto file = (fs::temp_directory_path() / "siclop_metrics_test.csv").string();
  {
    MetricsWriter w(file);
    w.write(row);
  }
  const auto back = read_metrics(file);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].mean_score, 0.3);
  EXPECT_EQ(back[0].goals, 3);
  fs::remove(file);
}

TEST(Baselines, RandomBoxedAgentScoresBelowZero) {
  // Obstacles on every side except the north, which is the grid edge.
  GridState boxed(5, 5, {{1, 0}, {1, 1}, {2, 1}, {3, 1}, {3, 0}}, {{{2, 0}, {4, 4}, false, 0.0}}, 20);
  ExperimentConfig c;
  c.planner = PlannerKind::kRandom;
  std::vector<GridState> set(20, boxed);
  const auto rows = run_eval(c, PlannerKind::kRandom, nullptr, set);
  EXPECT_LT(mean_score(rows), 0.0);
  int collisions = 0;
  for (const auto& r : rows) collisions += r.collisions + r.oob;
  EXPECT_GT(collisions, 20 * 10);
}

TEST(Baselines, UniformMctsSolvesTinyGrid) {
  ExperimentConfig c;
  c.scenario = {3, 3, 1, 0, 10};
  c.budget = 300;
  c.seed = 3;
  const auto scenarios = generated_scenarios(c, 100);
  const auto rows = run_eval(c, PlannerKind::kUniformMcts, nullptr, scenarios);
  int reached = 0;
  for (const auto& r : rows) reached += r.goals;
  EXPECT_GE(reached, 95);
}

TEST(Baselines, RandomWellBelowSearch) {
  ExperimentConfig c;
  c.budget = 100;
  c.seed = 4;
  const auto params = fresh_params(c);
  const auto scenarios = generated_scenarios(c, 6);
  const double searched = mean_score(run_eval(c, PlannerKind::kSiclop, &params, scenarios));
  const double random = mean_score(run_eval(c, PlannerKind::kRandom, nullptr, scenarios));
  EXPECT_GT(searched, random + 1.0);
}

TEST(Eval, EmptyScenarioSet) {
  ExperimentConfig c;
  EXPECT_THROW(run_eval(c, PlannerKind::kRandom, nullptr, {}), Error);
}

TEST(Eval, JobsDoNotChangeRows) {
  auto c = small_config();
  const auto params = fresh_params(c);
  const auto scenarios = generated_scenarios(c, 4);
  const auto a = without_timing(run_eval(c, PlannerKind::kSiclop, &params, scenarios, 1));
  const auto b = without_timing(run_eval(c, PlannerKind::kSiclop, &params, scenarios, 3));
  EXPECT_TRUE(same_rows(a, b));
}

TEST(Bench, WallClockCalls) {
  ExperimentConfig c;
  c.budget_kind = "ms";
  c.budget = 5;
  const auto params = fresh_params(c);
  const auto r = run_bench(c, PlannerKind::kSiclop, &params, 20);
  ASSERT_EQ(r.latencies_ms.size(), 20u);
  EXPECT_GT(r.fraction_within(100.0), 0.9);
  EXPECT_LE(r.percentile(0.5), r.percentile(1.0));
}

TEST_F(CliTest, TrainSmokeRun) {
  ASSERT_EQ(run("train --config " + path("smoke.cfg") + " --checkpoint " + path("m.ckpt") + " --out " +
                path("train.csv") + " --replay-log " + path("replay.log")),
            0);
  const auto rows = read_metrics(path("train.csv"));
  ASSERT_EQ(rows.size(), 5u);
  for (int e = 0; e < 5; ++e) EXPECT_EQ(rows[e].episode, e);
  const auto params = load_file(path("m.ckpt"));
  EXPECT_EQ(params.shape.gcn_widths, (std::vector<int>{12, 12}));
  EXPECT_EQ(read_replay_log(path("replay.log")).size(), 5u);
}

TEST_F(CliTest, TrainIsReproducible) {
  ASSERT_EQ(run("train --config " + path("smoke.cfg") + " --checkpoint " + path("a.ckpt") + " --out " + path("a.csv")),
            0);
  ASSERT_EQ(run("train --config " + path("smoke.cfg") + " --checkpoint " + path("b.ckpt") + " --out " + path("b.csv")),
            0);
  EXPECT_TRUE(same_rows(without_timing(read_metrics(path("a.csv"))), without_timing(read_metrics(path("b.csv")))));
  EXPECT_EQ(load_file(path("a.ckpt")), load_file(path("b.ckpt")));
}

TEST_F(CliTest, EvalLeavesCheckpointUntouched) {
  ASSERT_EQ(run("train --config " + path("smoke.cfg") + " --checkpoint " + path("m.ckpt") + " --out " + path("t.csv")),
            0);
  const auto before = fs::last_write_time(path("m.ckpt"));
  const auto bytes = save(load_file(path("m.ckpt")));
  ASSERT_EQ(run("eval --config " + path("smoke.cfg") + " --checkpoint " + path("m.ckpt") + " --out " + path("e.csv")),
            0);
  EXPECT_EQ(read_metrics(path("e.csv")).size(), 3u);
  EXPECT_EQ(fs::last_write_time(path("m.ckpt")), before);
  EXPECT_EQ(save(load_file(path("m.ckpt"))), bytes);
}

TEST_F(CliTest, EvalScenarioFile) {
  std::ostringstream set;
  write_scenario(set, GridState(6, 6, {}, {{{1, 1}, {2, 1}, false, 0.0}}, 5));
  write_scenario(set, GridState(6, 6, {{3, 3}}, {{{0, 0}, {5, 5}, false, 0.0}, {{5, 0}, {0, 5}, false, 0.0}}, 8));
  write("set.txt", set.str());
  ASSERT_EQ(run("eval --config " + path("smoke.cfg") + " --planner uniform-mcts --scenarios " + path("set.txt") +
                " --out " + path("e.csv")),
            0);
  const auto rows = read_metrics(path("e.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].goals, 1);
}

TEST_F(CliTest, EmptyScenarioFileFails) {
  write("empty.txt", "");
  EXPECT_NE(run("eval --config " + path("smoke.cfg") + " --planner random --scenarios " + path("empty.txt") +
                " --out " + path("e.csv")),
            0);
}

TEST_F(CliTest, ExitCodes) {
  write("bad.cfg", "agents = -1\n");
  EXPECT_EQ(run("train --config " + path("bad.cfg")), 2);
  EXPECT_EQ(run("train --bogus-flag"), 2);
  EXPECT_EQ(run("eval --config " + path("smoke.cfg") + " --planner dijkstra"), 2);
  EXPECT_EQ(run("eval --config " + path("missing.cfg")), 3);
  write("junk.ckpt", "not a checkpoint");
  EXPECT_EQ(run("eval --config " + path("smoke.cfg") + " --checkpoint " + path("junk.ckpt") + " --out " +
                path("e.csv")),
            3);
}

TEST_F(CliTest, BenchWritesLatencies) {
  ASSERT_EQ(run("bench --config " + path("smoke.cfg") + " --planner random --out " + path("b.csv")), 0);
  std::ifstream in(path("b.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "call,ms,simulations");
  int n = 0;
  while (std::getline(in, line)) n += !line.empty();
  EXPECT_EQ(n, 5);
}
