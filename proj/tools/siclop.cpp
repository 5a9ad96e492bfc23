// siclop: train, evaluate and benchmark the planner from the command line.
//
//   siclop train --config exp.cfg --checkpoint model.ckpt --out train.csv
//   siclop eval  --config exp.cfg --checkpoint model.ckpt --scenarios set.txt --out eval.csv
//   siclop bench --config exp.cfg --checkpoint model.ckpt --out latency.csv
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 IO error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "siclop/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Options {
  std::string config_path;
  std::string checkpoint;
  std::string scenarios;
  std::string out;
  std::string planner;
  std::string replay_log;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

siclop::ExperimentConfig resolve_config(const Options& o) {
  siclop::ExperimentConfig c;
  if (!o.config_path.empty()) c = siclop::load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (!o.planner.empty()) c.planner = siclop::parse_planner(o.planner);
  if (!o.out.empty()) c.out = o.out;
  if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
  c.validate();
  return c;
}

std::optional<siclop::ModelParams> planner_params(const siclop::ExperimentConfig& c, const Options& o) {
  if (c.planner != siclop::PlannerKind::kSiclop) return std::nullopt;
  if (!o.checkpoint.empty()) return siclop::load_file(o.checkpoint);
  std::cerr << "note: no --checkpoint given, using freshly initialized parameters\n";
  return siclop::fresh_params(c);
}

int cmd_train(const Options& o) {
  const auto c = resolve_config(o);
  siclop::TrainRunOptions run;
  run.jobs = o.jobs;
  run.metrics_path = c.out;
  run.checkpoint_path = c.checkpoint;
  run.replay_log = o.replay_log;
  std::vector<siclop::MetricsRow> rows;
  siclop::run_training(c, run, &rows);
  std::printf("trained %d episodes, mean score %.4f, checkpoint %s\n", c.episodes, siclop::mean_score(rows),
              c.checkpoint.c_str());
  return 0;
}

int cmd_eval(const Options& o) {
  const auto c = resolve_config(o);
  std::vector<siclop::GridState> scenarios;
  if (!o.scenarios.empty()) {
    std::ifstream in(o.scenarios);
    if (!in) siclop::fail(siclop::Errc::kIo, "cannot open " + o.scenarios);
    scenarios = siclop::read_scenarios(in);
  } else {
    scenarios = siclop::generated_scenarios(c, c.eval_episodes);
  }
  const auto params = planner_params(c, o);
  const auto rows = siclop::run_eval(c, c.planner, params ? &*params : nullptr, scenarios, o.jobs);
  siclop::MetricsWriter writer(c.out);
  for (const auto& r : rows) writer.write(r);
  std::printf("%s: %zu episodes, mean score %.4f\n", siclop::to_string(c.planner).c_str(), rows.size(),
              siclop::mean_score(rows));
  return 0;
}

int cmd_bench(const Options& o) {
  const auto c = resolve_config(o);
  const auto params = planner_params(c, o);
  const auto result = siclop::run_bench(c, c.planner, params ? &*params : nullptr, c.bench_calls);
  std::ofstream out(c.out);
  if (!out) siclop::fail(siclop::Errc::kIo, "cannot write " + c.out);
  out << "call,ms,simulations\n";
  for (std::size_t i = 0; i < result.latencies_ms.size(); ++i) {
    out << i << ',' << result.latencies_ms[i] << ',' << result.simulations[i] << '\n';
  }
  const double limit = c.budget_kind == "ms" ? 1.5 * c.budget : 0.0;
  std::printf("calls %zu  p50 %.2f ms  p99 %.2f ms  max %.2f ms  fallbacks %d", result.latencies_ms.size(),
              result.percentile(0.5), result.percentile(0.99), result.percentile(1.0), result.fallbacks);
  if (limit > 0) std::printf("  within %.0f ms: %.2f%%", limit, 100.0 * result.fraction_within(limit));
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent MCTS planner with a graph policy/value network"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "key=value experiment config");
    cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint path");
    cmd->add_option("--seed", o.seed, "override the config seed");
    cmd->add_option("--jobs", o.jobs, "episodes run in parallel")->check(CLI::PositiveNumber);
    cmd->add_option("--planner", o.planner, "siclop | uniform-mcts | random");
    cmd->add_option("--out", o.out, "CSV output path");
  };

  auto* train = app.add_subcommand("train", "self-play training");
  add_common(train);
  train->add_option("--replay-log", o.replay_log, "append every episode to this replay log");
  auto* eval = app.add_subcommand("eval", "planning-only evaluation");
  add_common(eval);
  eval->add_option("--scenarios", o.scenarios, "scenario file (default: generated from the config)");
  auto* bench = app.add_subcommand("bench", "plan-call latency benchmark");
  add_common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    return cmd_bench(o);
  } catch (const siclop::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case siclop::Errc::kConfig:
      case siclop::Errc::kInvalidArgument:
      case siclop::Errc::kInvalidDimensions:
      case siclop::Errc::kCapacityExceeded:
        return kExitConfig;
      case siclop::Errc::kIo:
      case siclop::Errc::kCorruptCheckpoint:
      case siclop::Errc::kVersionMismatch:
      case siclop::Errc::kShapeMismatch:
        return kExitIo;
      default:
        return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
