#pragma once

// Experiment harness behind the command-line tool: flat key=value configs,
// planner selection, per-episode CSV metrics, training, evaluation and
// latency benchmarking.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "siclop/env.hpp"
#include "siclop/error.hpp"
#include "siclop/model.hpp"
#include "siclop/rng.hpp"
#include "siclop/search.hpp"
#include "siclop/trainer.hpp"

namespace siclop {

enum class PlannerKind { kSiclop, kUniformMcts, kRandom };

inline std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::kSiclop: return "siclop";
    case PlannerKind::kUniformMcts: return "uniform-mcts";
    case PlannerKind::kRandom: return "random";
  }
  return "?";
}

inline PlannerKind parse_planner(const std::string& name) {
  if (name == "siclop") return PlannerKind::kSiclop;
  if (name == "uniform-mcts") return PlannerKind::kUniformMcts;
  if (name == "random") return PlannerKind::kRandom;
  fail(Errc::kConfig, "unknown planner '" + name + "' (siclop, uniform-mcts, random)");
}

struct ExperimentConfig {
  ScenarioSpec scenario;

  double exploration = 1.4;
  std::string budget_kind = "nodes";  // nodes | ms
  double budget = 200;
  int candidates = kDefaultCandidates;
  int sweeps = kDefaultSweeps;
  int radius = kDefaultRadius;

  int gcn_layers = 2;
  int gcn_width = 64;
  int policy_hidden = 64;
  int value_hidden = 64;
  double temperature = 1.0;
  double learning_rate = kDefaultLearningRate;
  double clip_norm = kDefaultGradientClip;

  int episodes = 200;
  int train_every = 10;
  int epochs = 4;
  int batch_size = 64;
  int recent_window = 10;
  int replay_capacity = 50;
  double conditional_fraction = 0.5;
  int checkpoint_every = 50;

  int eval_episodes = 50;
  int bench_calls = 1000;
  int rollout_depth = kDefaultRolloutDepth;
  PlannerKind planner = PlannerKind::kSiclop;
  std::uint64_t seed = 1;

  std::string out = "metrics.csv";
  std::string checkpoint = "model.ckpt";

  Budget search_budget() const {
    return budget_kind == "ms" ? Budget::milliseconds(budget) : Budget::nodes(static_cast<int>(budget));
  }

  SearchConfig search() const {
    SearchConfig s;
    s.exploration = exploration;
    s.candidates = candidates;
    s.sweeps = sweeps;
    s.radius = radius;
    return s;
  }

  ModelShape model_shape() const {
    ModelShape shape;
    shape.radius = radius;
    shape.gcn_widths.assign(gcn_layers, gcn_width);
    shape.policy_hidden = policy_hidden;
    shape.value_hidden = value_hidden;
    return shape;
  }

  TrainConfig training() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.recent_window = recent_window;
    t.learning_rate = learning_rate;
    t.clip_norm = clip_norm;
    t.conditional_fraction = conditional_fraction;
    return t;
  }

  SelfPlayConfig self_play() const {
    SelfPlayConfig s;
    s.scenario = scenario;
    s.budget = search_budget();
    s.search = search();
    s.training = training();
    s.episodes = episodes;
    s.train_every = train_every;
    s.replay_capacity = replay_capacity;
    s.seed = seed;
    return s;
  }

  void validate() const {
    auto positive = [](const char* key, double v) {
      if (!(v > 0)) fail(Errc::kConfig, std::string(key) + " must be positive");
    };
    positive("width", scenario.width);
    positive("height", scenario.height);
    positive("agents", scenario.agents);
    positive("step_limit", scenario.step_limit);
    if (scenario.obstacles < 0) fail(Errc::kConfig, "obstacles must be non-negative");
    if (exploration < 0) fail(Errc::kConfig, "exploration must be non-negative");
    if (budget_kind != "nodes" && budget_kind != "ms") fail(Errc::kConfig, "budget_kind must be nodes or ms");
    positive("budget", budget);
    positive("candidates", candidates);
    positive("sweeps", sweeps);
    positive("radius", radius);
    positive("gcn_layers", gcn_layers);
    positive("gcn_width", gcn_width);
    positive("policy_hidden", policy_hidden);
    positive("value_hidden", value_hidden);
    positive("temperature", temperature);
    positive("learning_rate", learning_rate);
    positive("clip_norm", clip_norm);
    positive("episodes", episodes);
    positive("train_every", train_every);
    positive("epochs", epochs);
    positive("batch_size", batch_size);
    positive("recent_window", recent_window);
    positive("replay_capacity", replay_capacity);
    positive("checkpoint_every", checkpoint_every);
    positive("eval_episodes", eval_episodes);
    positive("bench_calls", bench_calls);
    positive("rollout_depth", rollout_depth);
    if (conditional_fraction < 0 || conditional_fraction > 1) {
      fail(Errc::kConfig, "conditional_fraction must lie in [0, 1]");
    }
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(Errc::kConfig, "bad value for " + key + ": '" + text + "'");
  return value;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Applies one key=value pair. Unknown keys are errors.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  std::map<std::string, std::function<void()>> setters = {
      {"width", [&] { c.scenario.width = parse_number<int>(key, value); }},
      {"height", [&] { c.scenario.height = parse_number<int>(key, value); }},
      {"agents", [&] { c.scenario.agents = parse_number<int>(key, value); }},
      {"obstacles", [&] { c.scenario.obstacles = parse_number<int>(key, value); }},
      {"step_limit", [&] { c.scenario.step_limit = parse_number<int>(key, value); }},
      {"exploration", [&] { c.exploration = parse_number<double>(key, value); }},
      {"budget_kind", [&] { c.budget_kind = value; }},
      {"budget", [&] { c.budget = parse_number<double>(key, value); }},
      {"candidates", [&] { c.candidates = parse_number<int>(key, value); }},
      {"sweeps", [&] { c.sweeps = parse_number<int>(key, value); }},
      {"radius", [&] { c.radius = parse_number<int>(key, value); }},
      {"gcn_layers", [&] { c.gcn_layers = parse_number<int>(key, value); }},
      {"gcn_width", [&] { c.gcn_width = parse_number<int>(key, value); }},
      {"policy_hidden", [&] { c.policy_hidden = parse_number<int>(key, value); }},
      {"value_hidden", [&] { c.value_hidden = parse_number<int>(key, value); }},
      {"temperature", [&] { c.temperature = parse_number<double>(key, value); }},
      {"learning_rate", [&] { c.learning_rate = parse_number<double>(key, value); }},
      {"clip_norm", [&] { c.clip_norm = parse_number<double>(key, value); }},
      {"episodes", [&] { c.episodes = parse_number<int>(key, value); }},
      {"train_every", [&] { c.train_every = parse_number<int>(key, value); }},
      {"epochs", [&] { c.epochs = parse_number<int>(key, value); }},
      {"batch_size", [&] { c.batch_size = parse_number<int>(key, value); }},
      {"recent_window", [&] { c.recent_window = parse_number<int>(key, value); }},
      {"replay_capacity", [&] { c.replay_capacity = parse_number<int>(key, value); }},
      {"conditional_fraction", [&] { c.conditional_fraction = parse_number<double>(key, value); }},
      {"checkpoint_every", [&] { c.checkpoint_every = parse_number<int>(key, value); }},
      {"eval_episodes", [&] { c.eval_episodes = parse_number<int>(key, value); }},
      {"bench_calls", [&] { c.bench_calls = parse_number<int>(key, value); }},
      {"rollout_depth", [&] { c.rollout_depth = parse_number<int>(key, value); }},
      {"planner", [&] { c.planner = parse_planner(value); }},
      {"seed", [&] { c.seed = parse_number<std::uint64_t>(key, value); }},
      {"out", [&] { c.out = value; }},
      {"checkpoint", [&] { c.checkpoint = value; }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) fail(Errc::kConfig, "unknown config key '" + key + "'");
  it->second();
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(Errc::kConfig, "line " + std::to_string(line_no) + ": expected key=value");
    set_config_value(config, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIo, "cannot open config " + path);
  return parse_config(in);
}

// ---------------------------------------------------------------------------

struct MetricsRow {
  int episode = 0;
  double mean_score = 0.0;
  int collisions = 0;
  int oob = 0;
  double proximity = 0.0;  // total proximity penalty magnitude
  int goals = 0;
  double ms_per_action = 0.0;

  static MetricsRow from(int episode, const EpisodeStats& s) {
    return {episode, s.mean_score, s.collisions, s.out_of_bounds, s.proximity_penalty, s.goals, s.ms_per_action()};
  }
};

inline constexpr const char* kMetricsHeader = "episode,mean_score,collisions,oob,proximity,goals,ms_per_action";

inline std::string format_row(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%d,%.17g,%d,%.3f", r.episode, r.mean_score, r.collisions, r.oob,
                r.proximity, r.goals, r.ms_per_action);
  return buf;
}

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : out_(path) {
    if (!out_) fail(Errc::kIo, "cannot write " + path);
    out_ << kMetricsHeader << '\n';
  }

  void write(const MetricsRow& row) {
    out_ << format_row(row) << '\n';
    out_.flush();
    if (!out_) fail(Errc::kIo, "metrics write failed");
  }

 private:
  std::ofstream out_;
};

inline std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIo, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) fail(Errc::kConfig, path + ": unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    char comma;
    std::istringstream ss(line);
    ss >> r.episode >> comma >> r.mean_score >> comma >> r.collisions >> comma >> r.oob >> comma >> r.proximity >>
        comma >> r.goals >> comma >> r.ms_per_action;
    if (!ss) fail(Errc::kConfig, path + ": malformed row '" + line + "'");
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------

// Owns whatever a planner needs and exposes it as an ActFn.
class Planner {
 public:
  Planner(PlannerKind kind, const ModelParams* params, SearchConfig search, Budget budget, int rollout_depth)
      : kind_(kind), search_(search), budget_(budget) {
    if (kind == PlannerKind::kSiclop) {
      if (params == nullptr) fail(Errc::kInvalidArgument, "siclop planner needs parameters");
      evaluator_ = std::make_unique<SiclopEvaluator>(*params, search);
    } else if (kind == PlannerKind::kUniformMcts) {
      evaluator_ = std::make_unique<UniformEvaluator>(search, rollout_depth);
    }
  }

  PlannerKind kind() const { return kind_; }

  PlanResult act(const GridState& state, std::uint64_t seed) const {
    if (kind_ == PlannerKind::kRandom) {
      const auto start = std::chrono::steady_clock::now();
      Rng rng(seed);
      PlanResult r;
      r.action = random_joint_action(state, rng);
      r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      return r;
    }
    return plan(state, *evaluator_, budget_, search_, seed);
  }

  ActFn as_function() const {
    return [this](const GridState& s, std::uint64_t seed) { return act(s, seed); };
  }

 private:
  PlannerKind kind_;
  SearchConfig search_;
  Budget budget_;
  std::unique_ptr<Evaluator> evaluator_;
};

inline ModelParams fresh_params(const ExperimentConfig& c) {
  return init_params(c.model_shape(), mix_seed(c.seed, 0x1417ULL), c.temperature);
}

struct TrainRunOptions {
  int jobs = 1;
  std::string metrics_path;
  std::string checkpoint_path;  // final checkpoint; periodic ones get ".ep<N>"
  std::string replay_log;       // empty: no log
};

// Self-play training with per-episode metrics rows and periodic checkpoints.
inline ModelParams run_training(const ExperimentConfig& config, const TrainRunOptions& options,
                                std::vector<MetricsRow>* rows_out = nullptr) {
  config.validate();
  std::optional<MetricsWriter> metrics;
  if (!options.metrics_path.empty()) metrics.emplace(options.metrics_path);
  std::optional<ReplayLogWriter> replay;
  if (!options.replay_log.empty()) replay.emplace(options.replay_log);

  SelfPlayConfig sp = config.self_play();
  sp.jobs = options.jobs;
  ModelParams params = self_play(
      fresh_params(config), sp,
      [&](int episode, const EpisodeRecord& record) {
        const MetricsRow row = MetricsRow::from(episode, record.stats);
        if (metrics) metrics->write(row);
        if (rows_out) rows_out->push_back(row);
        if (replay) replay->append(record);
      },
      [&](int episodes_done, const ModelParams& p) {
        if (!options.checkpoint_path.empty() && episodes_done % config.checkpoint_every == 0) {
          save_file(p, options.checkpoint_path + ".ep" + std::to_string(episodes_done));
        }
      });
  if (!options.checkpoint_path.empty()) save_file(params, options.checkpoint_path);
  return params;
}

// Episode i of an evaluation set generated from the config.
inline std::vector<GridState> generated_scenarios(const ExperimentConfig& config, int count) {
  std::vector<GridState> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(scenario_for_episode(config.scenario, config.seed, i));
  return out;
}

// Planning-only episodes, one row per scenario in order.
inline std::vector<MetricsRow> run_eval(const ExperimentConfig& config, PlannerKind kind, const ModelParams* params,
                                        const std::vector<GridState>& scenarios, int jobs = 1) {
  if (scenarios.empty()) fail(Errc::kConfig, "evaluation needs at least one scenario");
  SearchConfig search = config.search();
  if (params != nullptr) search.radius = params->shape.radius;
  Planner planner(kind, params, search, config.search_budget(), config.rollout_depth);
  std::vector<MetricsRow> rows(scenarios.size());
  parallel_for(static_cast<int>(scenarios.size()), jobs, [&](int i) {
    EpisodeRecord rec = play_episode(scenarios[i], planner.as_function(), search.radius,
                                     mix_seed(config.seed, 2 * static_cast<std::uint64_t>(i) + 1), false);
    rows[i] = MetricsRow::from(i, rec.stats);
  });
  return rows;
}

inline double mean_score(const std::vector<MetricsRow>& rows) {
  double total = 0.0;
  for (const auto& r : rows) total += r.mean_score;
  return rows.empty() ? 0.0 : total / rows.size();
}

struct BenchResult {
  std::vector<double> latencies_ms;
  std::vector<int> simulations;
  int fallbacks = 0;

  double fraction_within(double ms) const {
    if (latencies_ms.empty()) return 0.0;
    const auto n = std::count_if(latencies_ms.begin(), latencies_ms.end(), [&](double x) { return x <= ms; });
    return static_cast<double>(n) / latencies_ms.size();
  }

  double percentile(double q) const {
    if (latencies_ms.empty()) return 0.0;
    std::vector<double> s = latencies_ms;
    std::sort(s.begin(), s.end());
    const auto idx = static_cast<std::size_t>(std::min<double>(s.size() - 1, q * (s.size() - 1) + 0.5));
    return s[idx];
  }
};

// Times `calls` plan calls, each from the state reached by playing the
// scenario forward; a new scenario starts whenever one terminates.
inline BenchResult run_bench(const ExperimentConfig& config, PlannerKind kind, const ModelParams* params,
                             int calls) {
  SearchConfig search = config.search();
  if (params != nullptr) search.radius = params->shape.radius;
  Planner planner(kind, params, search, config.search_budget(), config.rollout_depth);
  BenchResult result;
  int scenario = 0;
  GridState state = scenario_for_episode(config.scenario, config.seed, scenario);
  for (int call = 0; call < calls; ++call) {
    const auto start = std::chrono::steady_clock::now();
    PlanResult r = planner.act(state, mix_seed(config.seed ^ 0xbe7cULL, static_cast<std::uint64_t>(call)));
    result.latencies_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    result.simulations.push_back(r.simulations);
    result.fallbacks += r.used_fallback ? 1 : 0;
    state = step(state, r.action).next_state;
    if (is_terminal(state)) state = scenario_for_episode(config.scenario, config.seed, ++scenario);
  }
  return result;
}

}  // namespace siclop
