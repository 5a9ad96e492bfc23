#pragma once

// Self-play: plan and act through whole episodes, keep the root visit
// distributions and realized returns, and periodically fit the network to
// them on the most recent episodes.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <deque>
#include <exception>
#include <iterator>
#include <mutex>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "siclop/env.hpp"
#include "siclop/error.hpp"
#include "siclop/model.hpp"
#include "siclop/obsgraph.hpp"
#include "siclop/rng.hpp"
#include "siclop/search.hpp"

namespace siclop {

// Per agent i and action a: summed visits of root children whose i-th
// component is a, normalized.
inline Matrix marginalize_policy(const SearchNode& root) {
  if (!root.expanded || root.children.empty()) {
    fail(Errc::kInvalidArgument, "marginalize_policy needs an expanded root");
  }
  const int n = root.state.agent_count();
  Matrix out(n, kNumActions);
  double total = 0.0;
  for (const Edge& e : root.children) {
    for (int i = 0; i < n; ++i) out(i, index_of(e.action[i])) += e.visits;
    total += e.visits;
  }
  if (total <= 0.0) fail(Errc::kInvalidArgument, "root has no child visits");
  for (double& v : out.data()) v /= total;
  return out;
}

// Per agent i: visit-weighted distribution of a_i over root children that
// agree with `executed` on every other agent.
inline Matrix conditional_visit_policy(const SearchNode& root, const JointAction& executed) {
  const int n = root.state.agent_count();
  Matrix out(n, kNumActions);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (const Edge& e : root.children) {
      bool agrees = true;
      for (int j = 0; j < n && agrees; ++j) agrees = j == i || e.action[j] == executed[j];
      if (!agrees) continue;
      out(i, index_of(e.action[i])) += e.visits;
      total += e.visits;
    }
    if (total > 0.0) {
      for (double& v : out.row(i)) v /= total;
    } else {
      out(i, index_of(executed[i])) = 1.0;
    }
  }
  return out;
}

struct StepRecord {
  GraphInput input;  // unconditioned observation of the pre-action state
  bool has_targets = false;
  Matrix policy_target;       // root visit marginals
  Matrix conditional_target;  // policy given the others' executed moves
  std::vector<std::vector<int>> intents;
  JointAction action;
  std::vector<double> rewards;
  std::vector<std::uint8_t> live;
};

struct EpisodeStats {
  int agents = 0;
  int steps = 0;
  double mean_score = 0.0;
  int collisions = 0;
  int out_of_bounds = 0;
  int proximity_pairs = 0;
  double proximity_penalty = 0.0;
  int goals = 0;
  double plan_ms = 0.0;  // wall-clock spent choosing actions

  double ms_per_action() const { return steps > 0 ? plan_ms / steps : 0.0; }
};

struct EpisodeRecord {
  std::vector<StepRecord> steps;
  std::vector<std::vector<double>> returns;  // [step][agent], suffix sums of rewards
  EpisodeStats stats;
};

using ActFn = std::function<PlanResult(const GridState&, std::uint64_t)>;

// Runs one episode with an arbitrary action chooser. Training targets are
// kept for steps whose chooser produced an expanded search tree.
inline EpisodeRecord play_episode(const GridState& initial, const ActFn& act, int radius,
                                  std::uint64_t seed, bool record_targets = true) {
  if (is_terminal(initial)) fail(Errc::kTerminalState, "episode starts in a terminal state");
  EpisodeRecord record;
  GridState state = initial;
  for (int t = 0; !is_terminal(state); ++t) {
    PlanResult plan_result = act(state, mix_seed(seed, static_cast<std::uint64_t>(t)));
    record.stats.plan_ms += plan_result.elapsed_ms;

    StepRecord sr;
    sr.action = plan_result.action;
    sr.live.resize(state.agent_count());
    for (int i = 0; i < state.agent_count(); ++i) sr.live[i] = state.agent(i).done ? 0 : 1;
    if (record_targets) {
      sr.input = preprocess(state, radius);
      const bool searched = plan_result.tree.size() > 0 && plan_result.tree.root().expanded;
      if (searched) {
        sr.has_targets = true;
        sr.policy_target = marginalize_policy(plan_result.tree.root());
        sr.conditional_target = conditional_visit_policy(plan_result.tree.root(), sr.action);
        Profile choices(sr.action.size());
        for (std::size_t i = 0; i < choices.size(); ++i) choices[i] = index_of(sr.action[i]);
        sr.intents.resize(state.agent_count());
        for (int i = 0; i < state.agent_count(); ++i) {
          sr.intents[i] = intent_cells(state, radius, i, choices);
        }
      }
    }

    StepOutcome out = step(state, sr.action);
    for (int i = 0; i < state.agent_count(); ++i) {
      const EventSet ev = out.events[i];
      record.stats.collisions += (ev & kCollision) ? 1 : 0;
      record.stats.out_of_bounds += (ev & kOutOfBounds) ? 1 : 0;
      record.stats.goals += (ev & kReachedGoal) ? 1 : 0;
      record.stats.proximity_pairs += out.proximity_pairs[i];
    }
    sr.rewards = std::move(out.rewards);
    record.steps.push_back(std::move(sr));
    state = std::move(out.next_state);
  }

  const int n = initial.agent_count();
  const int steps = static_cast<int>(record.steps.size());
  record.returns.assign(steps, std::vector<double>(n, 0.0));
  for (int t = steps - 1; t >= 0; --t) {
    for (int i = 0; i < n; ++i) {
      record.returns[t][i] = record.steps[t].rewards[i] + (t + 1 < steps ? record.returns[t + 1][i] : 0.0);
    }
  }
  double total = 0.0;
  for (const auto& a : state.agents()) total += a.cumulative_score;
  record.stats.agents = n;
  record.stats.steps = steps;
  record.stats.mean_score = n > 0 ? total / n : 0.0;
  record.stats.proximity_penalty = kProximityPenalty * record.stats.proximity_pairs;
  return record;
}

inline EpisodeRecord run_episode(const GridState& initial, const ModelParams& params, Budget budget,
                                 const SearchConfig& config, std::uint64_t seed) {
  SiclopEvaluator evaluator(params, config);
  return play_episode(
      initial,
      [&](const GridState& s, std::uint64_t sd) { return plan(s, evaluator, budget, config, sd); },
      config.radius, seed, true);
}

// Ring buffer of episodes, evicting the oldest first.
class ReplayStore {
 public:
  explicit ReplayStore(int capacity = 50) : capacity_(capacity) {
    if (capacity < 1) fail(Errc::kInvalidArgument, "replay capacity must be positive");
  }

  void add(EpisodeRecord episode) {
    if (static_cast<int>(episodes_.size()) == capacity_) {
      episodes_.pop_front();
      ids_.pop_front();
    }
    episodes_.push_back(std::move(episode));
    ids_.push_back(added_++);
  }

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(episodes_.size()); }
  bool empty() const { return episodes_.empty(); }
  std::uint64_t episodes_added() const { return added_; }

  // Position 0 is the oldest retained episode.
  const EpisodeRecord& at(int position) const { return episodes_[position]; }
  std::uint64_t id_at(int position) const { return ids_[position]; }

 private:
  int capacity_;
  std::deque<EpisodeRecord> episodes_;
  std::deque<std::uint64_t> ids_;
  std::uint64_t added_ = 0;
};

struct SampleRef {
  int position = 0;  // index into the store
  std::uint64_t episode_id = 0;
  int step = 0;
};

// Every step with targets from the `window` most recent episodes.
inline std::vector<SampleRef> window_samples(const ReplayStore& store, int window) {
  std::vector<SampleRef> refs;
  const int first = std::max(0, store.size() - std::max(window, 1));
  for (int p = first; p < store.size(); ++p) {
    const auto& ep = store.at(p);
    for (int t = 0; t < static_cast<int>(ep.steps.size()); ++t) {
      if (ep.steps[t].has_targets) refs.push_back({p, store.id_at(p), t});
    }
  }
  return refs;
}

inline std::vector<SampleRef> sample_batch(const std::vector<SampleRef>& pool, int batch_size, Rng& rng) {
  std::vector<SampleRef> batch;
  batch.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) batch.push_back(pool[rng.below(pool.size())]);
  return batch;
}

// `conditioned_agent` < 0 gives the plain sample; otherwise that agent sees
// the others' executed moves and only its policy term is trained.
inline TrainingTarget make_target(const EpisodeRecord& episode, int step, int conditioned_agent = -1) {
  const StepRecord& sr = episode.steps[step];
  TrainingTarget target;
  target.input = sr.input;
  target.target_values = episode.returns[step];
  target.target_policies = sr.policy_target;
  const int n = sr.input.agent_count();
  target.policy_weights.assign(n, 0.0);
  if (conditioned_agent < 0) {
    for (int i = 0; i < n; ++i) target.policy_weights[i] = sr.live[i] ? 1.0 : 0.0;
  } else {
    target.input.intents.assign(n, {});
    target.input.intents[conditioned_agent] = sr.intents[conditioned_agent];
    for (int a = 0; a < kNumActions; ++a) {
      target.target_policies(conditioned_agent, a) = sr.conditional_target(conditioned_agent, a);
    }
    target.policy_weights[conditioned_agent] = 1.0;
  }
  return target;
}

struct TrainConfig {
  int epochs = 4;
  int batch_size = 64;
  int recent_window = 10;
  double learning_rate = kDefaultLearningRate;
  double clip_norm = kDefaultGradientClip;
  // Share of samples presented with one agent conditioned on the others'
  // executed moves.
  double conditional_fraction = 0.5;
};

struct TrainReport {
  ModelParams params;
  std::vector<double> batch_losses;  // before each update
  std::vector<SampleRef> sampled;
};

inline TrainReport train_detailed(const ModelParams& params, const ReplayStore& store,
                                  const TrainConfig& config, std::uint64_t seed) {
  if (store.empty()) fail(Errc::kEmptyStore, "no episodes to train on");
  if (config.epochs < 0 || config.batch_size < 1) fail(Errc::kInvalidArgument, "bad train config");
  TrainReport report;
  report.params = params;
  const auto pool = window_samples(store, config.recent_window);
  if (pool.empty()) return report;
  Rng rng(seed);
  const int batches_per_epoch =
      std::max(1, static_cast<int>((pool.size() + config.batch_size - 1) / config.batch_size));
  std::vector<TrainingTarget> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int b = 0; b < batches_per_epoch; ++b) {
      batch.clear();
      for (const SampleRef& ref : sample_batch(pool, config.batch_size, rng)) {
        const EpisodeRecord& ep = store.at(ref.position);
        const StepRecord& sr = ep.steps[ref.step];
        int conditioned = -1;
        if (rng.uniform() < config.conditional_fraction) {
          std::vector<int> live;
          for (int i = 0; i < static_cast<int>(sr.live.size()); ++i) {
            if (sr.live[i]) live.push_back(i);
          }
          if (!live.empty()) conditioned = live[rng.below(live.size())];
        }
        batch.push_back(make_target(ep, ref.step, conditioned));
        report.sampled.push_back(ref);
      }
      LossResult lr = loss(report.params, batch);
      report.batch_losses.push_back(lr.total);
      report.params = apply_update(report.params, lr.gradients, config.learning_rate, config.clip_norm);
    }
  }
  return report;
}

inline ModelParams train(const ModelParams& params, const ReplayStore& store, const TrainConfig& config,
                         std::uint64_t seed) {
  return train_detailed(params, store, config, seed).params;
}

// ---------------------------------------------------------------------------
// Replay log: "SICLOPRB" | u32 version, then per episode a u64 byte length
// followed by the encoded record. Append-only.

inline constexpr char kReplayMagic[8] = {'S', 'I', 'C', 'L', 'O', 'P', 'R', 'B'};
inline constexpr std::uint32_t kReplayVersion = 1;

namespace detail {

inline void put_matrix(ByteWriter& w, const Matrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) w.f64(v);
}

inline Matrix get_matrix(ByteReader& r) {
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (static_cast<std::uint64_t>(rows) * cols * 8 > r.remaining()) {
    fail(Errc::kCorruptCheckpoint, "replay matrix larger than record");
  }
  Matrix m(static_cast<int>(rows), static_cast<int>(cols));
  for (double& v : m.data()) v = r.f64();
  return m;
}

inline void put_ints(ByteWriter& w, const std::vector<int>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (int x : v) w.i32(x);
}

inline std::vector<int> get_ints(ByteReader& r) {
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 4 > r.remaining()) fail(Errc::kCorruptCheckpoint, "replay list too long");
  std::vector<int> v(n);
  for (int& x : v) x = r.i32();
  return v;
}

inline void put_doubles(ByteWriter& w, const std::vector<double>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (double x : v) w.f64(x);
}

inline std::vector<double> get_doubles(ByteReader& r) {
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 8 > r.remaining()) fail(Errc::kCorruptCheckpoint, "replay list too long");
  std::vector<double> v(n);
  for (double& x : v) x = r.f64();
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_episode(const EpisodeRecord& ep) {
  detail::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(ep.steps.size()));
  for (const StepRecord& sr : ep.steps) {
    w.i32(sr.input.radius);
    detail::put_matrix(w, sr.input.observations);
    std::vector<int> flat_edges;
    for (auto [a, b] : sr.input.graph.edges()) {
      flat_edges.push_back(a);
      flat_edges.push_back(b);
    }
    detail::put_ints(w, flat_edges);
    w.u32(sr.has_targets ? 1 : 0);
    detail::put_matrix(w, sr.policy_target);
    detail::put_matrix(w, sr.conditional_target);
    w.u32(static_cast<std::uint32_t>(sr.intents.size()));
    for (const auto& cells : sr.intents) detail::put_ints(w, cells);
    std::vector<int> actions(sr.action.size());
    for (std::size_t i = 0; i < actions.size(); ++i) actions[i] = index_of(sr.action[i]);
    detail::put_ints(w, actions);
    detail::put_doubles(w, sr.rewards);
    detail::put_ints(w, std::vector<int>(sr.live.begin(), sr.live.end()));
  }
  for (const auto& row : ep.returns) detail::put_doubles(w, row);
  const EpisodeStats& s = ep.stats;
  w.i32(s.agents);
  w.i32(s.steps);
  w.f64(s.mean_score);
  w.i32(s.collisions);
  w.i32(s.out_of_bounds);
  w.i32(s.proximity_pairs);
  w.f64(s.proximity_penalty);
  w.i32(s.goals);
  w.f64(s.plan_ms);
  return std::move(w.bytes());
}

inline EpisodeRecord decode_episode(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, Errc::kCorruptCheckpoint);
  EpisodeRecord ep;
  const std::uint32_t steps = r.u32();
  if (steps > r.remaining()) fail(Errc::kCorruptCheckpoint, "implausible step count");
  ep.steps.resize(steps);
  for (StepRecord& sr : ep.steps) {
    sr.input.radius = r.i32();
    sr.input.observations = detail::get_matrix(r);
    const int n = sr.input.observations.rows();
    sr.input.graph = CoordinationGraph(n);
    const auto flat_edges = detail::get_ints(r);
    if (flat_edges.size() % 2 != 0) fail(Errc::kCorruptCheckpoint, "odd edge list");
    for (std::size_t e = 0; e < flat_edges.size(); e += 2) {
      if (flat_edges[e] < 0 || flat_edges[e] >= n || flat_edges[e + 1] < 0 || flat_edges[e + 1] >= n) {
        fail(Errc::kCorruptCheckpoint, "edge endpoint out of range");
      }
      sr.input.graph.add_edge(flat_edges[e], flat_edges[e + 1]);
    }
    sr.input.intents.assign(n, {});
    sr.has_targets = r.u32() != 0;
    sr.policy_target = detail::get_matrix(r);
    sr.conditional_target = detail::get_matrix(r);
    const std::uint32_t intent_rows = r.u32();
    if (intent_rows > r.remaining()) fail(Errc::kCorruptCheckpoint, "implausible intent count");
    sr.intents.resize(intent_rows);
    for (auto& cells : sr.intents) cells = detail::get_ints(r);
    for (int a : detail::get_ints(r)) {
      if (a < 0 || a >= kNumActions) fail(Errc::kCorruptCheckpoint, "action out of range");
      sr.action.push_back(action_from_index(a));
    }
    sr.rewards = detail::get_doubles(r);
    for (int v : detail::get_ints(r)) sr.live.push_back(static_cast<std::uint8_t>(v));
  }
  ep.returns.resize(steps);
  for (auto& row : ep.returns) row = detail::get_doubles(r);
  EpisodeStats& s = ep.stats;
  s.agents = r.i32();
  s.steps = r.i32();
  s.mean_score = r.f64();
  s.collisions = r.i32();
  s.out_of_bounds = r.i32();
  s.proximity_pairs = r.i32();
  s.proximity_penalty = r.f64();
  s.goals = r.i32();
  s.plan_ms = r.f64();
  if (r.remaining() != 0) fail(Errc::kCorruptCheckpoint, "trailing bytes in replay record");
  return ep;
}

class ReplayLogWriter {
 public:
  // Creates the file with a header, or appends to an existing log after
  // checking its header.
  explicit ReplayLogWriter(const std::string& path) {
    bool fresh = true;
    {
      std::ifstream probe(path, std::ios::binary);
      if (probe && probe.peek() != std::ifstream::traits_type::eof()) {
        fresh = false;
        char header[12];
        probe.read(header, sizeof(header));
        if (probe.gcount() != 12 || std::memcmp(header, kReplayMagic, 8) != 0) {
          fail(Errc::kCorruptCheckpoint, path + " is not a replay log");
        }
        std::uint32_t version = 0;
        for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(header[8 + i])) << (8 * i);
        if (version != kReplayVersion) fail(Errc::kVersionMismatch, "replay log version " + std::to_string(version));
      }
    }
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) fail(Errc::kIo, "cannot open " + path);
    if (fresh) {
      detail::ByteWriter w;
      w.raw(kReplayMagic, sizeof(kReplayMagic));
      w.u32(kReplayVersion);
      write(w.bytes());
    }
  }

  void append(const EpisodeRecord& episode) {
    const auto payload = encode_episode(episode);
    detail::ByteWriter w;
    w.u64(payload.size());
    write(w.bytes());
    write(payload);
    out_.flush();
  }

 private:
  void write(const std::vector<std::uint8_t>& bytes) {
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out_) fail(Errc::kIo, "replay log write failed");
  }

  std::ofstream out_;
};

inline std::vector<EpisodeRecord> read_replay_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(bytes, Errc::kCorruptCheckpoint);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kReplayMagic, sizeof(magic)) != 0) fail(Errc::kCorruptCheckpoint, "bad replay magic");
  if (const auto v = r.u32(); v != kReplayVersion) {
    fail(Errc::kVersionMismatch, "replay log version " + std::to_string(v));
  }
  std::vector<EpisodeRecord> episodes;
  while (r.remaining() > 0) {
    const std::uint64_t length = r.u64();
    if (length > r.remaining()) fail(Errc::kCorruptCheckpoint, "truncated replay record");
    std::vector<std::uint8_t> payload(static_cast<std::size_t>(length));
    r.raw(payload.data(), payload.size());
    episodes.push_back(decode_episode(payload));
  }
  return episodes;
}

// ---------------------------------------------------------------------------
// Outer self-play loop: blocks of `train_every` episodes are played against
// one parameter snapshot, then the network is trained on the replay store.

struct ScenarioSpec {
  int width = 8;
  int height = 8;
  int agents = 4;
  int obstacles = 4;
  int step_limit = 25;
};

struct SelfPlayConfig {
  ScenarioSpec scenario;
  Budget budget = Budget::nodes(200);
  SearchConfig search;
  TrainConfig training;
  int episodes = 200;
  int train_every = 10;
  int replay_capacity = 50;
  int jobs = 1;
  std::uint64_t seed = 1;
};

inline GridState scenario_for_episode(const ScenarioSpec& spec, std::uint64_t seed, int episode) {
  return generate_scenario(spec.width, spec.height, spec.agents, spec.obstacles, spec.step_limit,
                           mix_seed(seed, 2 * static_cast<std::uint64_t>(episode)));
}

// Runs `count` independent jobs on up to `jobs` threads; fn(index) must only
// touch slot `index` of its output.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

using EpisodeCallback = std::function<void(int episode, const EpisodeRecord&)>;

inline ModelParams self_play(ModelParams params, const SelfPlayConfig& config,
                             const EpisodeCallback& on_episode = {},
                             const std::function<void(int episode, const ModelParams&)>& on_train = {}) {
  ReplayStore store(config.replay_capacity);
  const int block = std::max(1, config.train_every);
  for (int first = 0; first < config.episodes; first += block) {
    const int count = std::min(block, config.episodes - first);
    std::vector<EpisodeRecord> records(count);
    const ModelParams& snapshot = params;
    parallel_for(count, config.jobs, [&](int k) {
      const int e = first + k;
      records[k] = run_episode(scenario_for_episode(config.scenario, config.seed, e), snapshot,
                               config.budget, config.search,
                               mix_seed(config.seed, 2 * static_cast<std::uint64_t>(e) + 1));
    });
    for (int k = 0; k < count; ++k) {
      if (on_episode) on_episode(first + k, records[k]);
      store.add(std::move(records[k]));
    }
    if (count == block) {
      params = train(params, store, config.training,
                     mix_seed(config.seed ^ 0x5eedULL, static_cast<std::uint64_t>(first)));
      if (on_train) on_train(first + count, params);
    }
  }
  return params;
}

}  // namespace siclop
