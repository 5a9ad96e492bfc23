#pragma once

// Anytime Monte Carlo tree search over joint actions. Expansion asks an
// Evaluator for a small candidate set instead of enumerating 9^n joint
// actions; each new child is scored by its immediate reward plus a bootstrap
// value and backed up at once.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "siclop/env.hpp"
#include "siclop/error.hpp"
#include "siclop/model.hpp"
#include "siclop/obsgraph.hpp"
#include "siclop/pruner.hpp"
#include "siclop/rng.hpp"

namespace siclop {

struct Budget {
  enum class Kind { kNodes, kMilliseconds };

  Kind kind = Kind::kNodes;
  double amount = 200;

  static Budget nodes(int count) { return {Kind::kNodes, static_cast<double>(count)}; }
  static Budget milliseconds(double ms) { return {Kind::kMilliseconds, ms}; }

  void validate() const {
    if (!(amount > 0.0)) fail(Errc::kInvalidArgument, "search budget must be positive");
  }
};

struct SearchConfig {
  double exploration = 1.4;
  int candidates = kDefaultCandidates;
  int sweeps = kDefaultSweeps;
  int max_draws = -1;  // -1: 4 * candidates
  int radius = kDefaultRadius;
};

struct Edge {
  JointAction action;
  double prior = 0.0;
  int visits = 0;
  double total_value = 0.0;
  double reward = 0.0;  // mean per-agent reward of the transition
  double min_backup = std::numeric_limits<double>::infinity();
  double max_backup = -std::numeric_limits<double>::infinity();
  int child = -1;

  double mean_value() const { return total_value / std::max(visits, 1); }
};

struct SearchNode {
  GridState state;
  int visits = 0;
  std::vector<Edge> children;
  bool expanded = false;
  bool terminal = false;
};

class SearchTree {
 public:
  SearchTree() = default;
  explicit SearchTree(GridState root_state) { add_node(std::move(root_state)); }

  int add_node(GridState state) {
    SearchNode node;
    node.terminal = is_terminal(state);
    node.state = std::move(state);
    node.visits = 1;
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  SearchNode& node(int id) { return nodes_[id]; }
  const SearchNode& node(int id) const { return nodes_[id]; }
  const SearchNode& root() const { return nodes_.front(); }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  std::vector<SearchNode> nodes_;
};

struct PathStep {
  int node = 0;
  int edge = 0;
};

// `value` is the return credited to the last edge of the path. Walking
// upward, each earlier edge is credited its own transition reward plus the
// return below it. Every node on the path gains one visit.
inline void backpropagate(SearchTree& tree, std::span<const PathStep> path, double value) {
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    SearchNode& node = tree.node(it->node);
    Edge& edge = node.children[it->edge];
    edge.visits += 1;
    edge.total_value += value;
    edge.min_backup = std::min(edge.min_backup, value);
    edge.max_backup = std::max(edge.max_backup, value);
    node.visits += 1;
    if (it + 1 != path.rend()) {
      const PathStep& parent = *(it + 1);
      value = tree.node(parent.node).children[parent.edge].reward + value;
    }
  }
}

// Q + c * prior * sqrt(ln N / n); unvisited edges rank first.
inline double score(const Edge& edge, int parent_visits, double exploration, double prior) {
  if (edge.visits == 0) return std::numeric_limits<double>::infinity();
  return edge.mean_value() +
         exploration * prior * std::sqrt(std::log(static_cast<double>(parent_visits)) / edge.visits);
}

// Index of the edge to descend: highest score, then higher prior, then
// earlier position.
inline int select_edge(const SearchNode& node, double exploration) {
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int e = 0; e < static_cast<int>(node.children.size()); ++e) {
    const Edge& edge = node.children[e];
    const double s = score(edge, node.visits, exploration, edge.prior);
    if (s > best_score || (s == best_score && edge.prior > node.children[best].prior)) {
      best = e;
      best_score = s;
    }
  }
  return best;
}

// Most visited root edge, ties broken by prior then position.
inline int most_visited_edge(const SearchNode& node) {
  int best = 0;
  for (int e = 1; e < static_cast<int>(node.children.size()); ++e) {
    const Edge& a = node.children[e];
    const Edge& b = node.children[best];
    if (a.visits > b.visits || (a.visits == b.visits && a.prior > b.prior)) best = e;
  }
  return best;
}

struct Proposal {
  std::vector<JointAction> actions;  // distinct
  std::vector<double> priors;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  // Candidate joint actions for expanding a non-terminal state.
  virtual Proposal propose(const GridState& state, std::uint64_t seed) const = 0;
  // Mean per-agent return expected from a non-terminal state onward.
  virtual double leaf_value(const GridState& state, std::uint64_t seed) const = 0;
  // Action used when the budget ran out before the first expansion.
  virtual JointAction fallback(const GridState& state, std::uint64_t seed) const = 0;
};

inline JointAction to_joint_action(const Profile& profile) {
  JointAction a(profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) a[i] = action_from_index(profile[i]);
  return a;
}

inline Proposal proposal_from(const CandidateSet& candidates, bool uniform_priors) {
  Proposal p;
  const double total = static_cast<double>(candidates.joint_actions.size());
  for (const auto& [profile, count] : candidates.distinct()) {
    p.actions.push_back(to_joint_action(profile));
    p.priors.push_back(uniform_priors ? 1.0 : count / total);
  }
  return p;
}

using Policy = std::array<double, kNumActions>;

inline const Policy& stay_policy() {
  static const Policy kStay = [] {
    Policy p{};
    p[index_of(Action::kStay)] = 1.0;
    return p;
  }();
  return kStay;
}

// Network-backed oracle: conditioning on other agents' choices marks the
// cells they intend to enter inside the queried agent's window.
class ModelOracle {
 public:
  ModelOracle(const GridState& state, const PolicySession& session, int radius)
      : state_(&state), session_(&session), radius_(radius) {}

  int agent_count() const { return state_->agent_count(); }

  Policy initial_policy(int agent) const {
    if (state_->agent(agent).done) return stay_policy();
    return session_->policy(agent);
  }

  const Policy& conditional_policy(int agent, const Profile& joint) const {
    if (state_->agent(agent).done) return stay_policy();
    return session_->conditional_policy(agent, intent_cells(*state_, radius_, agent, joint));
  }

 private:
  const GridState* state_;
  const PolicySession* session_;
  int radius_;
};

// Live agents choose uniformly; done agents stay.
class UniformOracle {
 public:
  explicit UniformOracle(const GridState& state) : state_(&state) {
    uniform_.fill(1.0 / kNumActions);
  }

  int agent_count() const { return state_->agent_count(); }
  const Policy& initial_policy(int agent) const {
    return state_->agent(agent).done ? stay_policy() : uniform_;
  }
  const Policy& conditional_policy(int agent, const Profile&) const { return initial_policy(agent); }

 private:
  const GridState* state_;
  Policy uniform_;
};

inline double mean_reward(const std::vector<double>& rewards) {
  if (rewards.empty()) return 0.0;
  double s = 0.0;
  for (double r : rewards) s += r;
  return s / static_cast<double>(rewards.size());
}

class SiclopEvaluator final : public Evaluator {
 public:
  SiclopEvaluator(const ModelParams& params, SearchConfig config) : params_(&params), config_(config) {}

  Proposal propose(const GridState& state, std::uint64_t seed) const override {
    const GraphInput input = preprocess(state, config_.radius);
    PolicySession session(*params_, input);
    ModelOracle oracle(state, session, config_.radius);
    return proposal_from(
        sample_candidates(oracle, config_.candidates, config_.sweeps, seed, config_.max_draws), false);
  }

  double leaf_value(const GridState& state, std::uint64_t) const override {
    const auto values = predict_values(*params_, preprocess(state, config_.radius));
    double s = 0.0;
    for (int i = 0; i < state.agent_count(); ++i) {
      if (!state.agent(i).done) s += values[i];
    }
    return state.agent_count() > 0 ? s / state.agent_count() : 0.0;
  }

  // Per-agent argmax of the raw network policy.
  JointAction fallback(const GridState& state, std::uint64_t) const override {
    const PolicyValue pv = predict(*params_, preprocess(state, config_.radius));
    JointAction a(state.agent_count(), Action::kStay);
    for (int i = 0; i < state.agent_count(); ++i) {
      if (state.agent(i).done) continue;
      const auto row = pv.policies.row(i);
      a[i] = action_from_index(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
    return a;
  }

 private:
  const ModelParams* params_;
  SearchConfig config_;
};

inline constexpr int kDefaultRolloutDepth = 10;

inline JointAction random_joint_action(const GridState& state, Rng& rng) {
  JointAction a(state.agent_count(), Action::kStay);
  for (int i = 0; i < state.agent_count(); ++i) {
    if (!state.agent(i).done) a[i] = action_from_index(static_cast<int>(rng.below(kNumActions)));
  }
  return a;
}

// Baseline: uniform candidates with equal priors, leaves valued by a random
// rollout of bounded depth.
class UniformEvaluator final : public Evaluator {
 public:
  UniformEvaluator(SearchConfig config, int rollout_depth = kDefaultRolloutDepth)
      : config_(config), rollout_depth_(rollout_depth) {}

  Proposal propose(const GridState& state, std::uint64_t seed) const override {
    UniformOracle oracle(state);
    return proposal_from(
        sample_candidates(oracle, config_.candidates, config_.sweeps, seed, config_.max_draws), true);
  }

  double leaf_value(const GridState& state, std::uint64_t seed) const override {
    Rng rng(seed);
    GridState s = state;
    double total = 0.0;
    for (int d = 0; d < rollout_depth_ && !is_terminal(s); ++d) {
      StepOutcome out = step(s, random_joint_action(s, rng));
      total += mean_reward(out.rewards);
      s = std::move(out.next_state);
    }
    return total;
  }

  JointAction fallback(const GridState& state, std::uint64_t seed) const override {
    Rng rng(seed);
    return random_joint_action(state, rng);
  }

 private:
  SearchConfig config_;
  int rollout_depth_;
};

struct PlanResult {
  JointAction action;
  SearchTree tree;
  int simulations = 0;
  bool used_fallback = false;
  double elapsed_ms = 0.0;
};

using SimulationObserver = std::function<void(const SearchTree&)>;

inline PlanResult plan(const GridState& root_state, const Evaluator& evaluator, Budget budget,
                       const SearchConfig& config, std::uint64_t seed,
                       const SimulationObserver& observer = {}) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };
  budget.validate();
  if (is_terminal(root_state)) fail(Errc::kTerminalRoot, "plan called on a terminal state");

  PlanResult result;
  result.tree = SearchTree(root_state);
  SearchTree& tree = result.tree;
  std::vector<PathStep> path;

  while (true) {
    if (budget.kind == Budget::Kind::kNodes) {
      if (result.simulations >= budget.amount) break;
    } else if (elapsed_ms() >= budget.amount) {
      break;
    }
    const std::uint64_t sim_seed = mix_seed(seed, static_cast<std::uint64_t>(result.simulations));

    path.clear();
    int current = 0;
    while (tree.node(current).expanded && !tree.node(current).terminal) {
      const int e = select_edge(tree.node(current), config.exploration);
      path.push_back({current, e});
      current = tree.node(current).children[e].child;
    }

    if (tree.node(current).terminal) {
      // Revisiting a terminal leaf: nothing beyond the last transition.
      const PathStep last = path.back();
      backpropagate(tree, path, tree.node(last.node).children[last.edge].reward);
    } else {
      const GridState state = tree.node(current).state;
      const Proposal proposal = evaluator.propose(state, sim_seed);
      tree.node(current).expanded = true;
      for (std::size_t c = 0; c < proposal.actions.size(); ++c) {
        StepOutcome out = step(state, proposal.actions[c]);
        Edge edge;
        edge.action = proposal.actions[c];
        edge.prior = proposal.priors[c];
        edge.reward = mean_reward(out.rewards);
        const bool child_terminal = is_terminal(out.next_state);
        const double value =
            edge.reward + (child_terminal ? 0.0 : evaluator.leaf_value(out.next_state, mix_seed(sim_seed, c)));
        edge.child = tree.add_node(std::move(out.next_state));
        tree.node(current).children.push_back(std::move(edge));
        path.push_back({current, static_cast<int>(tree.node(current).children.size()) - 1});
        backpropagate(tree, path, value);
        path.pop_back();
      }
    }
    ++result.simulations;
    if (observer) observer(tree);
    if (tree.root().expanded && tree.root().children.size() == 1) break;
  }

  if (!tree.root().expanded) {
    result.used_fallback = true;
    result.action = evaluator.fallback(root_state, seed);
  } else {
    result.action = tree.root().children[most_visited_edge(tree.root())].action;
  }
  result.elapsed_ms = elapsed_ms();
  return result;
}

inline PlanResult plan(const GridState& root_state, const ModelParams& params, Budget budget,
                       const SearchConfig& config, std::uint64_t seed) {
  SiclopEvaluator evaluator(params, config);
  return plan(root_state, evaluator, budget, config, seed);
}

}  // namespace siclop
