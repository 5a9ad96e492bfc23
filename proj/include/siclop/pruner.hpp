#pragma once

// Joint-action pruning by repeated conditional resampling. Starting from a
// joint action drawn from the unconditioned policies, agents are swept in
// order and each one redraws its action from its policy given the current
// choices of everyone else. The joint action after each block of sweeps is
// recorded as a candidate.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "siclop/error.hpp"
#include "siclop/rng.hpp"

namespace siclop {

// One action index per agent.
using Profile = std::vector<int>;

template <class O>
concept PolicyOracle = requires(const O& oracle, int agent, const Profile& joint) {
  { oracle.agent_count() } -> std::convertible_to<int>;
  { std::span<const double>(oracle.initial_policy(agent)) };
  { std::span<const double>(oracle.conditional_policy(agent, joint)) };
};

struct CandidateSet {
  std::vector<Profile> joint_actions;  // append order, duplicates kept
  int distinct_count = 0;

  // Distinct entries in first-appearance order with their append counts.
  std::vector<std::pair<Profile, int>> distinct() const {
    std::vector<std::pair<Profile, int>> out;
    std::map<Profile, std::size_t> slot;
    for (const auto& a : joint_actions) {
      auto [it, inserted] = slot.emplace(a, out.size());
      if (inserted) {
        out.emplace_back(a, 1);
      } else {
        ++out[it->second].second;
      }
    }
    return out;
  }
};

inline constexpr int kDefaultCandidates = 8;
inline constexpr int kDefaultSweeps = 2;
inline constexpr int kDrawCapFactor = 4;

// Stops after `k` distinct joint actions or `max_draws` appends (4k when not
// given), whichever comes first.
template <PolicyOracle O>
CandidateSet sample_candidates(const O& oracle, int k, int sweeps, std::uint64_t seed,
                               int max_draws = -1) {
  if (k < 1 || sweeps < 1) fail(Errc::kInvalidArgument, "k and sweeps must be at least 1");
  if (max_draws < 0) max_draws = kDrawCapFactor * k;
  if (max_draws < 1) fail(Errc::kInvalidArgument, "max_draws must be at least 1");

  Rng rng(seed);
  const int n = oracle.agent_count();
  Profile joint(n);
  for (int i = 0; i < n; ++i) {
    const auto& policy = oracle.initial_policy(i);
    joint[i] = rng.categorical(std::span<const double>(policy));
  }

  CandidateSet out;
  std::map<Profile, int> seen;
  while (out.distinct_count < k && static_cast<int>(out.joint_actions.size()) < max_draws) {
    for (int s = 0; s < sweeps; ++s) {
      for (int i = 0; i < n; ++i) {
        const auto& policy = oracle.conditional_policy(i, joint);
        joint[i] = rng.categorical(std::span<const double>(policy));
      }
    }
    if (seen.emplace(joint, 0).second) ++out.distinct_count;
    out.joint_actions.push_back(joint);
  }
  return out;
}

// Deterministic best-response oracle for a normal-form game. `payoff` maps a
// profile to one payoff per agent. Ties keep the agent's current action, and
// otherwise go to the lowest index.
template <class Payoff>
class ExactBestResponse {
 public:
  ExactBestResponse(Payoff payoff, std::vector<int> action_counts)
      : payoff_(std::move(payoff)), action_counts_(std::move(action_counts)) {}

  int agent_count() const { return static_cast<int>(action_counts_.size()); }
  int action_count(int agent) const { return action_counts_[agent]; }

  std::vector<double> payoffs(const Profile& joint) const { return payoff_(joint); }

  std::vector<double> initial_policy(int agent) const {
    return std::vector<double>(action_counts_[agent], 1.0 / action_counts_[agent]);
  }

  int best_action(int agent, const Profile& joint) const {
    Profile probe = joint;
    int best = joint[agent];
    double best_value = payoff_(probe)[agent];
    for (int a = 0; a < action_counts_[agent]; ++a) {
      probe[agent] = a;
      const double v = payoff_(probe)[agent];
      if (v > best_value) {
        best_value = v;
        best = a;
      }
    }
    return best;
  }

  std::vector<double> conditional_policy(int agent, const Profile& joint) const {
    std::vector<double> p(action_counts_[agent], 0.0);
    p[best_action(agent, joint)] = 1.0;
    return p;
  }

 private:
  Payoff payoff_;
  std::vector<int> action_counts_;
};

struct BestResponseResult {
  Profile joint;
  // rewards[0] is the payoff at the start; rewards[t + 1] follows the update
  // of agent updated_agent[t].
  std::vector<std::vector<double>> rewards;
  std::vector<int> updated_agent;
  int sweeps = 0;
};

// Cycles single-agent best responses until a full sweep changes nothing.
// Throws NoConvergence after `max_sweeps` sweeps without a fixed point.
template <class Payoff>
BestResponseResult best_response_dynamics(const ExactBestResponse<Payoff>& oracle, Profile start,
                                          int max_sweeps) {
  const int n = oracle.agent_count();
  if (static_cast<int>(start.size()) != n) fail(Errc::kLengthMismatch, "start profile length");
  for (int i = 0; i < n; ++i) {
    if (start[i] < 0 || start[i] >= oracle.action_count(i)) {
      fail(Errc::kInvalidArgument, "start action out of range");
    }
  }
  BestResponseResult out;
  out.joint = std::move(start);
  out.rewards.push_back(oracle.payoffs(out.joint));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int best = oracle.best_action(i, out.joint);
      changed = changed || best != out.joint[i];
      out.joint[i] = best;
      out.rewards.push_back(oracle.payoffs(out.joint));
      out.updated_agent.push_back(i);
    }
    out.sweeps = sweep + 1;
    if (!changed) return out;
  }
  fail(Errc::kNoConvergence,
       "no pure fixed point after " + std::to_string(max_sweeps) + " sweeps");
}

}  // namespace siclop
