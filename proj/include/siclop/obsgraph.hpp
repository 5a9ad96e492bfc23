#pragma once

// Local observations and the range-based coordination graph fed to the
// network. Each agent sees a (2r+1)^2 window in four binary channels plus four
// scalars, so the feature length depends only on the radius.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "siclop/env.hpp"
#include "siclop/numcore.hpp"

namespace siclop {

inline constexpr int kDefaultRadius = 2;
inline constexpr int kWindowChannels = 4;
inline constexpr int kScalarFeatures = 4;

enum WindowChannel : int {
  kObstacleChannel = 0,
  kOtherAgentChannel = 1,
  kOwnGoalChannel = 2,
  kOffBoardChannel = 3,
};

constexpr int window_side(int radius) { return 2 * radius + 1; }
constexpr int window_cells(int radius) { return window_side(radius) * window_side(radius); }
constexpr int feature_length(int radius) {
  return kWindowChannels * window_cells(radius) + kScalarFeatures;
}

// Row-major index of displacement (dx, dy) inside the window, or -1.
constexpr int window_index(int radius, int dx, int dy) {
  if (dx < -radius || dx > radius || dy < -radius || dy > radius) return -1;
  return (dy + radius) * window_side(radius) + (dx + radius);
}

class CoordinationGraph {
 public:
  CoordinationGraph() = default;
  explicit CoordinationGraph(int n) : n_(n), adjacency_(static_cast<std::size_t>(n) * n, 0) {}

  int size() const { return n_; }

  void add_edge(int i, int j) {
    if (i == j) return;
    if (!has_edge(i, j)) edges_.emplace_back(std::min(i, j), std::max(i, j));
    adjacency_[static_cast<std::size_t>(i) * n_ + j] = 1;
    adjacency_[static_cast<std::size_t>(j) * n_ + i] = 1;
  }

  bool has_edge(int i, int j) const { return adjacency_[static_cast<std::size_t>(i) * n_ + j] != 0; }

  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  int degree(int i) const {
    int d = 0;
    for (int j = 0; j < n_; ++j) d += has_edge(i, j) ? 1 : 0;
    return d;
  }

  // D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
  num::Matrix normalized_adjacency() const {
    std::vector<double> inv_sqrt(n_);
    for (int i = 0; i < n_; ++i) inv_sqrt[i] = 1.0 / std::sqrt(1.0 + degree(i));
    num::Matrix a(n_, n_);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        if (i == j || has_edge(i, j)) a(i, j) = inv_sqrt[i] * inv_sqrt[j];
      }
    }
    return a;
  }

 private:
  int n_ = 0;
  std::vector<std::uint8_t> adjacency_;
  std::vector<std::pair<int, int>> edges_;
};

struct GraphInput {
  int radius = kDefaultRadius;
  num::Matrix observations;  // agents x feature_length(radius)
  CoordinationGraph graph;
  // Window cells that other agents intend to enter, per agent. Empty means
  // the prediction is not conditioned on anyone's choice.
  std::vector<std::vector<int>> intents;

  int agent_count() const { return observations.rows(); }
};

// Live agents within Chebyshev distance 2r share an edge; done agents are
// isolated nodes.
inline CoordinationGraph build_coordination_graph(const GridState& state, int radius) {
  const int n = state.agent_count();
  CoordinationGraph g(n);
  for (int i = 0; i < n; ++i) {
    if (state.agent(i).done) continue;
    for (int j = i + 1; j < n; ++j) {
      if (state.agent(j).done) continue;
      if (chebyshev(state.agent(i).position, state.agent(j).position) <= 2 * radius) g.add_edge(i, j);
    }
  }
  return g;
}

inline void encode_observation(const GridState& state, int radius, int agent, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const int cells = window_cells(radius);
  const auto& self = state.agent(agent);
  const Cell origin = self.position;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const Cell c{origin.x + dx, origin.y + dy};
      const int w = window_index(radius, dx, dy);
      if (!state.in_bounds(c)) {
        out[kOffBoardChannel * cells + w] = 1.0;
        continue;
      }
      if (state.is_obstacle(c)) out[kObstacleChannel * cells + w] = 1.0;
      if (c == self.goal) out[kOwnGoalChannel * cells + w] = 1.0;
    }
  }
  for (int j = 0; j < state.agent_count(); ++j) {
    if (j == agent || state.agent(j).done) continue;
    const Cell p = state.agent(j).position;
    const int w = window_index(radius, p.x - origin.x, p.y - origin.y);
    if (w >= 0) out[kOtherAgentChannel * cells + w] = 1.0;
  }
  const int base = kWindowChannels * cells;
  out[base + 0] = static_cast<double>(self.goal.x - origin.x) / state.width();
  out[base + 1] = static_cast<double>(self.goal.y - origin.y) / state.height();
  out[base + 2] = state.step_limit() > 0
                      ? static_cast<double>(state.step_limit() - state.step()) / state.step_limit()
                      : 0.0;
  out[base + 3] = self.done ? 1.0 : 0.0;
}

inline GraphInput preprocess(const GridState& state, int radius = kDefaultRadius) {
  if (radius < 1) fail(Errc::kInvalidArgument, "observation radius must be at least 1");
  GraphInput input;
  input.radius = radius;
  input.observations = num::Matrix(state.agent_count(), feature_length(radius));
  for (int i = 0; i < state.agent_count(); ++i) {
    encode_observation(state, radius, i, input.observations.row(i));
  }
  input.graph = build_coordination_graph(state, radius);
  input.intents.assign(state.agent_count(), {});
  return input;
}

// Window cells of `agent` that the other live agents would enter under
// `choices` (action indices, one per agent). Off-board moves keep their
// origin cell. Sorted and unique.
inline std::vector<int> intent_cells(const GridState& state, int radius, int agent,
                                     std::span<const int> choices) {
  std::vector<int> cells;
  const Cell origin = state.agent(agent).position;
  for (int j = 0; j < state.agent_count(); ++j) {
    if (j == agent || state.agent(j).done) continue;
    Cell dest = apply(state.agent(j).position, action_from_index(choices[j]));
    if (!state.in_bounds(dest)) dest = state.agent(j).position;
    const int w = window_index(radius, dest.x - origin.x, dest.y - origin.y);
    if (w >= 0) cells.push_back(w);
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

}  // namespace siclop
