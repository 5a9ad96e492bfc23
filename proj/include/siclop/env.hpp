#pragma once

// Deterministic grid-world MMDP: drones travel to per-agent goal cells on a
// bounded board with obstacles. All moves of a joint action resolve at once.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "siclop/error.hpp"
#include "siclop/rng.hpp"

namespace siclop {

struct Cell {
  int x = 0;
  int y = 0;

  auto operator<=>(const Cell&) const = default;
};

inline int chebyshev(Cell a, Cell b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

// Eight compass moves plus STAY. North is y - 1.
enum class Action : std::uint8_t { kN, kNE, kE, kSE, kS, kSW, kW, kNW, kStay };

inline constexpr int kNumActions = 9;

using JointAction = std::vector<Action>;

constexpr Cell displacement(Action a) {
  constexpr std::array<Cell, kNumActions> kDelta{{
      {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, 0}}};
  return kDelta[static_cast<int>(a)];
}

constexpr Action action_from_index(int index) { return static_cast<Action>(index); }
constexpr int index_of(Action a) { return static_cast<int>(a); }

inline Cell apply(Cell c, Action a) {
  const Cell d = displacement(a);
  return {c.x + d.x, c.y + d.y};
}

// Reward constants of the delivery task.
inline constexpr double kGoalReward = 1.0;
inline constexpr double kCollisionPenalty = 1.0;
inline constexpr double kOutOfBoundsPenalty = 0.5;
inline constexpr double kProximityPenalty = 0.05;
inline constexpr double kShapingWeight = 0.1;

inline double compose_reward(bool reached_goal, bool collision, bool out_of_bounds,
                             int proximity_pairs, int distance_decrease) {
  return kGoalReward * (reached_goal ? 1.0 : 0.0) - kCollisionPenalty * (collision ? 1.0 : 0.0) -
         kOutOfBoundsPenalty * (out_of_bounds ? 1.0 : 0.0) -
         kProximityPenalty * static_cast<double>(proximity_pairs) +
         kShapingWeight * static_cast<double>(distance_decrease);
}

struct AgentStatus {
  Cell position;
  Cell goal;
  bool done = false;
  double cumulative_score = 0.0;

  bool operator==(const AgentStatus&) const = default;
};

// Static part of a scenario, shared by all states of an episode.
struct GridLayout {
  int width = 0;
  int height = 0;
  std::vector<Cell> obstacles;        // sorted, unique
  std::vector<std::uint8_t> blocked;  // row-major width*height occupancy

  bool operator==(const GridLayout& other) const {
    return width == other.width && height == other.height && blocked == other.blocked;
  }
};

struct StepOutcome;
class GridState;
inline StepOutcome step(const GridState& state, const JointAction& action);

class GridState {
 public:
  GridState() = default;

  // Validates every state invariant; throws InvalidDimensions or
  // InvalidArgument when one is violated.
  GridState(int width, int height, std::vector<Cell> obstacles, std::vector<AgentStatus> agents,
            int step_limit, int step = 0)
      : agents_(std::move(agents)), step_(step), step_limit_(step_limit) {
    if (width < 2 || height < 2) {
      fail(Errc::kInvalidDimensions, "grid must be at least 2x2");
    }
    auto layout = std::make_shared<GridLayout>();
    layout->width = width;
    layout->height = height;
    layout->blocked.assign(static_cast<std::size_t>(width) * height, 0);
    for (Cell c : obstacles) {
      if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height) {
        fail(Errc::kInvalidArgument, "obstacle outside the grid");
      }
      auto& cell = layout->blocked[static_cast<std::size_t>(c.y) * width + c.x];
      if (cell == 0) layout->obstacles.push_back(c);
      cell = 1;
    }
    std::sort(layout->obstacles.begin(), layout->obstacles.end());
    layout_ = std::move(layout);
    validate();
  }

  int width() const { return layout_->width; }
  int height() const { return layout_->height; }
  int step() const { return step_; }
  int step_limit() const { return step_limit_; }
  int agent_count() const { return static_cast<int>(agents_.size()); }

  const std::vector<AgentStatus>& agents() const { return agents_; }
  const AgentStatus& agent(int i) const { return agents_[i]; }
  const std::vector<Cell>& obstacles() const { return layout_->obstacles; }

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < layout_->width && c.y < layout_->height;
  }
  bool is_obstacle(Cell c) const {
    return in_bounds(c) &&
           layout_->blocked[static_cast<std::size_t>(c.y) * layout_->width + c.x] != 0;
  }

  int live_count() const {
    return static_cast<int>(
        std::count_if(agents_.begin(), agents_.end(), [](const auto& a) { return !a.done; }));
  }

  bool operator==(const GridState& other) const {
    return step_ == other.step_ && step_limit_ == other.step_limit_ && agents_ == other.agents_ &&
           (layout_ == other.layout_ || *layout_ == *other.layout_);
  }

  void validate() const {
    if (step_ < 0 || step_limit_ < 0 || step_ > step_limit_) {
      fail(Errc::kInvalidArgument, "step counter outside [0, step_limit]");
    }
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      const auto& a = agents_[i];
      if (!in_bounds(a.position) || !in_bounds(a.goal)) {
        fail(Errc::kInvalidArgument, "agent position or goal outside the grid");
      }
      if (a.done) continue;
      if (is_obstacle(a.position)) fail(Errc::kInvalidArgument, "live agent on an obstacle");
      for (std::size_t j = i + 1; j < agents_.size(); ++j) {
        if (!agents_[j].done && agents_[j].position == a.position) {
          fail(Errc::kInvalidArgument, "two live agents share a cell");
        }
      }
    }
  }

 private:
  friend StepOutcome step(const GridState& state, const JointAction& action);

  std::shared_ptr<const GridLayout> layout_;
  std::vector<AgentStatus> agents_;
  int step_ = 0;
  int step_limit_ = 0;
};

enum Event : std::uint8_t {
  kReachedGoal = 1 << 0,
  kCollision = 1 << 1,
  kOutOfBounds = 1 << 2,
  kProximity = 1 << 3,
};

using EventSet = std::uint8_t;

struct StepOutcome {
  GridState next_state;
  std::vector<double> rewards;
  std::vector<EventSet> events;
  std::vector<int> proximity_pairs;  // pairs charged to each agent
  std::vector<int> distance_decrease;

  bool operator==(const StepOutcome&) const = default;
};

inline bool is_terminal(const GridState& state) {
  if (state.step() >= state.step_limit()) return true;
  return state.live_count() == 0;
}

// Done agents are forced to STAY regardless of the supplied entry.
inline StepOutcome step(const GridState& state, const JointAction& action) {
  const int n = state.agent_count();
  if (static_cast<int>(action.size()) != n) {
    fail(Errc::kLengthMismatch, "joint action has " + std::to_string(action.size()) +
                                    " entries for " + std::to_string(n) + " agents");
  }
  if (is_terminal(state)) fail(Errc::kTerminalState, "step called on a terminal state");

  const auto& agents = state.agents_;
  std::vector<Cell> target(n);
  std::vector<std::uint8_t> moving(n, 0), collided(n, 0), out_of_bounds(n, 0);
  for (int i = 0; i < n; ++i) {
    const auto& a = agents[i];
    target[i] = a.position;
    if (a.done || action[i] == Action::kStay) continue;
    const Cell t = apply(a.position, action[i]);
    if (!state.in_bounds(t)) {
      out_of_bounds[i] = 1;
    } else if (state.is_obstacle(t)) {
      collided[i] = 1;
    } else {
      target[i] = t;
      moving[i] = 1;
    }
  }

  // Movers blocked in one pass become stationary, which may block followers
  // in the next pass; iterate to a fixed point.
  std::vector<std::uint8_t> blocked(n);
  bool changed = true;
  while (changed) {
    changed = false;
    std::fill(blocked.begin(), blocked.end(), 0);
    for (int i = 0; i < n; ++i) {
      if (!moving[i]) continue;
      for (int j = 0; j < n; ++j) {
        if (j == i || agents[j].done) continue;
        if (moving[j]) {
          const bool same_target = target[j] == target[i];
          const bool swap = target[i] == agents[j].position && target[j] == agents[i].position;
          if (same_target || swap) blocked[i] = 1;
        } else if (agents[j].position == target[i]) {
          blocked[i] = 1;
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      if (blocked[i]) {
        moving[i] = 0;
        collided[i] = 1;
        target[i] = agents[i].position;
        changed = true;
      }
    }
  }

  StepOutcome out;
  out.rewards.assign(n, 0.0);
  out.events.assign(n, 0);
  out.proximity_pairs.assign(n, 0);
  out.distance_decrease.assign(n, 0);

  for (int i = 0; i < n; ++i) {
    if (agents[i].done) continue;
    for (int j = i + 1; j < n; ++j) {
      if (agents[j].done) continue;
      if (chebyshev(target[i], target[j]) <= 1) {
        ++out.proximity_pairs[i];
        ++out.proximity_pairs[j];
      }
    }
  }

  GridState next = state;
  for (int i = 0; i < n; ++i) {
    const auto& before = agents[i];
    if (before.done) continue;
    auto& after = next.agents_[i];
    after.position = target[i];
    const bool reached = after.position == before.goal;
    const int decrease = chebyshev(before.position, before.goal) - chebyshev(after.position, before.goal);
    EventSet ev = 0;
    if (reached) ev |= kReachedGoal;
    if (collided[i]) ev |= kCollision;
    if (out_of_bounds[i]) ev |= kOutOfBounds;
    if (out.proximity_pairs[i] > 0) ev |= kProximity;
    out.events[i] = ev;
    out.distance_decrease[i] = decrease;
    out.rewards[i] =
        compose_reward(reached, collided[i] != 0, out_of_bounds[i] != 0, out.proximity_pairs[i], decrease);
    after.cumulative_score += out.rewards[i];
    after.done = reached;
  }
  ++next.step_;
  out.next_state = std::move(next);
  return out;
}

// Places agents, goals and obstacles on distinct uniformly sampled cells.
inline GridState generate_scenario(int width, int height, int n_agents, int n_obstacles,
                                   int step_limit, std::uint64_t seed) {
  if (width < 2 || height < 2) fail(Errc::kInvalidDimensions, "grid must be at least 2x2");
  if (n_agents < 0 || n_obstacles < 0 || step_limit < 0) {
    fail(Errc::kInvalidArgument, "negative scenario count");
  }
  const long cells = static_cast<long>(width) * height;
  const long needed = 2L * n_agents + n_obstacles;
  if (needed > cells) {
    fail(Errc::kCapacityExceeded, std::to_string(needed) + " placements do not fit in " +
                                      std::to_string(cells) + " cells");
  }
  std::vector<int> order(static_cast<std::size_t>(cells));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: only the first `needed` slots are used.
  for (long i = 0; i < needed; ++i) {
    const long j = i + static_cast<long>(rng.below(static_cast<std::uint64_t>(cells - i)));
    std::swap(order[i], order[j]);
  }
  auto cell_at = [&](long k) { return Cell{order[k] % width, order[k] / width}; };
  std::vector<AgentStatus> agents(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    agents[i].position = cell_at(i);
    agents[i].goal = cell_at(n_agents + i);
  }
  std::vector<Cell> obstacles;
  obstacles.reserve(n_obstacles);
  for (int i = 0; i < n_obstacles; ++i) obstacles.push_back(cell_at(2L * n_agents + i));
  return GridState(width, height, std::move(obstacles), std::move(agents), step_limit);
}

// Scenario text format: a header `W H N_AGENTS N_OBSTACLES STEP_LIMIT`, one
// `x y gx gy` line per agent, one `x y` line per obstacle. A file may hold any
// number of scenarios back to back. Blank lines and `#` comments are ignored.
inline void write_scenario(std::ostream& out, const GridState& state) {
  out << state.width() << ' ' << state.height() << ' ' << state.agent_count() << ' '
      << state.obstacles().size() << ' ' << state.step_limit() << '\n';
  for (const auto& a : state.agents()) {
    out << a.position.x << ' ' << a.position.y << ' ' << a.goal.x << ' ' << a.goal.y << '\n';
  }
  for (Cell c : state.obstacles()) out << c.x << ' ' << c.y << '\n';
}

inline std::vector<GridState> read_scenarios(std::istream& in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.push_back(line);
  }
  auto parse = [&](std::size_t index, int expected) {
    if (index >= lines.size()) fail(Errc::kConfig, "scenario file ends early");
    std::istringstream ls(lines[index]);
    std::vector<long> fields;
    for (long v; ls >> v;) fields.push_back(v);
    if (!ls.eof() || static_cast<int>(fields.size()) != expected) {
      fail(Errc::kConfig, "scenario line " + std::to_string(index + 1) + ": expected " +
                              std::to_string(expected) + " integers");
    }
    return fields;
  };
  std::vector<GridState> scenarios;
  std::size_t cursor = 0;
  while (cursor < lines.size()) {
    const auto header = parse(cursor++, 5);
    if (header[2] < 0 || header[3] < 0) fail(Errc::kConfig, "negative counts in scenario header");
    std::vector<AgentStatus> agents(static_cast<std::size_t>(header[2]));
    for (auto& a : agents) {
      const auto f = parse(cursor++, 4);
      a.position = {static_cast<int>(f[0]), static_cast<int>(f[1])};
      a.goal = {static_cast<int>(f[2]), static_cast<int>(f[3])};
    }
    std::vector<Cell> obstacles(static_cast<std::size_t>(header[3]));
    for (auto& c : obstacles) {
      const auto f = parse(cursor++, 2);
      c = {static_cast<int>(f[0]), static_cast<int>(f[1])};
    }
    try {
      scenarios.emplace_back(static_cast<int>(header[0]), static_cast<int>(header[1]),
                             std::move(obstacles), std::move(agents), static_cast<int>(header[4]));
    } catch (const Error& e) {
      fail(Errc::kConfig, std::string("invalid scenario: ") + e.what());
    }
  }
  return scenarios;
}

}  // namespace siclop
