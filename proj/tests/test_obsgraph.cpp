#include <gtest/gtest.h>

#include "siclop/obsgraph.hpp"

using namespace siclop;

namespace {

GridState make(int w, int h, std::vector<Cell> obstacles, std::vector<std::pair<Cell, Cell>> agents, int limit = 10,
               int step = 0) {
  std::vector<AgentStatus> a;
  for (auto [pos, goal] : agents) a.push_back({pos, goal, false, 0.0});
  return GridState(w, h, std::move(obstacles), std::move(a), limit, step);
}

}  // namespace

TEST(Layout, FeatureLength) {
  EXPECT_EQ(window_cells(2), 25);
  EXPECT_EQ(feature_length(2), 104);
  EXPECT_EQ(feature_length(1), 40);
  EXPECT_EQ(window_index(2, -2, -2), 0);
  EXPECT_EQ(window_index(2, 0, 0), 12);
  EXPECT_EQ(window_index(2, 3, 0), -1);
}

TEST(Graph, EdgeAtTwiceRadius) {
  const int r = 2;
  const auto near = make(12, 12, {}, {{{1, 1}, {0, 0}}, {{1 + 2 * r, 3}, {11, 11}}});
  EXPECT_TRUE(build_coordination_graph(near, r).has_edge(0, 1));
  const auto far = make(12, 12, {}, {{{1, 1}, {0, 0}}, {{2 + 2 * r, 3}, {11, 11}}});
  EXPECT_FALSE(build_coordination_graph(far, r).has_edge(0, 1));
  EXPECT_TRUE(build_coordination_graph(far, r).edges().empty());
}

TEST(Graph, SingleAgent) {
  const auto s = make(5, 5, {}, {{{1, 1}, {3, 3}}});
  const GraphInput in = preprocess(s, 2);
  EXPECT_EQ(in.graph.size(), 1);
  EXPECT_TRUE(in.graph.edges().empty());
  EXPECT_EQ(in.agent_count(), 1);
}

TEST(Graph, DoneAgentsAreIsolated) {
  std::vector<AgentStatus> a{{{1, 1}, {1, 1}, true, 0}, {{2, 1}, {5, 5}, false, 0}};
  const GridState s(8, 8, {}, a, 10);
  const auto g = build_coordination_graph(s, 2);
  EXPECT_FALSE(g.has_edge(0, 1));
  const GraphInput in = preprocess(s, 2);
  EXPECT_EQ(in.observations(0, feature_length(2) - 1), 1.0);
  EXPECT_EQ(in.observations(1, feature_length(2) - 1), 0.0);
  // The done agent is not visible as another agent.
  EXPECT_EQ(in.observations(1, kOtherAgentChannel * 25 + window_index(2, -1, 0)), 0.0);
}

TEST(Graph, NormalizedAdjacencyOnPath) {
  CoordinationGraph g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  const auto a = g.normalized_adjacency();
  // Degrees with self loops: 2, 3, 2.
  EXPECT_DOUBLE_EQ(a(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(a(1, 1), 1.0 / 3);
  EXPECT_DOUBLE_EQ(a(0, 1), 1.0 / std::sqrt(6.0));
  EXPECT_DOUBLE_EQ(a(1, 0), a(0, 1));
  EXPECT_EQ(a(0, 2), 0.0);
}

TEST(Observation, EmptyWindowHandExample) {
  const auto s = make(12, 12, {}, {{{5, 5}, {8, 5}}}, 20);
  const GraphInput in = preprocess(s, 2);
  ASSERT_EQ(in.observations.cols(), 104);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(in.observations(0, k), 0.0) << k;
  EXPECT_DOUBLE_EQ(in.observations(0, 100), 3.0 / 12);
  EXPECT_DOUBLE_EQ(in.observations(0, 101), 0.0);
  EXPECT_DOUBLE_EQ(in.observations(0, 102), 1.0);
  EXPECT_DOUBLE_EQ(in.observations(0, 103), 0.0);
}

TEST(Observation, CornerMarksOffBoardAndChannels) {
  const auto s = make(6, 6, {{1, 0}}, {{{0, 0}, {1, 1}}, {{0, 2}, {5, 5}}}, 10, 4);
  const GraphInput in = preprocess(s, 2);
  const auto row = in.observations.row(0);
  int off = 0;
  for (int k = 0; k < 25; ++k) off += row[kOffBoardChannel * 25 + k] == 1.0;
  EXPECT_EQ(off, 25 - 9);
  EXPECT_EQ(row[kObstacleChannel * 25 + window_index(2, 1, 0)], 1.0);
  EXPECT_EQ(row[kOwnGoalChannel * 25 + window_index(2, 1, 1)], 1.0);
  EXPECT_EQ(row[kOtherAgentChannel * 25 + window_index(2, 0, 2)], 1.0);
  EXPECT_DOUBLE_EQ(row[102], 6.0 / 10);
  for (double v : row) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Observation, LocalityOutsideAllWindows) {
  const auto a = make(12, 12, {{10, 10}}, {{{1, 1}, {3, 3}}, {{3, 2}, {0, 0}}});
  const auto b = make(12, 12, {{10, 10}, {9, 1}, {11, 11}}, {{{1, 1}, {3, 3}}, {{3, 2}, {0, 0}}});
  EXPECT_EQ(preprocess(a, 2).observations, preprocess(b, 2).observations);
  const auto c = make(12, 12, {{10, 10}, {2, 3}}, {{{1, 1}, {3, 3}}, {{3, 2}, {0, 0}}});
  EXPECT_FALSE(preprocess(a, 2).observations == preprocess(c, 2).observations);
}

TEST(Observation, ShapeIndependentOfGridAndAgents) {
  EXPECT_EQ(preprocess(generate_scenario(8, 8, 3, 2, 10, 1), 2).observations.cols(),
            preprocess(generate_scenario(20, 15, 9, 7, 10, 1), 2).observations.cols());
}

TEST(Observation, RadiusMustBePositive) {
  const auto s = make(4, 4, {}, {{{1, 1}, {3, 3}}});
  EXPECT_THROW(preprocess(s, 0), Error);
}

TEST(Graph, PermutationSymmetry) {
  const auto s = make(10, 10, {}, {{{1, 1}, {0, 0}}, {{4, 1}, {9, 9}}, {{8, 8}, {0, 9}}});
  const auto t = make(10, 10, {}, {{{8, 8}, {0, 9}}, {{1, 1}, {0, 0}}, {{4, 1}, {9, 9}}});
  const auto gs = build_coordination_graph(s, 2);
  const auto gt = build_coordination_graph(t, 2);
  const int perm[3] = {1, 2, 0};  // s index -> t index
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(gs.has_edge(i, j), gt.has_edge(perm[i], perm[j]));
}

TEST(Intent, CellsEnteredByOthers) {
  const auto s = make(8, 8, {}, {{{3, 3}, {0, 0}}, {{4, 3}, {7, 7}}, {{7, 7}, {0, 7}}});
  // Agent 1 moves east to (5,3); agent 2 is out of range.
  const std::vector<int> choices{index_of(Action::kStay), index_of(Action::kE), index_of(Action::kN)};
  EXPECT_EQ(intent_cells(s, 2, 0, choices), (std::vector<int>{window_index(2, 2, 0)}));
  // From agent 1's view agent 0 stays put one cell west.
  EXPECT_EQ(intent_cells(s, 2, 1, choices), (std::vector<int>{window_index(2, -1, 0)}));
}

TEST(Intent, OffBoardMoveKeepsOrigin) {
  const auto s = make(8, 8, {}, {{{1, 0}, {5, 5}}, {{0, 0}, {7, 7}}});
  const std::vector<int> choices{index_of(Action::kStay), index_of(Action::kN)};
  EXPECT_EQ(intent_cells(s, 2, 0, choices), (std::vector<int>{window_index(2, -1, 0)}));
}
