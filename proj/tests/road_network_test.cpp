#include <gtest/gtest.h>

#include "oracles.hpp"
#include "taxisim/grid_network.hpp"
#include "taxisim/network_io.hpp"
#include "taxisim/path_planning.hpp"

namespace taxisim {
namespace {

// A=0, B=1, C=2, D=3.
RoadNetwork diamond(double speed = 10.0) {
  return RoadNetwork({{0, 0, 0}, {1, 100, 50}, {2, 100, -50}, {3, 200, 0}},
                     {{0, 0, 1, 100, speed}, {1, 1, 3, 100, speed}, {2, 0, 2, 150, speed}, {3, 2, 3, 40, speed}});
}

TEST(RoadNetwork, RejectsBadEdges) {
  EXPECT_THROW(RoadNetwork({{0, 0, 0}}, {{0, 0, 1, 10, 1}}), InvalidConfig);
  EXPECT_THROW(RoadNetwork({{0, 0, 0}, {1, 1, 1}}, {{0, 0, 1, 0, 1}}), InvalidConfig);
  EXPECT_THROW(RoadNetwork({{0, 0, 0}, {1, 1, 1}}, {{0, 0, 1, 5, -1}}), InvalidConfig);
  EXPECT_THROW(RoadNetwork({{0, 0, 0}, {0, 1, 1}}, {}), InvalidConfig);
}

TEST(TravelTimeModel, MultiplierDefaultsToOne) {
  TravelTimeModel ttm;
  EXPECT_EQ(ttm.multiplier(3, 12345), 1.0);
  ttm.set_profile(3, {{1000, 2000, 3.0}});
  EXPECT_EQ(ttm.multiplier(3, 999), 1.0);
  EXPECT_EQ(ttm.multiplier(3, 1000), 3.0);
  EXPECT_EQ(ttm.multiplier(3, 1999), 3.0);
  EXPECT_EQ(ttm.multiplier(3, 2000), 1.0);
  EXPECT_THROW(ttm.set_profile(1, {{0, 10, 0.5}}), InvalidConfig);
  EXPECT_THROW(ttm.set_profile(1, {{0, 10, 2.0}, {5, 20, 2.0}}), InvalidConfig);
}

TEST(TravelTimeModel, FrozenAtEntry) {
  TravelTimeModel ttm;
  ttm.set_profile(0, {{0, 5000, 4.0}});
  const Edge e{0, 0, 1, 100, 10};
  // Enters inside the congested bin: the whole edge takes 40 s even though
  // the bin ends after 5 s.
  EXPECT_EQ(ttm.traversal_time(e, 4999), 40'000);
  EXPECT_EQ(ttm.traversal_time(e, 5000), 10'000);
}

TEST(ShortestDistance, IdentityIsEmpty) {
  const auto net = diamond();
  const Path p = shortest_distance_path(net, 3, 3);
  EXPECT_TRUE(p.edges.empty());
  EXPECT_EQ(p.total_length, 0.0);
  EXPECT_EQ(p.total_time, 0);
}

TEST(ShortestDistance, Diamond) {
  const auto net = diamond();
  const Path p = shortest_distance_path(net, 0, 3);
  EXPECT_EQ(path_nodes(net, p), (std::vector<NodeId>{0, 2, 3}));
  EXPECT_DOUBLE_EQ(p.total_length, 190.0);
  const auto oracle = oracle::best_simple_path(net, {}, 0, 3, 0, oracle::Metric::Length);
  ASSERT_TRUE(oracle);
  EXPECT_EQ(oracle->edges, p.edges);
}

TEST(ShortestDistance, SinkHasNoPath) {
  const auto net = diamond();
  EXPECT_THROW(shortest_distance_path(net, 3, 0), NoPath);
  EXPECT_THROW(shortest_distance_path(net, 0, 42), UnknownNode);
  EXPECT_THROW(shortest_distance_path(net, 42, 0), UnknownNode);
}

TEST(LeastTime, UniformSpeedMatchesShortestDistanceTime) {
  const auto grid = generate_grid_network(5, 5, 100, {10, 0}, 1);
  for (NodeId a : {0, 7, 24})
    for (NodeId b : {3, 12, 20}) {
      const Path sd = shortest_distance_path(grid.network, grid.travel_times, a, b, 0);
      const Path lt = least_time_path(grid.network, grid.travel_times, 0, a, b);
      EXPECT_EQ(sd.total_time, lt.total_time);
    }
}

TEST(LeastTime, CongestedDiamondGoesAround) {
  const auto net = diamond(10.0);
  TravelTimeModel ttm;
  ttm.set_profile(3, {{0, kForever, 5.0}});
  const Path p = least_time_path(net, ttm, 0, 0, 3);
  EXPECT_EQ(path_nodes(net, p), (std::vector<NodeId>{0, 1, 3}));
  EXPECT_EQ(p.total_time, 20'000);
  const Path via_c = evaluate_path(net, ttm, 0, {2, 3}, 0);
  EXPECT_EQ(via_c.total_time, 35'000);
  const auto oracle = oracle::best_simple_path(net, ttm, 0, 3, 0, oracle::Metric::Time);
  ASSERT_TRUE(oracle);
  EXPECT_EQ(oracle->time, 20'000);
}

TEST(LeastTime, SingleEdge) {
  const RoadNetwork net({{0, 0, 0}, {1, 10, 0}}, {{7, 0, 1, 10, 2}});
  const Path p = least_time_path(net, {}, 0, 0, 1);
  EXPECT_EQ(p.edges, std::vector<EdgeId>{7});
  EXPECT_EQ(p.total_time, 5000);
  EXPECT_THROW(least_time_path(net, {}, -1, 0, 1), InvalidConfig);
}

TEST(LeastTime, TieBreakPrefersSmallerNodeSequence) {
  // 0 -> 2 -> 3 and 0 -> 1 -> 3 tie in both metrics.
  const RoadNetwork net({{0, 0, 0}, {1, 1, 1}, {2, 1, -1}, {3, 2, 0}},
                        {{0, 0, 2, 100, 10}, {1, 2, 3, 100, 10}, {2, 0, 1, 100, 10}, {3, 1, 3, 100, 10}});
  EXPECT_EQ(path_nodes(net, least_time_path(net, {}, 0, 0, 3)), (std::vector<NodeId>{0, 1, 3}));
  EXPECT_EQ(path_nodes(net, shortest_distance_path(net, 0, 3)), (std::vector<NodeId>{0, 1, 3}));
}

TEST(Grid, Counting) {
  const auto g = generate_grid_network(2, 2, 100, {}, 0);
  EXPECT_EQ(g.network.node_count(), 4u);
  EXPECT_EQ(g.network.edge_count(), 8u);
  EXPECT_THROW(generate_grid_network(1, 5, 100, {}, 0), InvalidConfig);
  EXPECT_THROW(generate_grid_network(3, 3, 0, {}, 0), InvalidConfig);
}

TEST(Grid, DeterministicCanonicalForm) {
  const CongestionSpec cs{0.3, 1.5, 3.0};
  const auto a = generate_grid_network(6, 7, 150, {9, 0.2}, 42, cs);
  const auto b = generate_grid_network(6, 7, 150, {9, 0.2}, 42, cs);
  EXPECT_EQ(canonical_network(a.network, a.travel_times), canonical_network(b.network, b.travel_times));
  const auto c = generate_grid_network(6, 7, 150, {9, 0.2}, 43, cs);
  EXPECT_NE(canonical_network(a.network, a.travel_times), canonical_network(c.network, c.travel_times));
}

TEST(Grid, StronglyConnected) {
  const auto g = generate_grid_network(10, 10, 100, {10, 0.3}, 5);
  for (const Node& n : g.network.nodes()) {
    const auto seen = reachable_from(g.network, n.id);
    EXPECT_EQ(std::count(seen.begin(), seen.end(), true), 100);
  }
}

TEST(NetworkIo, JsonRoundTrip) {
  const auto g = generate_grid_network(3, 4, 120, {8, 0.1}, 9, {0.5, 2.0, 2.0, 1000, 9000});
  const auto back = network_from_json(network_to_json(g.network, g.travel_times));
  EXPECT_EQ(back.network, g.network);
  EXPECT_EQ(back.travel_times, g.travel_times);
  EXPECT_THROW(network_from_json(json{{"nodes", json::array()}}), InvalidConfig);
}

// Both planners against exhaustive simple-path enumeration, plus the path
// invariants and cross-metric dominance.
TEST(PlannerProperties, MatchEnumerationOnRandomGraphs) {
  Rng rng(2024);
  for (int trial = 0; trial < 120; ++trial) {
    const auto g = oracle::random_strongly_connected(rng, 9, trial % 2 == 0);
    ASSERT_TRUE(g.ttm.is_fifo());
    const NodeId a = static_cast<NodeId>(rng.below(g.net.node_count()));
    const NodeId b = static_cast<NodeId>(rng.below(g.net.node_count()));
    const Millis depart = static_cast<Millis>(rng.below(400'000));

    const Path sd = shortest_distance_path(g.net, g.ttm, a, b, depart);
    const Path lt = least_time_path(g.net, g.ttm, depart, a, b);
    const auto by_length = oracle::best_simple_path(g.net, g.ttm, a, b, depart, oracle::Metric::Length);
    const auto by_time = oracle::best_simple_path(g.net, g.ttm, a, b, depart, oracle::Metric::Time);
    ASSERT_TRUE(by_length && by_time);
    EXPECT_EQ(sd.edges, by_length->edges) << "trial " << trial;
    EXPECT_EQ(lt.edges, by_time->edges) << "trial " << trial;
    EXPECT_EQ(lt.total_time, by_time->time);

    EXPECT_LE(lt.total_time, sd.total_time);
    EXPECT_LE(sd.total_length, lt.total_length);
    for (const Path* p : {&sd, &lt}) {
      EXPECT_EQ(evaluate_path(g.net, g.ttm, a, p->edges, depart), *p);
      EXPECT_GE(p->total_time, 0);
      EXPECT_EQ(p->edges.empty(), a == b);
    }
  }
}

TEST(PlannerProperties, ConcatenationNeverBeatsDirect) {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = oracle::random_strongly_connected(rng, 12);
    const auto n = g.net.node_count();
    const NodeId a = static_cast<NodeId>(rng.below(n));
    const NodeId b = static_cast<NodeId>(rng.below(n));
    const NodeId d = static_cast<NodeId>(rng.below(n));
    const Millis t0 = static_cast<Millis>(rng.below(100'000));
    const Path ab = shortest_distance_path(g.net, g.ttm, a, b, t0);
    const Path bd = shortest_distance_path(g.net, g.ttm, b, d, t0);
    EXPECT_LE(shortest_distance_path(g.net, g.ttm, a, d, t0).total_length, ab.total_length + bd.total_length + 1e-9);
    const Path lab = least_time_path(g.net, g.ttm, t0, a, b);
    const Path lbd = least_time_path(g.net, g.ttm, lab.arrival(), b, d);
    EXPECT_LE(least_time_path(g.net, g.ttm, t0, a, d).arrival(), lbd.arrival());
  }
}

TEST(Planning, TravelTimesFromMatchesPointQueries) {
  const auto g = generate_grid_network(6, 6, 100, {10, 0.3}, 3, {0.4, 1.5, 3.0});
  std::vector<NodeId> targets{0, 5, 17, 35};
  for (PlannerKind kind : {PlannerKind::ShortestDistance, PlannerKind::LeastTime}) {
    const auto times = travel_times_from(kind, g.network, g.travel_times, 7000, 14, targets);
    for (std::size_t i = 0; i < targets.size(); ++i)
      EXPECT_EQ(*times[i], plan_path(kind, g.network, g.travel_times, 7000, 14, targets[i]).total_time);
  }
}

TEST(Planning, FromMidEdgeContinuesThroughHead) {
  const auto net = diamond(10.0);
  const Path p = plan_from_position(PlannerKind::ShortestDistance, net, {}, EdgePosition{0, 0.25}, 0, 3);
  EXPECT_EQ(p.edges, std::vector<EdgeId>{1});
  EXPECT_DOUBLE_EQ(p.total_length, 175.0);
  EXPECT_EQ(p.total_time, 17'500);
}

}  // namespace
}  // namespace taxisim
