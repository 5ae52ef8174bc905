#pragma once

#include <cstdint>
#include <vector>

#include "taxisim/rng.hpp"
#include "taxisim/road_network.hpp"

namespace taxisim {

struct SpeedProfile {
  double base_speed = 10.0;  // m/s
  double jitter = 0.0;       // relative half-width, speed ~ U[base(1-j), base(1+j)]
};

// Random congestion on a fraction of the directed edges. With the default
// window [0, forever) each selected edge has a static multiplier.
struct CongestionSpec {
  double fraction = 0.0;
  double min_multiplier = 1.0;
  double max_multiplier = 1.0;
  Millis start = 0;
  Millis end = kForever;
};

struct GridNetwork {
  RoadNetwork network;
  TravelTimeModel travel_times;
};

// rows x cols lattice with two directed edges per street. Node id is
// r * cols + c at (c * spacing, r * spacing).
inline GridNetwork generate_grid_network(int rows, int cols, double spacing, const SpeedProfile& speed,
                                         std::uint64_t seed, const CongestionSpec& congestion = {}) {
  if (rows < 2 || cols < 2) throw InvalidConfig("grid needs at least 2 rows and 2 columns");
  if (!(spacing > 0.0)) throw InvalidConfig("grid spacing must be positive");
  if (!(speed.base_speed > 0.0) || speed.jitter < 0.0 || speed.jitter >= 1.0)
    throw InvalidConfig("speed profile needs base_speed > 0 and jitter in [0, 1)");
  if (congestion.fraction < 0.0 || congestion.fraction > 1.0 || congestion.min_multiplier < 1.0 ||
      congestion.max_multiplier < congestion.min_multiplier || congestion.end <= congestion.start)
    throw InvalidConfig("invalid congestion spec");

  Rng speed_rng(seed, 11);
  Rng congestion_rng(seed, 12);

  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) nodes.push_back({r * cols + c, c * spacing, r * spacing});

  std::vector<Edge> edges;
  auto add_street = [&](NodeId a, NodeId b) {
    for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
      double v = speed.base_speed;
      if (speed.jitter > 0.0) v *= speed_rng.uniform(1.0 - speed.jitter, 1.0 + speed.jitter);
      edges.push_back({static_cast<EdgeId>(edges.size()), from, to, spacing, v});
    }
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const NodeId id = r * cols + c;
      if (c + 1 < cols) add_street(id, id + 1);
      if (r + 1 < rows) add_street(id, id + cols);
    }
  }

  GridNetwork grid{RoadNetwork(std::move(nodes), edges), {}};
  if (congestion.fraction > 0.0) {
    for (const Edge& e : edges) {
      const bool congested = congestion_rng.uniform01() < congestion.fraction;
      const double m = congestion_rng.uniform(congestion.min_multiplier, congestion.max_multiplier);
      if (congested && m > 1.0) grid.travel_times.set_profile(e.id, {{congestion.start, congestion.end, m}});
    }
  }
  return grid;
}

// Nodes reachable from `from` by breadth-first search.
inline std::vector<bool> reachable_from(const RoadNetwork& net, NodeId from) {
  std::vector<bool> seen(net.node_count(), false);
  std::vector<NodeId> frontier{from};
  seen[net.index_of(from)] = true;
  while (!frontier.empty()) {
    const NodeId u = frontier.back();
    frontier.pop_back();
    for (EdgeId e : net.out_edges(u)) {
      const NodeId v = net.edge(e).to;
      if (!seen[net.index_of(v)]) {
        seen[net.index_of(v)] = true;
        frontier.push_back(v);
      }
    }
  }
  return seen;
}

inline bool is_strongly_connected(const RoadNetwork& net) {
  for (const Node& n : net.nodes()) {
    const auto seen = reachable_from(net, n.id);
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) return false;
  }
  return true;
}

}  // namespace taxisim
