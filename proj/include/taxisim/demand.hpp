#pragma once

#include <vector>

#include "taxisim/rng.hpp"
#include "taxisim/scenario.hpp"

namespace taxisim {

struct DemandItem {
  PassengerId passenger = 0;
  Millis time = 0;
  NodeId origin = 0;
  NodeId destination = 0;

  friend bool operator==(const DemandItem&, const DemandItem&) = default;
};

// Homogeneous Poisson arrivals over [0, duration) with origins and
// destinations drawn from the OD distribution. Passenger ids count from 0.
inline std::vector<DemandItem> generate_demand(double rate_per_hour, Millis duration, const OdDistribution& od,
                                               const RoadNetwork& net, Rng& rng) {
  if (!(rate_per_hour > 0.0)) throw InvalidConfig("demand_rate must be > 0");
  if (net.node_count() < 2) throw InvalidConfig("demand needs at least two nodes");

  std::vector<double> cumulative;
  cumulative.reserve(net.node_count());
  double total = 0.0;
  for (const Node& n : net.nodes()) {
    double w = 1.0;
    for (const auto& h : od.hotspots)
      if (h.node == n.id) w += h.weight;
    total += w;
    cumulative.push_back(total);
  }
  for (const auto& h : od.hotspots)
    if (!net.has_node(h.node)) throw InvalidConfig("hot-spot on unknown node " + std::to_string(h.node));

  auto draw_node = [&] {
    const double u = rng.uniform01() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), net.node_count() - 1);
    return net.nodes()[idx].id;
  };

  std::vector<DemandItem> out;
  const double mean_gap_ms = 3600.0 * 1000.0 / rate_per_hour;
  double clock = 0.0;
  for (;;) {
    clock += rng.exponential(mean_gap_ms);
    const Millis t = static_cast<Millis>(std::llround(clock));
    if (t >= duration) break;
    const NodeId origin = draw_node();
    NodeId destination = draw_node();
    while (destination == origin) destination = draw_node();
    out.push_back({static_cast<PassengerId>(out.size()), t, origin, destination});
  }
  return out;
}

inline std::vector<DemandItem> generate_demand(const ScenarioConfig& config, const RoadNetwork& net) {
  Rng rng(config.seed, 1);
  return generate_demand(config.demand_rate, config.duration_ms(), config.od_distribution, net, rng);
}

}  // namespace taxisim
