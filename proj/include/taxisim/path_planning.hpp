#pragma once

#include <algorithm>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "taxisim/road_network.hpp"

namespace taxisim {

enum class PlannerKind { ShortestDistance, LeastTime };

inline std::string_view to_string(PlannerKind kind) {
  return kind == PlannerKind::ShortestDistance ? "shortest_distance" : "least_time";
}

inline PlannerKind parse_planner_kind(std::string_view s) {
  if (s == "shortest_distance") return PlannerKind::ShortestDistance;
  if (s == "least_time") return PlannerKind::LeastTime;
  throw InvalidConfig("unknown planner '" + std::string(s) + "'");
}

namespace detail {

// Static metric: accumulated length in meters.
struct DistanceMetric {
  using Cost = double;
  const TravelTimeModel* ttm = nullptr;
  Cost start(Millis) const { return 0.0; }
  Cost extend(Cost at, const Edge& e) const { return at + e.length; }
};

// Time-dependent metric: absolute arrival time under frozen-at-entry traversal.
struct ArrivalMetric {
  using Cost = Millis;
  const TravelTimeModel* ttm = nullptr;
  Cost start(Millis depart) const { return depart; }
  Cost extend(Cost at, const Edge& e) const { return at + ttm->traversal_time(e, at); }
};

// One-to-all label-setting search. Among equal-cost paths to a node it keeps
// the lexicographically smallest node-id sequence (then edge-id sequence).
template <typename Metric>
class LabelSetting {
 public:
  using Cost = typename Metric::Cost;

  LabelSetting(const RoadNetwork& net, Metric metric, NodeId origin, Millis depart,
               std::optional<NodeId> target = std::nullopt)
      : net_(net), origin_(origin) {
    const std::size_t n = net.node_count();
    cost_.assign(n, Cost{});
    reached_.assign(n, false);
    settled_.assign(n, false);
    pred_edge_.assign(n, -1);

    const std::size_t src = net.index_of(origin);
    if (target) net.index_of(*target);
    cost_[src] = metric.start(depart);
    reached_[src] = true;

    using Entry = std::pair<Cost, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    heap.emplace(cost_[src], src);
    while (!heap.empty()) {
      auto [c, u] = heap.top();
      heap.pop();
      if (settled_[u] || c != cost_[u]) continue;
      settled_[u] = true;
      const NodeId u_id = net.nodes()[u].id;
      if (target && u_id == *target) break;
      for (EdgeId eid : net.out_edges(u_id)) {
        const Edge& e = net.edge(eid);
        const std::size_t v = net.index_of(e.to);
        if (settled_[v]) continue;
        const Cost candidate = metric.extend(c, e);
        if (!reached_[v] || candidate < cost_[v]) {
          cost_[v] = candidate;
          reached_[v] = true;
          pred_edge_[v] = eid;
          heap.emplace(candidate, v);
        } else if (candidate == cost_[v] && prefers(eid, pred_edge_[v])) {
          pred_edge_[v] = eid;
        }
      }
    }
  }

  bool reached(NodeId node) const { return settled_[net_.index_of(node)]; }
  Cost cost(NodeId node) const { return cost_[net_.index_of(node)]; }

  std::vector<EdgeId> edges_to(NodeId node) const {
    std::size_t v = net_.index_of(node);
    if (!settled_[v]) throw NoPath("no path from " + std::to_string(origin_) + " to " + std::to_string(node));
    std::vector<EdgeId> out;
    while (pred_edge_[v] >= 0) {
      out.push_back(pred_edge_[v]);
      v = net_.index_of(net_.edge(pred_edge_[v]).from);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  // Compares origin->tail(a)->head vs origin->tail(b)->head as node sequences,
  // then as edge sequences. Both tails are settled, so their paths are final.
  bool prefers(EdgeId a, EdgeId b) const {
    const auto pa = with_last(a);
    const auto pb = with_last(b);
    const auto na = node_sequence(pa);
    const auto nb = node_sequence(pb);
    if (na != nb) return na < nb;
    return pa < pb;
  }

  std::vector<EdgeId> with_last(EdgeId last) const {
    auto edges = edges_to(net_.edge(last).from);
    edges.push_back(last);
    return edges;
  }

  std::vector<NodeId> node_sequence(const std::vector<EdgeId>& edges) const {
    std::vector<NodeId> seq{origin_};
    for (EdgeId e : edges) seq.push_back(net_.edge(e).to);
    return seq;
  }

  const RoadNetwork& net_;
  NodeId origin_;
  std::vector<Cost> cost_;
  std::vector<bool> reached_;
  std::vector<bool> settled_;
  std::vector<EdgeId> pred_edge_;
};

}  // namespace detail

// Minimum-length path; total_time is reported for the given depart time.
inline Path shortest_distance_path(const RoadNetwork& net, const TravelTimeModel& ttm, NodeId from,
                                   NodeId to, Millis depart = 0) {
  detail::LabelSetting<detail::DistanceMetric> search(net, {&ttm}, from, depart, to);
  return evaluate_path(net, ttm, from, search.edges_to(to), depart);
}

inline Path shortest_distance_path(const RoadNetwork& net, NodeId from, NodeId to) {
  static const TravelTimeModel free_flow;
  return shortest_distance_path(net, free_flow, from, to, 0);
}

// Earliest-arrival path under frozen-at-entry traversal times. Exact when the
// model is FIFO (see TravelTimeModel::is_fifo).
inline Path least_time_path(const RoadNetwork& net, const TravelTimeModel& ttm, Millis depart,
                            NodeId from, NodeId to) {
  if (depart < 0) throw InvalidConfig("negative depart time");
  detail::LabelSetting<detail::ArrivalMetric> search(net, {&ttm}, from, depart, to);
  return evaluate_path(net, ttm, from, search.edges_to(to), depart);
}

inline Path plan_path(PlannerKind kind, const RoadNetwork& net, const TravelTimeModel& ttm,
                      Millis depart, NodeId from, NodeId to) {
  return kind == PlannerKind::ShortestDistance ? shortest_distance_path(net, ttm, from, to, depart)
                                               : least_time_path(net, ttm, depart, from, to);
}

// Travel times from one origin to many targets with a single search.
// Unreachable targets yield nullopt.
inline std::vector<std::optional<Millis>> travel_times_from(PlannerKind kind, const RoadNetwork& net,
                                                            const TravelTimeModel& ttm, Millis depart,
                                                            NodeId from,
                                                            std::span<const NodeId> targets) {
  std::vector<std::optional<Millis>> out;
  out.reserve(targets.size());
  if (kind == PlannerKind::LeastTime) {
    detail::LabelSetting<detail::ArrivalMetric> search(net, {&ttm}, from, depart);
    for (NodeId t : targets) {
      if (search.reached(t)) out.emplace_back(search.cost(t) - depart);
      else out.emplace_back(std::nullopt);
    }
  } else {
    detail::LabelSetting<detail::DistanceMetric> search(net, {&ttm}, from, depart);
    for (NodeId t : targets) {
      if (search.reached(t)) out.emplace_back(evaluate_path(net, ttm, from, search.edges_to(t), depart).total_time);
      else out.emplace_back(std::nullopt);
    }
  }
  return out;
}

// Planning from a mid-edge position continues to the edge's head node first;
// the remaining part of the current edge is charged pro rata.
inline Path plan_from_position(PlannerKind kind, const RoadNetwork& net, const TravelTimeModel& ttm,
                               const Position& pos, Millis depart, NodeId to) {
  if (const auto* node = std::get_if<NodeId>(&pos)) return plan_path(kind, net, ttm, depart, *node, to);
  const auto& ep = std::get<EdgePosition>(pos);
  const Edge& e = net.edge(ep.edge);
  const double remaining = std::clamp(1.0 - ep.offset, 0.0, 1.0);
  const Millis lead_time =
      static_cast<Millis>(std::llround(remaining * static_cast<double>(ttm.traversal_time(e, depart))));
  Path rest = plan_path(kind, net, ttm, depart + lead_time, e.to, to);
  rest.total_length += remaining * e.length;
  rest.total_time += lead_time;
  rest.depart = depart;
  rest.origin = e.to;
  return rest;
}

}  // namespace taxisim
