#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "taxisim/errors.hpp"
#include "taxisim/sim_time.hpp"

namespace taxisim {

using NodeId = std::int32_t;
using EdgeId = std::int32_t;

struct Node {
  NodeId id = 0;
  double x = 0.0;  // meters
  double y = 0.0;  // meters

  friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
  EdgeId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double length = 0.0;      // meters
  double base_speed = 0.0;  // meters / second

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct BoundingBox {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
};

// Directed road graph. Nodes and edges are kept sorted by id; ids need not be
// dense. Out-edges of a node are ordered by (head node id, edge id).
class RoadNetwork {
 public:
  RoadNetwork() = default;

  RoadNetwork(std::vector<Node> nodes, std::vector<Edge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!node_index_.emplace(nodes_[i].id, i).second)
        throw InvalidConfig("duplicate node id " + std::to_string(nodes_[i].id));
    }
    out_.assign(nodes_.size(), {});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      if (!edge_index_.emplace(e.id, i).second)
        throw InvalidConfig("duplicate edge id " + std::to_string(e.id));
      if (!node_index_.contains(e.from) || !node_index_.contains(e.to))
        throw InvalidConfig("edge " + std::to_string(e.id) + " references a missing node");
      if (!(e.length > 0.0) || !std::isfinite(e.length))
        throw InvalidConfig("edge " + std::to_string(e.id) + " has non-positive length");
      if (!(e.base_speed > 0.0) || !std::isfinite(e.base_speed))
        throw InvalidConfig("edge " + std::to_string(e.id) + " has non-positive speed");
      out_[node_index_.at(e.from)].push_back(e.id);
    }
    for (auto& list : out_) {
      std::sort(list.begin(), list.end(), [this](EdgeId a, EdgeId b) {
        const Edge& ea = edge(a);
        const Edge& eb = edge(b);
        return ea.to != eb.to ? ea.to < eb.to : ea.id < eb.id;
      });
    }
  }

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Edge> edges() const { return edges_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  bool has_node(NodeId id) const { return node_index_.contains(id); }
  bool has_edge(EdgeId id) const { return edge_index_.contains(id); }

  // Dense position of a node in nodes(); throws UnknownNode.
  std::size_t index_of(NodeId id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) throw UnknownNode("node " + std::to_string(id));
    return it->second;
  }

  const Node& node(NodeId id) const { return nodes_[index_of(id)]; }

  const Edge& edge(EdgeId id) const {
    auto it = edge_index_.find(id);
    if (it == edge_index_.end()) throw InvalidConfig("unknown edge " + std::to_string(id));
    return edges_[it->second];
  }

  std::span<const EdgeId> out_edges(NodeId id) const { return out_[index_of(id)]; }

  BoundingBox bounds() const {
    if (nodes_.empty()) return {};
    BoundingBox box{nodes_[0].x, nodes_[0].x, nodes_[0].y, nodes_[0].y};
    for (const Node& n : nodes_) {
      box.x_min = std::min(box.x_min, n.x);
      box.x_max = std::max(box.x_max, n.x);
      box.y_min = std::min(box.y_min, n.y);
      box.y_max = std::max(box.y_max, n.y);
    }
    return box;
  }

  friend bool operator==(const RoadNetwork& a, const RoadNetwork& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<EdgeId, std::size_t> edge_index_;
  std::vector<std::vector<EdgeId>> out_;
};

struct CongestionBin {
  Millis start = 0;  // inclusive
  Millis end = 0;    // exclusive
  double multiplier = 1.0;

  friend bool operator==(const CongestionBin&, const CongestionBin&) = default;
};

// Piecewise-constant congestion multipliers per edge. An edge's traversal
// time is fixed by the multiplier in force when the vehicle enters it.
class TravelTimeModel {
 public:
  TravelTimeModel() = default;

  void set_profile(EdgeId edge, std::vector<CongestionBin> bins) {
    std::sort(bins.begin(), bins.end(),
              [](const CongestionBin& a, const CongestionBin& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (!(bins[i].multiplier >= 1.0) || !std::isfinite(bins[i].multiplier))
        throw InvalidConfig("congestion multiplier must be finite and >= 1 on edge " +
                            std::to_string(edge));
      if (bins[i].end <= bins[i].start)
        throw InvalidConfig("empty congestion bin on edge " + std::to_string(edge));
      if (i > 0 && bins[i].start < bins[i - 1].end)
        throw InvalidConfig("overlapping congestion bins on edge " + std::to_string(edge));
    }
    if (bins.empty())
      profiles_.erase(edge);
    else
      profiles_[edge] = std::move(bins);
  }

  double multiplier(EdgeId edge, Millis t) const {
    auto it = profiles_.find(edge);
    if (it == profiles_.end()) return 1.0;
    const auto& bins = it->second;
    auto bin = std::upper_bound(bins.begin(), bins.end(), t,
                                [](Millis value, const CongestionBin& b) { return value < b.start; });
    if (bin == bins.begin()) return 1.0;
    --bin;
    return t < bin->end ? bin->multiplier : 1.0;
  }

  // Free-flow time scaled by the multiplier at entry, rounded to whole ms,
  // never below 1 ms.
  Millis traversal_time(const Edge& e, Millis entry) const {
    const double ms = e.length / e.base_speed * multiplier(e.id, entry) * 1000.0;
    return std::max<Millis>(1, static_cast<Millis>(std::llround(ms)));
  }

  bool empty() const { return profiles_.empty(); }
  const std::map<EdgeId, std::vector<CongestionBin>>& profiles() const { return profiles_; }

  // True when every profile is non-decreasing in time (including the implicit
  // multiplier 1 outside bins). Under this condition frozen-at-entry travel is
  // FIFO and label-setting least-time search is exact.
  bool is_fifo() const {
    for (const auto& [edge, bins] : profiles_) {
      double previous = 1.0;
      Millis previous_end = std::numeric_limits<Millis>::min();
      for (const auto& b : bins) {
        if (previous_end != std::numeric_limits<Millis>::min() && b.start != previous_end &&
            previous > 1.0)
          return false;
        if (b.multiplier < previous) return false;
        previous = b.multiplier;
        previous_end = b.end;
      }
      if (previous > 1.0 && previous_end != std::numeric_limits<Millis>::max()) return false;
    }
    return true;
  }

  friend bool operator==(const TravelTimeModel&, const TravelTimeModel&) = default;

 private:
  std::map<EdgeId, std::vector<CongestionBin>> profiles_;
};

inline constexpr Millis kForever = std::numeric_limits<Millis>::max();

struct Path {
  NodeId origin = 0;
  NodeId destination = 0;
  std::vector<EdgeId> edges;
  double total_length = 0.0;  // meters
  Millis depart = 0;
  Millis total_time = 0;      // frozen-at-entry travel time from depart

  Millis arrival() const { return depart + total_time; }

  friend bool operator==(const Path&, const Path&) = default;
};

// Node-id sequence visited by a path, origin first.
inline std::vector<NodeId> path_nodes(const RoadNetwork& net, const Path& path) {
  std::vector<NodeId> seq{path.origin};
  for (EdgeId id : path.edges) seq.push_back(net.edge(id).to);
  return seq;
}

// Builds a Path for an explicit edge sequence, computing both totals.
inline Path evaluate_path(const RoadNetwork& net, const TravelTimeModel& ttm, NodeId origin,
                          std::vector<EdgeId> edges, Millis depart) {
  Path path{origin, origin, std::move(edges), 0.0, depart, 0};
  NodeId at = origin;
  Millis clock = depart;
  for (EdgeId id : path.edges) {
    const Edge& e = net.edge(id);
    if (e.from != at) throw InvalidConfig("path edges are not contiguous");
    path.total_length += e.length;
    clock += ttm.traversal_time(e, clock);
    at = e.to;
  }
  path.destination = at;
  path.total_time = clock - depart;
  return path;
}

// A vehicle either waits at a node or is part-way along an edge.
struct EdgePosition {
  EdgeId edge = 0;
  double offset = 0.0;  // fraction of the edge already covered, in [0, 1]

  friend bool operator==(const EdgePosition&, const EdgePosition&) = default;
};

using Position = std::variant<NodeId, EdgePosition>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point locate(const RoadNetwork& net, const Position& pos) {
  if (const auto* node = std::get_if<NodeId>(&pos)) {
    const Node& n = net.node(*node);
    return {n.x, n.y};
  }
  const auto& ep = std::get<EdgePosition>(pos);
  const Edge& e = net.edge(ep.edge);
  const Node& a = net.node(e.from);
  const Node& b = net.node(e.to);
  return {a.x + (b.x - a.x) * ep.offset, a.y + (b.y - a.y) * ep.offset};
}

}  // namespace taxisim
