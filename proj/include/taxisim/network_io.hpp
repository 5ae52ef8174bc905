#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "taxisim/grid_network.hpp"

namespace taxisim {

using nlohmann::json;

// Network file: {"nodes": [...], "edges": [...], "congestion": [...]} with
// times in seconds. Output is canonical: arrays sorted by id, keys sorted.
inline json network_to_json(const RoadNetwork& net, const TravelTimeModel& ttm) {
  json nodes = json::array();
  for (const Node& n : net.nodes()) nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
  json edges = json::array();
  for (const Edge& e : net.edges())
    edges.push_back({{"id", e.id}, {"from", e.from}, {"to", e.to}, {"length", e.length}, {"base_speed", e.base_speed}});
  json congestion = json::array();
  for (const auto& [edge, bins] : ttm.profiles()) {
    json jb = json::array();
    for (const auto& b : bins) {
      json bin = {{"t_start", millis_to_seconds(b.start)}, {"m", b.multiplier}};
      bin["t_end"] = b.end == kForever ? json(nullptr) : json(millis_to_seconds(b.end));
      jb.push_back(bin);
    }
    congestion.push_back({{"edge", edge}, {"bins", jb}});
  }
  return {{"nodes", nodes}, {"edges", edges}, {"congestion", congestion}};
}

inline std::string canonical_network(const RoadNetwork& net, const TravelTimeModel& ttm) {
  return network_to_json(net, ttm).dump();
}

inline GridNetwork network_from_json(const json& doc) {
  try {
    std::vector<Node> nodes;
    for (const auto& n : doc.at("nodes")) nodes.push_back({n.at("id"), n.at("x"), n.at("y")});
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges"))
      edges.push_back({e.at("id"), e.at("from"), e.at("to"), e.at("length"), e.at("base_speed")});
    GridNetwork out{RoadNetwork(std::move(nodes), std::move(edges)), {}};
    if (doc.contains("congestion")) {
      for (const auto& c : doc.at("congestion")) {
        const EdgeId edge = c.at("edge");
        if (!out.network.has_edge(edge)) throw InvalidConfig("congestion on unknown edge");
        std::vector<CongestionBin> bins;
        for (const auto& b : c.at("bins")) {
          const auto& end = b.at("t_end");
          bins.push_back({seconds_to_millis(b.at("t_start").get<double>()),
                          end.is_null() ? kForever : seconds_to_millis(end.get<double>()),
                          b.at("m").get<double>()});
        }
        out.travel_times.set_profile(edge, std::move(bins));
      }
    }
    return out;
  } catch (const json::exception& ex) {
    throw InvalidConfig(std::string("network document: ") + ex.what());
  }
}

inline GridNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& ex) {
    throw InvalidConfig(path + ": " + ex.what());
  }
  return network_from_json(doc);
}

inline void save_network(const std::string& path, const RoadNetwork& net, const TravelTimeModel& ttm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOFailure("cannot write " + path);
  out << network_to_json(net, ttm).dump(1) << '\n';
  if (!out) throw IOFailure("write failed for " + path);
}

}  // namespace taxisim
