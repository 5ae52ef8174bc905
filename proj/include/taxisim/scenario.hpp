#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxisim/agents.hpp"
#include "taxisim/hash.hpp"
#include "taxisim/network_io.hpp"

namespace taxisim {

using nlohmann::json;

enum class PolicyKind { FcfsNearest, ConcurrentOptimal };

inline std::string_view to_string(PolicyKind p) {
  return p == PolicyKind::FcfsNearest ? "fcfs_nearest" : "concurrent_optimal";
}

inline PolicyKind parse_policy_kind(std::string_view s) {
  if (s == "fcfs_nearest") return PolicyKind::FcfsNearest;
  if (s == "concurrent_optimal") return PolicyKind::ConcurrentOptimal;
  throw InvalidConfig("unknown policy '" + std::string(s) + "'");
}

enum class BatchScope { Global, PerArea };

struct GridConfig {
  int rows = 8;
  int cols = 8;
  double spacing = 200.0;
  SpeedProfile speed;
  CongestionSpec congestion;
};

struct NetworkConfig {
  std::optional<GridConfig> grid = GridConfig{};
  std::optional<std::string> file;  // network JSON, replaces the grid
};

struct HotSpot {
  NodeId node = 0;
  double weight = 1.0;
};

// Uniform over nodes, plus extra weight on hot-spot nodes. Origins and
// destinations are drawn independently, destination redrawn until distinct.
struct OdDistribution {
  std::vector<HotSpot> hotspots;
};

// A role played by a human instead of its automated policy.
struct RoleBinding {
  enum class Role { Dispatcher, Taxi };
  Role role = Role::Dispatcher;
  TaxiId taxi = 0;

  friend auto operator<=>(const RoleBinding&, const RoleBinding&) = default;
};

struct ScenarioConfig {
  NetworkConfig network;
  int fleet_size = 11;
  PlannerKind planner = PlannerKind::LeastTime;
  PolicyKind policy = PolicyKind::ConcurrentOptimal;
  double batching_window = 10.0;  // seconds
  BatchScope batching_scope = BatchScope::Global;
  double demand_rate = 120.0;     // requests per hour
  OdDistribution od_distribution;
  double sim_duration = 14400.0;  // seconds
  std::optional<double> warmup;   // seconds; 10% of sim_duration when absent
  std::uint64_t seed = 1;
  int areas = 1;
  std::size_t saturation_cap = 200;
  std::vector<RoleBinding> bindings;

  Millis duration_ms() const { return seconds_to_millis(sim_duration); }
  Millis warmup_ms() const { return seconds_to_millis(warmup.value_or(0.1 * sim_duration)); }
  Millis window_ms() const { return seconds_to_millis(batching_window); }

  void validate() const {
    if (fleet_size < 1) throw InvalidConfig("fleet_size must be >= 1");
    if (!(demand_rate > 0.0)) throw InvalidConfig("demand_rate must be > 0");
    if (!(sim_duration > 0.0)) throw InvalidConfig("sim_duration must be > 0");
    const double w = warmup.value_or(0.1 * sim_duration);
    if (w < 0.0 || !(sim_duration > w)) throw InvalidConfig("need sim_duration > warmup >= 0");
    if (!(batching_window > 0.0)) throw InvalidConfig("batching_window must be > 0");
    if (areas < 1) throw InvalidConfig("areas must be >= 1");
    if (!network.grid && !network.file) throw InvalidConfig("network needs a grid or a file");
    for (const auto& h : od_distribution.hotspots)
      if (!(h.weight >= 0.0)) throw InvalidConfig("hot-spot weight must be >= 0");
    for (const auto& b : bindings)
      if (b.role == RoleBinding::Role::Taxi && (b.taxi < 0 || b.taxi >= fleet_size))
        throw UnknownAgent("taxi " + std::to_string(b.taxi) + " is not in the fleet");
  }
};

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw InvalidConfig(std::string(where) + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.contains(key)) throw InvalidConfig("unknown key '" + key + "' in " + where);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline json config_to_json(const ScenarioConfig& c) {
  json net = json::object();
  if (c.network.file) {
    net["file"] = *c.network.file;
  } else if (c.network.grid) {
    const auto& g = *c.network.grid;
    json congestion{{"fraction", g.congestion.fraction},
                    {"min_multiplier", g.congestion.min_multiplier},
                    {"max_multiplier", g.congestion.max_multiplier},
                    {"start", millis_to_seconds(g.congestion.start)}};
    congestion["end"] = g.congestion.end == kForever ? json(nullptr) : json(millis_to_seconds(g.congestion.end));
    net["grid"] = {{"rows", g.rows},
                   {"cols", g.cols},
                   {"spacing", g.spacing},
                   {"speed", {{"base_speed", g.speed.base_speed}, {"jitter", g.speed.jitter}}},
                   {"congestion", congestion}};
  }
  json hotspots = json::array();
  for (const auto& h : c.od_distribution.hotspots) hotspots.push_back({{"node", h.node}, {"weight", h.weight}});
  json bindings = json::array();
  for (const auto& b : c.bindings) {
    if (b.role == RoleBinding::Role::Dispatcher)
      bindings.push_back({{"role", "dispatcher"}});
    else
      bindings.push_back({{"role", "taxi"}, {"id", b.taxi}});
  }
  json j{{"network", net},
         {"fleet_size", c.fleet_size},
         {"planner", std::string(to_string(c.planner))},
         {"policy", std::string(to_string(c.policy))},
         {"batching_window", c.batching_window},
         {"batching_scope", c.batching_scope == BatchScope::Global ? "global" : "per_area"},
         {"demand_rate", c.demand_rate},
         {"od_distribution", {{"hotspots", hotspots}}},
         {"sim_duration", c.sim_duration},
         {"seed", c.seed},
         {"areas", c.areas},
         {"saturation_cap", c.saturation_cap},
         {"bindings", bindings}};
  j["warmup"] = c.warmup ? json(*c.warmup) : json(nullptr);
  return j;
}

inline ScenarioConfig config_from_json(const json& j) {
  using detail::read_opt;
  using detail::reject_unknown_keys;
  try {
    reject_unknown_keys(j,
                        {"network", "fleet_size", "planner", "policy", "batching_window", "batching_scope",
                         "demand_rate", "od_distribution", "sim_duration", "warmup", "seed", "areas",
                         "saturation_cap", "bindings"},
                        "scenario");
    ScenarioConfig c;
    if (j.contains("network")) {
      const auto& n = j.at("network");
      reject_unknown_keys(n, {"grid", "file"}, "network");
      if (n.contains("file") && !n.at("file").is_null()) {
        c.network.file = n.at("file").get<std::string>();
        c.network.grid.reset();
      }
      if (n.contains("grid") && !n.at("grid").is_null()) {
        if (c.network.file) throw InvalidConfig("network has both grid and file");
        const auto& g = n.at("grid");
        reject_unknown_keys(g, {"rows", "cols", "spacing", "speed", "congestion"}, "network.grid");
        GridConfig grid;
        read_opt(g, "rows", grid.rows);
        read_opt(g, "cols", grid.cols);
        read_opt(g, "spacing", grid.spacing);
        if (g.contains("speed")) {
          const auto& s = g.at("speed");
          reject_unknown_keys(s, {"base_speed", "jitter"}, "network.grid.speed");
          read_opt(s, "base_speed", grid.speed.base_speed);
          read_opt(s, "jitter", grid.speed.jitter);
        }
        if (g.contains("congestion")) {
          const auto& s = g.at("congestion");
          reject_unknown_keys(s, {"fraction", "min_multiplier", "max_multiplier", "start", "end"},
                              "network.grid.congestion");
          read_opt(s, "fraction", grid.congestion.fraction);
          read_opt(s, "min_multiplier", grid.congestion.min_multiplier);
          read_opt(s, "max_multiplier", grid.congestion.max_multiplier);
          if (s.contains("start")) grid.congestion.start = seconds_to_millis(s.at("start").get<double>());
          if (s.contains("end") && !s.at("end").is_null())
            grid.congestion.end = seconds_to_millis(s.at("end").get<double>());
        }
        c.network.grid = grid;
      }
    }
    read_opt(j, "fleet_size", c.fleet_size);
    if (j.contains("planner")) c.planner = parse_planner_kind(j.at("planner").get<std::string>());
    if (j.contains("policy")) c.policy = parse_policy_kind(j.at("policy").get<std::string>());
    read_opt(j, "batching_window", c.batching_window);
    if (j.contains("batching_scope")) {
      const auto scope = j.at("batching_scope").get<std::string>();
      if (scope == "global") c.batching_scope = BatchScope::Global;
      else if (scope == "per_area") c.batching_scope = BatchScope::PerArea;
      else throw InvalidConfig("unknown batching_scope '" + scope + "'");
    }
    read_opt(j, "demand_rate", c.demand_rate);
    if (j.contains("od_distribution")) {
      const auto& od = j.at("od_distribution");
      reject_unknown_keys(od, {"hotspots"}, "od_distribution");
      if (od.contains("hotspots")) {
        for (const auto& h : od.at("hotspots")) {
          reject_unknown_keys(h, {"node", "weight"}, "od_distribution.hotspots[]");
          c.od_distribution.hotspots.push_back({h.at("node").get<NodeId>(), h.at("weight").get<double>()});
        }
      }
    }
    read_opt(j, "sim_duration", c.sim_duration);
    if (j.contains("warmup") && !j.at("warmup").is_null()) c.warmup = j.at("warmup").get<double>();
    read_opt(j, "seed", c.seed);
    read_opt(j, "areas", c.areas);
    read_opt(j, "saturation_cap", c.saturation_cap);
    if (j.contains("bindings")) {
      for (const auto& b : j.at("bindings")) {
        reject_unknown_keys(b, {"role", "id"}, "bindings[]");
        const auto role = b.at("role").get<std::string>();
        if (role == "dispatcher")
          c.bindings.push_back({RoleBinding::Role::Dispatcher, 0});
        else if (role == "taxi")
          c.bindings.push_back({RoleBinding::Role::Taxi, b.at("id").get<TaxiId>()});
        else
          throw InvalidConfig("unknown role '" + role + "'");
      }
    }
    c.validate();
    return c;
  } catch (const json::exception& ex) {
    throw InvalidConfig(std::string("scenario: ") + ex.what());
  }
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& ex) {
    throw InvalidConfig(path + ": " + ex.what());
  }
  return config_from_json(doc);
}

// Digest of everything but the seed and the human bindings, so replications
// and participatory variants of one scenario share a hash.
inline std::string config_hash(const ScenarioConfig& c) {
  json j = config_to_json(c);
  j.erase("seed");
  j.erase("bindings");
  return fnv1a_hex(j.dump());
}

inline GridNetwork build_network(const ScenarioConfig& c) {
  if (c.network.file) return load_network(*c.network.file);
  const auto& g = *c.network.grid;
  return generate_grid_network(g.rows, g.cols, g.spacing, g.speed, c.seed, g.congestion);
}

}  // namespace taxisim
