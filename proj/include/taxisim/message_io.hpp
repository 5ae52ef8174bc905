#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxisim/agents.hpp"

namespace taxisim {

using nlohmann::json;

inline json position_to_json(const Position& pos) {
  if (const auto* n = std::get_if<NodeId>(&pos)) return {{"node", *n}};
  const auto& ep = std::get<EdgePosition>(pos);
  return {{"edge", ep.edge}, {"offset", ep.offset}};
}

inline Position position_from_json(const json& j) {
  if (j.contains("node")) return j.at("node").get<NodeId>();
  return EdgePosition{j.at("edge").get<EdgeId>(), j.at("offset").get<double>()};
}

// Times are written in seconds with millisecond resolution.
inline json seconds_json(Millis ms) { return millis_to_seconds(ms); }
inline Millis seconds_from_json(const json& j) { return seconds_to_millis(j.get<double>()); }

inline json message_to_json(const Message& m) {
  json j{{"type", std::string(m.type_name())},
         {"sender", to_string(m.sender)},
         {"recipient", to_string(m.recipient)},
         {"send_time", seconds_json(m.send_time)}};
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, BookingRequest>) {
          j["passenger"] = body.passenger;
          j["origin"] = body.origin;
          j["destination"] = body.destination;
        } else if constexpr (std::is_same_v<T, DispatchOffer>) {
          j["taxi"] = body.taxi;
          j["passenger"] = body.passenger;
          j["estimated_pickup_time"] = seconds_json(body.estimated_pickup_time);
        } else if constexpr (std::is_same_v<T, AcceptJob>) {
          j["taxi"] = body.taxi;
          j["passenger"] = body.passenger;
        } else if constexpr (std::is_same_v<T, RejectJob>) {
          j["taxi"] = body.taxi;
          j["passenger"] = body.passenger;
          j["reason"] = body.reason;
        } else if constexpr (std::is_same_v<T, PickupNotice> || std::is_same_v<T, DropoffNotice>) {
          j["taxi"] = body.taxi;
          j["passenger"] = body.passenger;
          j["time"] = seconds_json(body.time);
        } else {
          j["taxi"] = body.taxi;
          j["position"] = position_to_json(body.position);
          j["time"] = seconds_json(body.time);
        }
      },
      m.body);
  return j;
}

inline Message message_from_json(const json& j) {
  try {
    Message m;
    m.sender = parse_agent_ref(j.at("sender").get<std::string>());
    m.recipient = parse_agent_ref(j.at("recipient").get<std::string>());
    m.send_time = seconds_from_json(j.at("send_time"));
    const auto type = j.at("type").get<std::string>();
    if (type == "BookingRequest")
      m.body = BookingRequest{j.at("passenger"), j.at("origin"), j.at("destination")};
    else if (type == "DispatchOffer")
      m.body = DispatchOffer{j.at("taxi"), j.at("passenger"), seconds_from_json(j.at("estimated_pickup_time"))};
    else if (type == "AcceptJob")
      m.body = AcceptJob{j.at("taxi"), j.at("passenger")};
    else if (type == "RejectJob")
      m.body = RejectJob{j.at("taxi"), j.at("passenger"), j.at("reason")};
    else if (type == "PickupNotice")
      m.body = PickupNotice{j.at("taxi"), j.at("passenger"), seconds_from_json(j.at("time"))};
    else if (type == "DropoffNotice")
      m.body = DropoffNotice{j.at("taxi"), j.at("passenger"), seconds_from_json(j.at("time"))};
    else if (type == "AvailabilityNotice")
      m.body = AvailabilityNotice{j.at("taxi"), position_from_json(j.at("position")), seconds_from_json(j.at("time"))};
    else
      throw InvalidConfig("unknown message type " + type);
    return m;
  } catch (const json::exception& ex) {
    throw InvalidConfig(std::string("message: ") + ex.what());
  }
}

inline void write_trace(std::ostream& out, const std::vector<Message>& trace) {
  for (const auto& m : trace) out << message_to_json(m).dump() << '\n';
}

inline std::vector<Message> read_trace(std::istream& in) {
  std::vector<Message> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(message_from_json(json::parse(line)));
  return out;
}

}  // namespace taxisim
