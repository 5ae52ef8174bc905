#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "taxisim/assignment.hpp"
#include "taxisim/path_planning.hpp"

namespace taxisim {

using PassengerId = std::int32_t;
using TaxiId = std::int32_t;
using AreaId = std::int32_t;

// ---------------------------------------------------------------------------
// Addressing and messages

struct AgentRef {
  enum class Kind { ControlCenter, Taxi, Passenger };
  Kind kind = Kind::ControlCenter;
  std::int32_t id = 0;

  static AgentRef control_center() { return {Kind::ControlCenter, 0}; }
  static AgentRef taxi(TaxiId id) { return {Kind::Taxi, id}; }
  static AgentRef passenger(PassengerId id) { return {Kind::Passenger, id}; }

  friend auto operator<=>(const AgentRef&, const AgentRef&) = default;
};

inline std::string to_string(const AgentRef& ref) {
  switch (ref.kind) {
    case AgentRef::Kind::ControlCenter: return "control_center";
    case AgentRef::Kind::Taxi: return "taxi:" + std::to_string(ref.id);
    case AgentRef::Kind::Passenger: return "passenger:" + std::to_string(ref.id);
  }
  return {};
}

inline AgentRef parse_agent_ref(std::string_view s) {
  if (s == "control_center") return AgentRef::control_center();
  auto colon = s.find(':');
  if (colon == std::string_view::npos) throw InvalidConfig("bad agent reference '" + std::string(s) + "'");
  const auto kind = s.substr(0, colon);
  const auto id = static_cast<std::int32_t>(std::stol(std::string(s.substr(colon + 1))));
  if (kind == "taxi") return AgentRef::taxi(id);
  if (kind == "passenger") return AgentRef::passenger(id);
  throw InvalidConfig("bad agent reference '" + std::string(s) + "'");
}

struct BookingRequest {
  PassengerId passenger = 0;
  NodeId origin = 0;
  NodeId destination = 0;
  friend bool operator==(const BookingRequest&, const BookingRequest&) = default;
};

struct DispatchOffer {
  TaxiId taxi = 0;
  PassengerId passenger = 0;
  Millis estimated_pickup_time = 0;  // travel duration
  friend bool operator==(const DispatchOffer&, const DispatchOffer&) = default;
};

struct AcceptJob {
  TaxiId taxi = 0;
  PassengerId passenger = 0;
  friend bool operator==(const AcceptJob&, const AcceptJob&) = default;
};

struct RejectJob {
  TaxiId taxi = 0;
  PassengerId passenger = 0;
  std::string reason;
  friend bool operator==(const RejectJob&, const RejectJob&) = default;
};

struct PickupNotice {
  TaxiId taxi = 0;
  PassengerId passenger = 0;
  Millis time = 0;
  friend bool operator==(const PickupNotice&, const PickupNotice&) = default;
};

struct DropoffNotice {
  TaxiId taxi = 0;
  PassengerId passenger = 0;
  Millis time = 0;
  friend bool operator==(const DropoffNotice&, const DropoffNotice&) = default;
};

struct AvailabilityNotice {
  TaxiId taxi = 0;
  Position position;
  Millis time = 0;
  friend bool operator==(const AvailabilityNotice&, const AvailabilityNotice&) = default;
};

using Payload = std::variant<BookingRequest, DispatchOffer, AcceptJob, RejectJob, PickupNotice, DropoffNotice,
                             AvailabilityNotice>;

inline constexpr std::size_t kMessageKinds = std::variant_size_v<Payload>;

inline constexpr std::string_view kMessageTypeNames[kMessageKinds] = {
    "BookingRequest", "DispatchOffer", "AcceptJob", "RejectJob", "PickupNotice", "DropoffNotice", "AvailabilityNotice"};

struct Message {
  Payload body;
  AgentRef sender;
  AgentRef recipient;
  Millis send_time = 0;

  std::string_view type_name() const { return kMessageTypeNames[body.index()]; }
  friend bool operator==(const Message&, const Message&) = default;
};

// ---------------------------------------------------------------------------
// Operation areas

struct OperationArea {
  AreaId id = 0;
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

  bool contains(Point p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
};

// First area (lowest index) containing the point, so shared boundaries go to
// the lower-indexed area.
inline AreaId assign_area(std::span<const OperationArea> areas, Point p) {
  for (const auto& a : areas)
    if (a.contains(p)) return a.id;
  throw OutOfBounds("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") outside all areas");
}

// Splits the box into `count` cells on a near-square grid, numbered row by
// row from the top (largest y) left corner.
inline std::vector<OperationArea> partition_areas(const BoundingBox& box, int count) {
  if (count < 1) throw InvalidConfig("area count must be >= 1");
  int rows = 1;
  for (int r = 1; r * r <= count; ++r)
    if (count % r == 0) rows = r;
  const int cols = count / rows;
  const double w = (box.x_max - box.x_min) / cols;
  const double h = (box.y_max - box.y_min) / rows;
  std::vector<OperationArea> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      OperationArea a;
      a.id = r * cols + c;
      a.x_min = box.x_min + c * w;
      a.x_max = c + 1 == cols ? box.x_max : box.x_min + (c + 1) * w;
      a.y_max = box.y_max - r * h;
      a.y_min = r + 1 == rows ? box.y_min : box.y_max - (r + 1) * h;
      out.push_back(a);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Passenger

enum class PassengerState { Waiting, Assigned, InTransit, Delivered };

inline std::string_view to_string(PassengerState s) {
  constexpr std::string_view names[] = {"Waiting", "Assigned", "InTransit", "Delivered"};
  return names[static_cast<int>(s)];
}

struct PassengerAgent {
  PassengerId id = 0;
  NodeId origin = 0;
  NodeId destination = 0;
  Millis request_time = 0;
  PassengerState state = PassengerState::Waiting;
  std::optional<TaxiId> assigned_taxi;

  friend bool operator==(const PassengerAgent&, const PassengerAgent&) = default;
};

template <typename Agent>
struct Step {
  Agent state;
  std::vector<Message> out;
};

[[noreturn]] inline void protocol_violation(std::string_view who, std::string_view state, const Message& msg) {
  throw ProtocolViolation(std::string(who) + " in state " + std::string(state) + " cannot handle " +
                          std::string(msg.type_name()) + " from " + to_string(msg.sender));
}

// Creates the passenger and the booking request it sends.
inline Step<PassengerAgent> make_passenger(PassengerId id, NodeId origin, NodeId destination, Millis now) {
  if (origin == destination) throw InvalidConfig("passenger origin equals destination");
  PassengerAgent p{id, origin, destination, now, PassengerState::Waiting, std::nullopt};
  Message booking{BookingRequest{id, origin, destination}, AgentRef::passenger(id), AgentRef::control_center(), now};
  return {p, {booking}};
}

inline Step<PassengerAgent> handle_message(PassengerAgent p, const Message& msg, Millis now) {
  if (msg.recipient != AgentRef::passenger(p.id)) throw ProtocolViolation("message not addressed to passenger");
  if (now < msg.send_time) throw ProtocolViolation("message handled before it was sent");
  const auto who = "passenger " + std::to_string(p.id);
  if (const auto* accept = std::get_if<AcceptJob>(&msg.body);
      accept && p.state == PassengerState::Waiting && accept->passenger == p.id) {
    p.state = PassengerState::Assigned;
    p.assigned_taxi = accept->taxi;
    return {p, {}};
  }
  if (const auto* pick = std::get_if<PickupNotice>(&msg.body);
      pick && p.state == PassengerState::Assigned && p.assigned_taxi == pick->taxi) {
    p.state = PassengerState::InTransit;
    return {p, {}};
  }
  if (const auto* drop = std::get_if<DropoffNotice>(&msg.body);
      drop && p.state == PassengerState::InTransit && p.assigned_taxi == drop->taxi) {
    p.state = PassengerState::Delivered;
    return {p, {}};
  }
  protocol_violation(who, to_string(p.state), msg);
}

// ---------------------------------------------------------------------------
// Taxi

enum class TaxiState { Available, EnRouteToPickup, Occupied };

inline std::string_view to_string(TaxiState s) {
  constexpr std::string_view names[] = {"Available", "EnRouteToPickup", "Occupied"};
  return names[static_cast<int>(s)];
}

struct TaxiJob {
  PassengerId passenger = 0;
  Path path;  // towards pickup while EnRouteToPickup, towards dropoff while Occupied
  friend bool operator==(const TaxiJob&, const TaxiJob&) = default;
};

struct TaxiAgent {
  TaxiId id = 0;
  Position position = NodeId{0};
  TaxiState state = TaxiState::Available;
  std::optional<TaxiJob> current_assignment;
  AreaId area = 0;
  Millis available_since = 0;

  friend bool operator==(const TaxiAgent&, const TaxiAgent&) = default;
};

enum class TaxiDecision { Accept, Reject };

inline std::string_view to_string(TaxiDecision d) { return d == TaxiDecision::Accept ? "accept" : "reject"; }

// Automated driver behaviour at an offer.
using DecisionPolicy = std::function<TaxiDecision(const TaxiAgent&, const DispatchOffer&)>;

inline TaxiDecision always_accept(const TaxiAgent&, const DispatchOffer&) { return TaxiDecision::Accept; }

inline TaxiDecision taxi_accept_decision(const TaxiAgent& taxi, const DispatchOffer& offer,
                                         const DecisionPolicy& policy = always_accept) {
  if (taxi.state != TaxiState::Available)
    throw ProtocolViolation("offer to taxi " + std::to_string(taxi.id) + " in state " +
                            std::string(to_string(taxi.state)));
  return policy ? policy(taxi, offer) : TaxiDecision::Accept;
}

// What a taxi needs from its surroundings to react to an offer.
struct TaxiContext {
  TaxiDecision decision = TaxiDecision::Accept;
  std::string reject_reason = "declined";
  std::function<Path(NodeId from, NodeId to, Millis depart)> plan;
  std::function<NodeId(PassengerId)> pickup_node;
};

inline NodeId node_of(const Position& pos) {
  if (const auto* n = std::get_if<NodeId>(&pos)) return *n;
  throw ProtocolViolation("taxi is between nodes");
}

inline Step<TaxiAgent> handle_message(TaxiAgent taxi, const Message& msg, Millis now, const TaxiContext& ctx) {
  if (msg.recipient != AgentRef::taxi(taxi.id)) throw ProtocolViolation("message not addressed to taxi");
  if (now < msg.send_time) throw ProtocolViolation("message handled before it was sent");
  const auto* offer = std::get_if<DispatchOffer>(&msg.body);
  if (!offer || taxi.state != TaxiState::Available || offer->taxi != taxi.id)
    protocol_violation("taxi " + std::to_string(taxi.id), to_string(taxi.state), msg);

  const AgentRef self = AgentRef::taxi(taxi.id);
  if (ctx.decision == TaxiDecision::Reject)
    return {taxi, {{RejectJob{taxi.id, offer->passenger, ctx.reject_reason}, self, AgentRef::control_center(), now}}};

  const NodeId from = node_of(taxi.position);
  Path path = ctx.plan(from, ctx.pickup_node(offer->passenger), now);
  taxi.state = TaxiState::EnRouteToPickup;
  taxi.current_assignment = TaxiJob{offer->passenger, std::move(path)};
  return {taxi, {{AcceptJob{taxi.id, offer->passenger}, self, AgentRef::control_center(), now}}};
}

inline Step<TaxiAgent> taxi_pickup(TaxiAgent taxi, Millis now, Path to_destination) {
  if (taxi.state != TaxiState::EnRouteToPickup || !taxi.current_assignment)
    throw ProtocolViolation("pickup by taxi " + std::to_string(taxi.id) + " in state " +
                            std::string(to_string(taxi.state)));
  const PassengerId passenger = taxi.current_assignment->passenger;
  taxi.state = TaxiState::Occupied;
  taxi.current_assignment->path = std::move(to_destination);
  return {taxi, {{PickupNotice{taxi.id, passenger, now}, AgentRef::taxi(taxi.id), AgentRef::passenger(passenger), now}}};
}

// Dropoff ends the job: the passenger is notified, then the control center
// learns that the taxi is free again.
inline Step<TaxiAgent> taxi_dropoff(TaxiAgent taxi, Millis now, AreaId area) {
  if (taxi.state != TaxiState::Occupied || !taxi.current_assignment)
    throw ProtocolViolation("dropoff by taxi " + std::to_string(taxi.id) + " in state " +
                            std::string(to_string(taxi.state)));
  const PassengerId passenger = taxi.current_assignment->passenger;
  taxi.state = TaxiState::Available;
  taxi.current_assignment.reset();
  taxi.available_since = now;
  taxi.area = area;
  const AgentRef self = AgentRef::taxi(taxi.id);
  return {taxi,
          {{DropoffNotice{taxi.id, passenger, now}, self, AgentRef::passenger(passenger), now},
           {AvailabilityNotice{taxi.id, taxi.position, now}, self, AgentRef::control_center(), now}}};
}

// ---------------------------------------------------------------------------
// Control center

struct PendingRequest {
  PassengerId passenger = 0;
  NodeId origin = 0;
  NodeId destination = 0;
  Millis request_time = 0;
  bool under_offer = false;
  friend bool operator==(const PendingRequest&, const PendingRequest&) = default;
};

struct QueuedTaxi {
  TaxiId taxi = 0;
  Millis available_since = 0;
  Millis enqueued_at = 0;
  friend bool operator==(const QueuedTaxi&, const QueuedTaxi&) = default;
};

struct PendingOffer {
  TaxiId taxi = 0;
  PassengerId passenger = 0;
  Millis offered_at = 0;
  AreaId area = 0;
  QueuedTaxi queue_entry;
  friend bool operator==(const PendingOffer&, const PendingOffer&) = default;
};

// Candidates of the current dispatch round, kept so that a rejected offer
// can be passed to the next-best taxi.
struct DispatchRound {
  std::vector<PassengerId> requests;  // rows
  std::vector<TaxiId> taxis;          // columns
  CostMatrix<Millis> cost;
  std::map<PassengerId, std::set<TaxiId>> rejected;
  friend bool operator==(const DispatchRound&, const DispatchRound&) = default;
};

struct QueueInterval {
  TaxiId taxi = 0;
  Millis enqueue_time = 0;
  Millis dequeue_time = 0;
};

struct ControlCenterAgent {
  std::deque<PendingRequest> request_queue;
  std::map<AreaId, std::vector<QueuedTaxi>> area_queues;  // each ordered by (available_since, taxi)
  std::vector<PendingOffer> pending_offers;
  std::optional<DispatchRound> round;

  bool is_queued(TaxiId taxi) const {
    for (const auto& [area, queue] : area_queues)
      for (const auto& q : queue)
        if (q.taxi == taxi) return true;
    return false;
  }

  std::optional<AreaId> area_of_queued(TaxiId taxi) const {
    for (const auto& [area, queue] : area_queues)
      for (const auto& q : queue)
        if (q.taxi == taxi) return area;
    return std::nullopt;
  }

  std::vector<TaxiId> queued_taxis() const {
    std::vector<TaxiId> out;
    for (const auto& [area, queue] : area_queues)
      for (const auto& q : queue) out.push_back(q.taxi);
    std::sort(out.begin(), out.end());
    return out;
  }

  const PendingRequest* find_request(PassengerId p) const {
    for (const auto& r : request_queue)
      if (r.passenger == p) return &r;
    return nullptr;
  }

  PendingRequest* find_request(PassengerId p) {
    for (auto& r : request_queue)
      if (r.passenger == p) return &r;
    return nullptr;
  }

  friend bool operator==(const ControlCenterAgent&, const ControlCenterAgent&) = default;
};

struct ControlCenterContext {
  std::function<AreaId(const Position&)> area_of;
  // Queue intervals closed by the control center are reported here.
  std::function<void(const QueueInterval&)> on_dequeue;
};

namespace detail {

inline void enqueue_taxi(ControlCenterAgent& cc, AreaId area, QueuedTaxi entry) {
  auto& queue = cc.area_queues[area];
  auto pos = std::upper_bound(queue.begin(), queue.end(), entry, [](const QueuedTaxi& a, const QueuedTaxi& b) {
    return a.available_since != b.available_since ? a.available_since < b.available_since : a.taxi < b.taxi;
  });
  queue.insert(pos, entry);
}

inline std::optional<std::pair<AreaId, QueuedTaxi>> dequeue_taxi(ControlCenterAgent& cc, TaxiId taxi) {
  for (auto& [area, queue] : cc.area_queues) {
    for (auto it = queue.begin(); it != queue.end(); ++it) {
      if (it->taxi == taxi) {
        auto entry = *it;
        queue.erase(it);
        return std::pair{area, entry};
      }
    }
  }
  return std::nullopt;
}

inline std::optional<Message> offer_to(ControlCenterAgent& cc, TaxiId taxi, PassengerId passenger, Millis pickup_eta,
                                       Millis now, const ControlCenterContext& ctx) {
  auto removed = dequeue_taxi(cc, taxi);
  if (!removed) throw ProtocolViolation("offer to taxi " + std::to_string(taxi) + " that is not queued");
  auto* request = cc.find_request(passenger);
  if (!request || request->under_offer)
    throw ProtocolViolation("offer for passenger " + std::to_string(passenger) + " that is not waiting");
  request->under_offer = true;
  if (ctx.on_dequeue) ctx.on_dequeue({taxi, removed->second.enqueued_at, now});
  cc.pending_offers.push_back({taxi, passenger, now, removed->first, removed->second});
  return Message{DispatchOffer{taxi, passenger, pickup_eta}, AgentRef::control_center(), AgentRef::taxi(taxi), now};
}

}  // namespace detail

// Turns a round's assignment into offers. Offered taxis leave their area
// queues; offered requests are flagged so they are not batched again until
// the offer resolves.
inline Step<ControlCenterAgent> issue_offers(ControlCenterAgent cc, DispatchRound round,
                                             const Assignment<Millis>& assignment, Millis now,
                                             const ControlCenterContext& ctx) {
  std::vector<Message> out;
  for (const auto& pair : assignment.pairs) {
    out.push_back(*detail::offer_to(cc, round.taxis.at(pair.taxi), round.requests.at(pair.request), pair.cost, now, ctx));
  }
  cc.round = std::move(round);
  return {std::move(cc), std::move(out)};
}

inline Step<ControlCenterAgent> handle_message(ControlCenterAgent cc, const Message& msg, Millis now,
                                               const ControlCenterContext& ctx) {
  if (msg.recipient != AgentRef::control_center()) throw ProtocolViolation("message not addressed to control center");
  if (now < msg.send_time) throw ProtocolViolation("message handled before it was sent");

  if (const auto* booking = std::get_if<BookingRequest>(&msg.body)) {
    if (cc.find_request(booking->passenger)) protocol_violation("control center", "queued", msg);
    cc.request_queue.push_back({booking->passenger, booking->origin, booking->destination, msg.send_time, false});
    return {std::move(cc), {}};
  }

  if (const auto* avail = std::get_if<AvailabilityNotice>(&msg.body)) {
    if (cc.is_queued(avail->taxi)) protocol_violation("control center", "taxi already queued", msg);
    detail::enqueue_taxi(cc, ctx.area_of(avail->position), {avail->taxi, avail->time, now});
    return {std::move(cc), {}};
  }

  auto take_offer = [&](TaxiId taxi, PassengerId passenger) -> PendingOffer {
    auto it = std::find_if(cc.pending_offers.begin(), cc.pending_offers.end(),
                           [&](const PendingOffer& o) { return o.taxi == taxi && o.passenger == passenger; });
    if (it == cc.pending_offers.end()) protocol_violation("control center", "no pending offer", msg);
    PendingOffer offer = *it;
    cc.pending_offers.erase(it);
    return offer;
  };

  if (const auto* accept = std::get_if<AcceptJob>(&msg.body)) {
    if (msg.sender != AgentRef::taxi(accept->taxi)) protocol_violation("control center", "foreign accept", msg);
    take_offer(accept->taxi, accept->passenger);
    std::erase_if(cc.request_queue, [&](const PendingRequest& r) { return r.passenger == accept->passenger; });
    return {std::move(cc),
            {{*accept, AgentRef::control_center(), AgentRef::passenger(accept->passenger), now}}};
  }

  if (const auto* reject = std::get_if<RejectJob>(&msg.body)) {
    if (msg.sender != AgentRef::taxi(reject->taxi)) protocol_violation("control center", "foreign reject", msg);
    const PendingOffer offer = take_offer(reject->taxi, reject->passenger);
    detail::enqueue_taxi(cc, offer.area, {offer.taxi, offer.queue_entry.available_since, now});
    auto* request = cc.find_request(reject->passenger);
    if (!request) protocol_violation("control center", "rejected request missing", msg);
    request->under_offer = false;

    std::vector<Message> out;
    if (cc.round) {
      auto& round = *cc.round;
      round.rejected[reject->passenger].insert(reject->taxi);
      const auto row = std::find(round.requests.begin(), round.requests.end(), reject->passenger);
      if (row != round.requests.end()) {
        const std::size_t r = static_cast<std::size_t>(row - round.requests.begin());
        std::optional<std::size_t> best;
        for (std::size_t c = 0; c < round.taxis.size(); ++c) {
          const TaxiId t = round.taxis[c];
          if (!round.cost.feasible(r, c) || !cc.is_queued(t) || round.rejected[reject->passenger].contains(t)) continue;
          if (!best || *round.cost(r, c) < *round.cost(r, *best)) best = c;
        }
        if (best)
          out.push_back(*detail::offer_to(cc, round.taxis[*best], reject->passenger, *round.cost(r, *best), now, ctx));
      }
    }
    return {std::move(cc), std::move(out)};
  }

  protocol_violation("control center", "ready", msg);
}

}  // namespace taxisim
