#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "taxisim/demand.hpp"
#include "taxisim/hash.hpp"
#include "taxisim/message_io.hpp"
#include "taxisim/metrics.hpp"
#include "taxisim/scenario.hpp"

namespace taxisim {

enum class EventKind { RequestArrival, TaxiReachesNode, PickupCompleted, DropoffCompleted, BatchDispatchTick, DecisionPoint };

inline std::string_view to_string(EventKind k) {
  constexpr std::string_view names[] = {"RequestArrival",   "TaxiReachesNode",   "PickupCompleted",
                                        "DropoffCompleted", "BatchDispatchTick", "DecisionPoint"};
  return names[static_cast<int>(k)];
}

struct Event {
  Millis time = 0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::RequestArrival;
  std::int32_t subject = 0;  // passenger id for arrivals, taxi id for movement

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    return a.time != b.time ? a.time > b.time : a.sequence > b.sequence;
  }
};

// Both policies evaluated on one dispatch batch.
struct BatchAudit {
  Millis time = 0;
  std::size_t requests = 0;
  std::size_t taxis = 0;
  std::size_t fcfs_size = 0;
  Millis fcfs_cost = 0;
  std::size_t optimal_size = 0;
  Millis optimal_cost = 0;
};

struct BatchTaxi {
  TaxiId taxi = 0;
  NodeId node = 0;
  AreaId area = 0;
  friend bool operator==(const BatchTaxi&, const BatchTaxi&) = default;
};

struct DispatcherContext {
  std::vector<PendingRequest> requests;  // rows, FCFS order
  std::vector<BatchTaxi> taxis;          // columns, by taxi id
  CostMatrix<Millis> cost;
  Assignment<Millis> proposal;
};

struct TaxiOfferContext {
  TaxiId taxi = 0;
  NodeId taxi_node = 0;
  DispatchOffer offer;
  NodeId pickup_node = 0;
  TaxiDecision proposal = TaxiDecision::Accept;
};

struct DecisionPoint {
  std::uint64_t id = 0;  // 0-based position in the run's decision sequence
  Millis time = 0;
  std::variant<DispatcherContext, TaxiOfferContext> context;
  std::string context_hash;

  bool is_dispatcher() const { return std::holds_alternative<DispatcherContext>(context); }
  std::string role() const {
    return is_dispatcher() ? "dispatcher" : "taxi:" + std::to_string(std::get<TaxiOfferContext>(context).taxi);
  }
};

using DecisionAction = std::variant<Assignment<Millis>, TaxiDecision>;

inline std::string compute_context_hash(const DecisionPoint& d) {
  Fnv1a h;
  h.i64(d.time).u64(d.id);
  if (const auto* ctx = std::get_if<DispatcherContext>(&d.context)) {
    h.bytes("dispatcher");
    for (const auto& r : ctx->requests) h.i64(r.passenger).i64(r.origin).i64(r.destination).i64(r.request_time);
    h.bytes("|");
    for (const auto& t : ctx->taxis) h.i64(t.taxi).i64(t.node).i64(t.area);
    h.bytes("|");
    for (std::size_t r = 0; r < ctx->cost.rows(); ++r)
      for (std::size_t c = 0; c < ctx->cost.cols(); ++c) h.i64(ctx->cost(r, c).value_or(-1));
  } else {
    const auto& t = std::get<TaxiOfferContext>(d.context);
    h.bytes("taxi").i64(t.taxi).i64(t.taxi_node).i64(t.offer.passenger).i64(t.offer.estimated_pickup_time).i64(t.pickup_node);
  }
  return h.hex();
}

struct EngineOptions {
  bool record_batches = false;
};

struct RunOutputs {
  RunLabel label;
  MetricsReport report;
  std::vector<TripRecord> trips;
  std::vector<TaxiRecord> taxis;
  std::vector<Message> trace;
  std::vector<BatchAudit> batches;

  std::string summary_csv() const { return taxisim::summary_csv({{label, report}}); }
  std::string trace_jsonl() const {
    std::ostringstream out;
    write_trace(out, trace);
    return out.str();
  }
};

// One simulation instance. Single-threaded: all agent mutation happens in
// step(). Decisions bound to humans pause the loop until resolve().
class Simulation {
 public:
  explicit Simulation(ScenarioConfig config, EngineOptions options = {})
      : config_(std::move(config)), options_(options) {
    config_.validate();
    auto grid = build_network(config_);
    net_ = std::move(grid.network);
    ttm_ = std::move(grid.travel_times);
    for (const auto& b : config_.bindings) {
      if (b.role == RoleBinding::Role::Dispatcher) dispatcher_bound_ = true;
      else taxi_bound_.insert(b.taxi);
    }
    areas_ = partition_areas(net_.bounds(), config_.areas);
    horizon_ = config_.duration_ms();
    window_ = config_.window_ms();

    demand_ = generate_demand(config_, net_);
    for (const auto& d : demand_) schedule(d.time, EventKind::RequestArrival, d.passenger);
    if (window_ < horizon_) schedule(window_, EventKind::BatchDispatchTick, 0);

    Rng placement(config_.seed, 2);
    taxi_records_.resize(static_cast<std::size_t>(config_.fleet_size));
    motion_.resize(static_cast<std::size_t>(config_.fleet_size));
    for (TaxiId id = 0; id < config_.fleet_size; ++id) {
      const NodeId node = net_.nodes()[placement.below(net_.node_count())].id;
      TaxiAgent taxi{id, node, TaxiState::Available, std::nullopt, area_of(node), 0};
      taxis_.push_back(taxi);
      taxi_records_[static_cast<std::size_t>(id)].taxi = id;
      open_idle_[id] = 0;
      send({AvailabilityNotice{id, node, 0}, AgentRef::taxi(id), AgentRef::control_center(), 0});
    }
  }

  const ScenarioConfig& config() const { return config_; }
  const RoadNetwork& network() const { return net_; }
  const TravelTimeModel& travel_times() const { return ttm_; }
  const std::vector<OperationArea>& areas() const { return areas_; }
  Millis clock() const { return clock_; }
  bool finished() const { return finished_; }
  const DecisionPoint* pending_decision() const { return pending_ ? &*pending_ : nullptr; }
  std::uint64_t decisions_issued() const { return decisions_issued_; }

  const std::map<PassengerId, PassengerAgent>& passengers() const { return passengers_; }
  const std::vector<TaxiAgent>& taxis() const { return taxis_; }
  const ControlCenterAgent& control_center() const { return cc_; }
  const std::vector<Message>& trace() const { return trace_; }
  const std::vector<BatchAudit>& batch_audits() const { return audits_; }
  std::size_t requests_generated() const { return passengers_.size(); }

  // Called after every processed event.
  void set_event_observer(std::function<void(const Event&)> observer) { observer_ = std::move(observer); }

  // Delivers one queued message or processes one event. Returns false when
  // paused on a decision or finished.
  bool step() {
    if (pending_ || finished_) return false;
    if (!mailbox_.empty()) {
      deliver_front();
      return !pending_;
    }
    if (events_.empty() || events_.top().time >= horizon_) {
      finished_ = true;
      return false;
    }
    const Event ev = events_.top();
    events_.pop();
    if (ev.time < clock_) throw ProtocolViolation("event scheduled in the past");
    clock_ = ev.time;
    process(ev);
    if (observer_) observer_(ev);
    return !pending_;
  }

  void advance() {
    while (step()) {
    }
  }

  // Applies the final action for the pending decision.
  void resolve(const DecisionAction& action) {
    if (!pending_) throw StaleDecision("no decision is pending");
    if (pending_->is_dispatcher()) {
      const auto* assignment = std::get_if<Assignment<Millis>>(&action);
      if (!assignment) throw MalformedAction("dispatcher decision needs an assignment");
      auto ctx = std::get<DispatcherContext>(pending_->context);
      auto normalized = normalize_assignment(ctx.cost, *assignment);
      pending_.reset();
      apply_dispatch(ctx, normalized);
    } else {
      const auto* decision = std::get_if<TaxiDecision>(&action);
      if (!decision) throw MalformedAction("taxi decision needs accept or reject");
      pending_.reset();
      forced_decision_ = *decision;
      deliver_front();
    }
  }

  // Checks an assignment against a batch's matrix and recomputes its costs.
  static Assignment<Millis> normalize_assignment(const CostMatrix<Millis>& cost, const Assignment<Millis>& a) {
    std::vector<MatchedPair<Millis>> pairs;
    std::set<std::size_t> rows, cols;
    for (const auto& p : a.pairs) {
      if (p.request >= cost.rows() || p.taxi >= cost.cols())
        throw MalformedAction("assignment references an entity outside the batch");
      if (!rows.insert(p.request).second) throw MalformedAction("request assigned twice");
      if (!cols.insert(p.taxi).second) throw MalformedAction("taxi assigned twice");
      if (!cost.feasible(p.request, p.taxi)) throw MalformedAction("pair has no route");
      pairs.push_back({p.request, p.taxi, *cost(p.request, p.taxi)});
    }
    return detail::make_assignment(std::move(pairs));
  }

  std::vector<TripRecord> trip_records() const {
    std::vector<TripRecord> out;
    out.reserve(trips_.size());
    for (const auto& [id, t] : trips_) out.push_back(t);
    return out;
  }

  const std::vector<TaxiRecord>& taxi_records() const { return taxi_records_; }

  RunLabel label() const {
    return {config_hash(config_), config_.seed, config_.fleet_size, std::string(to_string(config_.planner)),
            std::string(to_string(config_.policy))};
  }

  MetricsReport metrics() const {
    auto report = compute_metrics(trip_records(), taxi_records_, config_.warmup_ms());
    report.saturated = saturated_;
    return report;
  }

  RunOutputs outputs() const {
    return {label(), metrics(), trip_records(), taxi_records_, trace_, audits_};
  }

  // Throws ProtocolViolation if any cross-agent invariant is broken.
  void check_invariants() const {
    std::size_t by_state[4] = {0, 0, 0, 0};
    for (const auto& [id, p] : passengers_) {
      ++by_state[static_cast<int>(p.state)];
      if (p.assigned_taxi.has_value() == (p.state == PassengerState::Waiting))
        throw ProtocolViolation("passenger " + std::to_string(id) + " assignment does not match state");
    }
    if (by_state[0] + by_state[1] + by_state[2] + by_state[3] != passengers_.size())
      throw ProtocolViolation("passenger conservation");
    for (const auto& t : taxis_) {
      if (t.current_assignment.has_value() == (t.state == TaxiState::Available))
        throw ProtocolViolation("taxi " + std::to_string(t.id) + " assignment does not match state");
      const bool offered = std::any_of(cc_.pending_offers.begin(), cc_.pending_offers.end(),
                                       [&](const PendingOffer& o) { return o.taxi == t.id; });
      int queued = 0;
      for (const auto& [area, queue] : cc_.area_queues)
        for (const auto& q : queue) queued += q.taxi == t.id;
      if (queued > 1) throw ProtocolViolation("taxi " + std::to_string(t.id) + " queued twice");
      if (queued == 1 && t.state != TaxiState::Available)
        throw ProtocolViolation("busy taxi " + std::to_string(t.id) + " is queued");
      if (t.state == TaxiState::Available && queued == 0 && !offered && !in_flight(t.id))
        throw ProtocolViolation("available taxi " + std::to_string(t.id) + " missing from queues");
    }
    for (std::size_t i = 1; i < cc_.request_queue.size(); ++i) {
      const auto& a = cc_.request_queue[i - 1];
      const auto& b = cc_.request_queue[i];
      if (a.request_time > b.request_time || (a.request_time == b.request_time && a.passenger > b.passenger))
        throw ProtocolViolation("request queue out of arrival order");
    }
  }

  // Position of every entity, for observers.
  struct TaxiView {
    TaxiId id;
    TaxiState state;
    Position position;
    Point point;
    std::optional<PassengerId> passenger;
  };
  struct PassengerView {
    PassengerId id;
    PassengerState state;
    NodeId origin;
    NodeId destination;
    Point point;
  };
  struct Snapshot {
    Millis time = 0;
    std::vector<TaxiView> taxis;
    std::vector<PassengerView> passengers;  // not yet picked up
    std::map<AreaId, std::vector<TaxiId>> queues;
    std::size_t pending_requests = 0;
  };

  Snapshot snapshot() const {
    Snapshot s;
    s.time = clock_;
    for (const auto& t : taxis_) {
      Position pos = t.position;
      const auto& m = motion_[static_cast<std::size_t>(t.id)];
      if (auto* ep = std::get_if<EdgePosition>(&pos); ep && m.arrive_at > m.entered_at) {
        ep->offset = std::clamp(static_cast<double>(clock_ - m.entered_at) /
                                    static_cast<double>(m.arrive_at - m.entered_at), 0.0, 1.0);
      }
      std::optional<PassengerId> p;
      if (t.current_assignment) p = t.current_assignment->passenger;
      s.taxis.push_back({t.id, t.state, pos, locate(net_, pos), p});
    }
    for (const auto& [id, p] : passengers_) {
      if (p.state == PassengerState::Waiting || p.state == PassengerState::Assigned)
        s.passengers.push_back({id, p.state, p.origin, p.destination, locate(net_, p.origin)});
    }
    for (const auto& [area, queue] : cc_.area_queues)
      for (const auto& q : queue) s.queues[area].push_back(q.taxi);
    s.pending_requests = cc_.request_queue.size();
    return s;
  }

 private:
  struct Motion {
    std::vector<EdgeId> edges;
    std::size_t next = 0;
    Millis entered_at = 0;
    Millis arrive_at = 0;
  };

  AreaId area_of(const Position& pos) const { return assign_area(areas_, locate(net_, pos)); }

  bool in_flight(TaxiId taxi) const {
    return std::any_of(mailbox_.begin(), mailbox_.end(), [&](const Message& m) {
      const auto* a = std::get_if<AvailabilityNotice>(&m.body);
      return a && a->taxi == taxi;
    });
  }

  void schedule(Millis time, EventKind kind, std::int32_t subject) {
    events_.push({time, next_sequence_++, kind, subject});
  }

  void send(Message m) {
    trace_.push_back(m);
    mailbox_.push_back(std::move(m));
  }

  ControlCenterContext cc_context() {
    return {[this](const Position& p) { return area_of(p); },
            [this](const QueueInterval& q) {
              taxi_records_[static_cast<std::size_t>(q.taxi)].queue_wait.push_back({q.enqueue_time, q.dequeue_time});
            }};
  }

  TaxiAgent& taxi(TaxiId id) { return taxis_.at(static_cast<std::size_t>(id)); }

  void deliver_front() {
    const Message msg = mailbox_.front();
    switch (msg.recipient.kind) {
      case AgentRef::Kind::ControlCenter: {
        mailbox_.pop_front();
        auto step = handle_message(std::move(cc_), msg, clock_, cc_context());
        cc_ = std::move(step.state);
        if (const auto* accept = std::get_if<AcceptJob>(&msg.body)) trips_.at(accept->passenger).assign_time = clock_;
        if (cc_.request_queue.size() > config_.saturation_cap) saturated_ = true;
        for (auto& m : step.out) send(std::move(m));
        break;
      }
      case AgentRef::Kind::Taxi: {
        TaxiAgent& agent = taxi(msg.recipient.id);
        const auto* offer = std::get_if<DispatchOffer>(&msg.body);
        TaxiContext ctx;
        ctx.plan = [this](NodeId from, NodeId to, Millis depart) {
          return plan_path(config_.planner, net_, ttm_, depart, from, to);
        };
        ctx.pickup_node = [this](PassengerId p) { return passengers_.at(p).origin; };
        if (offer && agent.state == TaxiState::Available) {
          if (forced_decision_) {
            ctx.decision = *forced_decision_;
            forced_decision_.reset();
          } else {
            const TaxiDecision proposal = taxi_accept_decision(agent, *offer);
            if (taxi_bound_.contains(agent.id)) {
              open_decision(TaxiOfferContext{agent.id, node_of(agent.position), *offer,
                                             passengers_.at(offer->passenger).origin, proposal});
              return;
            }
            ctx.decision = proposal;
          }
        }
        mailbox_.pop_front();
        auto step = handle_message(agent, msg, clock_, ctx);
        agent = std::move(step.state);
        if (agent.state == TaxiState::EnRouteToPickup) {
          close_idle(agent.id);
          begin_route(agent.id, agent.current_assignment->path.edges, EventKind::PickupCompleted);
        }
        for (auto& m : step.out) send(std::move(m));
        break;
      }
      case AgentRef::Kind::Passenger: {
        mailbox_.pop_front();
        auto& p = passengers_.at(msg.recipient.id);
        p = handle_message(p, msg, clock_).state;
        break;
      }
    }
  }

  void open_decision(std::variant<DispatcherContext, TaxiOfferContext> context) {
    DecisionPoint d{decisions_issued_++, clock_, std::move(context), {}};
    d.context_hash = compute_context_hash(d);
    pending_ = std::move(d);
  }

  void close_idle(TaxiId id) {
    auto it = open_idle_.find(id);
    if (it == open_idle_.end()) throw ProtocolViolation("taxi committed without an open idle interval");
    taxi_records_[static_cast<std::size_t>(id)].idle.push_back({it->second, clock_});
    open_idle_.erase(it);
  }

  void begin_route(TaxiId id, const std::vector<EdgeId>& edges, EventKind on_arrival) {
    auto& m = motion_[static_cast<std::size_t>(id)];
    m = Motion{edges, 0, clock_, clock_};
    if (edges.empty()) {
      schedule(clock_, on_arrival, id);
      return;
    }
    enter_next_edge(id);
  }

  void enter_next_edge(TaxiId id) {
    auto& m = motion_[static_cast<std::size_t>(id)];
    const Edge& e = net_.edge(m.edges[m.next]);
    m.entered_at = clock_;
    m.arrive_at = clock_ + ttm_.traversal_time(e, clock_);
    taxi(id).position = EdgePosition{e.id, 0.0};
    schedule(m.arrive_at, EventKind::TaxiReachesNode, id);
  }

  void process(const Event& ev) {
    switch (ev.kind) {
      case EventKind::RequestArrival: {
        const auto& d = demand_.at(static_cast<std::size_t>(ev.subject));
        auto created = make_passenger(d.passenger, d.origin, d.destination, clock_);
        passengers_[d.passenger] = created.state;
        trips_[d.passenger] = TripRecord{d.passenger, clock_, std::nullopt, std::nullopt, std::nullopt};
        for (auto& m : created.out) send(std::move(m));
        break;
      }
      case EventKind::BatchDispatchTick: {
        if (clock_ + window_ < horizon_) schedule(clock_ + window_, EventKind::BatchDispatchTick, 0);
        dispatch_round();
        break;
      }
      case EventKind::TaxiReachesNode: {
        auto& m = motion_[static_cast<std::size_t>(ev.subject)];
        TaxiAgent& t = taxi(ev.subject);
        t.position = net_.edge(m.edges[m.next]).to;
        ++m.next;
        if (m.next < m.edges.size()) {
          enter_next_edge(t.id);
        } else {
          schedule(clock_, t.state == TaxiState::EnRouteToPickup ? EventKind::PickupCompleted : EventKind::DropoffCompleted,
                   t.id);
        }
        break;
      }
      case EventKind::PickupCompleted: {
        TaxiAgent& t = taxi(ev.subject);
        const PassengerId p = t.current_assignment->passenger;
        Path to_destination = plan_path(config_.planner, net_, ttm_, clock_, node_of(t.position), passengers_.at(p).destination);
        auto step = taxi_pickup(t, clock_, std::move(to_destination));
        t = std::move(step.state);
        trips_.at(p).pickup_time = clock_;
        for (auto& m : step.out) send(std::move(m));
        begin_route(t.id, t.current_assignment->path.edges, EventKind::DropoffCompleted);
        break;
      }
      case EventKind::DropoffCompleted: {
        TaxiAgent& t = taxi(ev.subject);
        const PassengerId p = t.current_assignment->passenger;
        auto step = taxi_dropoff(t, clock_, area_of(t.position));
        t = std::move(step.state);
        trips_.at(p).dropoff_time = clock_;
        open_idle_[t.id] = clock_;
        for (auto& m : step.out) send(std::move(m));
        break;
      }
      case EventKind::DecisionPoint:
        break;
    }
  }

  void dispatch_round() {
    DispatcherContext ctx;
    for (const auto& r : cc_.request_queue)
      if (!r.under_offer) ctx.requests.push_back(r);
    for (TaxiId id : cc_.queued_taxis()) {
      const TaxiAgent& t = taxis_.at(static_cast<std::size_t>(id));
      ctx.taxis.push_back({id, node_of(t.position), *cc_.area_of_queued(id)});
    }
    if (ctx.requests.empty() || ctx.taxis.empty()) return;

    ctx.cost = CostMatrix<Millis>(ctx.requests.size(), ctx.taxis.size());
    std::vector<NodeId> origins;
    std::vector<AreaId> origin_areas;
    for (const auto& r : ctx.requests) {
      origins.push_back(r.origin);
      origin_areas.push_back(area_of(r.origin));
    }
    for (std::size_t c = 0; c < ctx.taxis.size(); ++c) {
      const auto times = travel_times_from(config_.planner, net_, ttm_, clock_, ctx.taxis[c].node, origins);
      for (std::size_t r = 0; r < origins.size(); ++r) {
        if (config_.batching_scope == BatchScope::PerArea && origin_areas[r] != ctx.taxis[c].area) continue;
        ctx.cost(r, c) = times[r];
      }
    }
    if (!ctx.cost.any_feasible()) return;

    const auto greedy = fcfs_nearest(ctx.cost);
    if (config_.policy == PolicyKind::FcfsNearest && !options_.record_batches) {
      ctx.proposal = greedy;
    } else {
      const auto optimal = concurrent_optimal_assignment(ctx.cost);
      ctx.proposal = config_.policy == PolicyKind::FcfsNearest ? greedy : optimal;
      if (options_.record_batches)
        audits_.push_back({clock_, ctx.requests.size(), ctx.taxis.size(), greedy.size(), greedy.total_cost,
                           optimal.size(), optimal.total_cost});
    }

    if (dispatcher_bound_) {
      open_decision(std::move(ctx));
      return;
    }
    apply_dispatch(ctx, ctx.proposal);
  }

  void apply_dispatch(const DispatcherContext& ctx, const Assignment<Millis>& final_assignment) {
    DispatchRound round;
    for (const auto& r : ctx.requests) round.requests.push_back(r.passenger);
    for (const auto& t : ctx.taxis) round.taxis.push_back(t.taxi);
    round.cost = ctx.cost;
    auto step = issue_offers(std::move(cc_), std::move(round), final_assignment, clock_, cc_context());
    cc_ = std::move(step.state);
    for (auto& m : step.out) send(std::move(m));
  }

  ScenarioConfig config_;
  EngineOptions options_;
  RoadNetwork net_;
  TravelTimeModel ttm_;
  std::vector<OperationArea> areas_;
  Millis horizon_ = 0;
  Millis window_ = 0;
  bool dispatcher_bound_ = false;
  std::set<TaxiId> taxi_bound_;

  Millis clock_ = 0;
  std::uint64_t next_sequence_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::deque<Message> mailbox_;
  bool finished_ = false;

  std::vector<DemandItem> demand_;
  std::map<PassengerId, PassengerAgent> passengers_;
  std::vector<TaxiAgent> taxis_;
  std::vector<Motion> motion_;
  ControlCenterAgent cc_;

  std::optional<DecisionPoint> pending_;
  std::optional<TaxiDecision> forced_decision_;
  std::uint64_t decisions_issued_ = 0;

  std::map<PassengerId, TripRecord> trips_;
  std::vector<TaxiRecord> taxi_records_;
  std::map<TaxiId, Millis> open_idle_;
  std::vector<Message> trace_;
  std::vector<BatchAudit> audits_;
  bool saturated_ = false;
  std::function<void(const Event&)> observer_;
};

// Runs a fully automated scenario to its horizon.
inline RunOutputs run(const ScenarioConfig& config, EngineOptions options = {}) {
  if (!config.bindings.empty())
    throw InvalidConfig("scenario binds roles to humans; run it through a participatory session");
  Simulation sim(config, options);
  try {
    sim.advance();
  } catch (const ProtocolViolation& ex) {
    std::ostringstream diag;
    diag << ex.what() << " at t=" << format_seconds(sim.clock()) << "; last messages:\n";
    const auto& trace = sim.trace();
    for (std::size_t i = trace.size() > 10 ? trace.size() - 10 : 0; i < trace.size(); ++i)
      diag << "  " << message_to_json(trace[i]).dump() << '\n';
    throw ProtocolViolation(diag.str());
  }
  return sim.outputs();
}

}  // namespace taxisim
