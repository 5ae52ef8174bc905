#pragma once

#include <chrono>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxisim/simulation.hpp"

namespace taxisim {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---- JSON views of engine state ------------------------------------------

inline json optional_seconds(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

inline json metrics_to_json(const MetricsReport& r) {
  return {{"passenger_avg_waiting", optional_seconds(r.passenger_avg_waiting)},
          {"taxi_avg_idle", optional_seconds(r.taxi_avg_idle)},
          {"taxi_avg_idle_pooled", optional_seconds(r.taxi_avg_idle_pooled)},
          {"taxi_avg_queue_waiting", optional_seconds(r.taxi_avg_queue_waiting)},
          {"taxi_avg_idle_queue_union", optional_seconds(r.taxi_avg_idle_queue_union)},
          {"requests", r.requests},
          {"picked_up", r.picked_up},
          {"delivered", r.delivered},
          {"saturated", r.saturated}};
}

inline json snapshot_to_json(const Simulation::Snapshot& s) {
  json taxis = json::array();
  for (const auto& t : s.taxis) {
    taxis.push_back({{"id", t.id},
                     {"state", std::string(to_string(t.state))},
                     {"position", position_to_json(t.position)},
                     {"x", t.point.x},
                     {"y", t.point.y},
                     {"passenger", t.passenger ? json(*t.passenger) : json(nullptr)}});
  }
  json passengers = json::array();
  for (const auto& p : s.passengers) {
    passengers.push_back({{"id", p.id},
                          {"state", std::string(to_string(p.state))},
                          {"origin", p.origin},
                          {"destination", p.destination},
                          {"x", p.point.x},
                          {"y", p.point.y}});
  }
  json queues = json::array();
  for (const auto& [area, ids] : s.queues) queues.push_back({{"area", area}, {"taxis", ids}});
  return {{"time", millis_to_seconds(s.time)},
          {"taxis", taxis},
          {"passengers", passengers},
          {"queues", queues},
          {"pending_requests", s.pending_requests}};
}

inline json decision_context_to_json(const DecisionPoint& d) {
  if (const auto* ctx = std::get_if<DispatcherContext>(&d.context)) {
    json requests = json::array();
    for (const auto& r : ctx->requests)
      requests.push_back({{"passenger", r.passenger},
                          {"origin", r.origin},
                          {"destination", r.destination},
                          {"request_time", millis_to_seconds(r.request_time)}});
    json taxis = json::array();
    for (const auto& t : ctx->taxis) taxis.push_back({{"taxi", t.taxi}, {"node", t.node}, {"area", t.area}});
    json cost = json::array();
    for (std::size_t r = 0; r < ctx->cost.rows(); ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < ctx->cost.cols(); ++c) {
        const auto v = ctx->cost(r, c);
        row.push_back(v ? json(millis_to_seconds(*v)) : json(nullptr));
      }
      cost.push_back(row);
    }
    return {{"kind", "dispatcher"}, {"requests", requests}, {"taxis", taxis}, {"cost", cost}};
  }
  const auto& t = std::get<TaxiOfferContext>(d.context);
  return {{"kind", "taxi"},
          {"taxi", t.taxi},
          {"taxi_node", t.taxi_node},
          {"passenger", t.offer.passenger},
          {"pickup_node", t.pickup_node},
          {"estimated_pickup_time", millis_to_seconds(t.offer.estimated_pickup_time)}};
}

// Actions travel by entity id; inside the engine they are batch indices.
inline json action_to_json(const DecisionPoint& d, const DecisionAction& action) {
  if (const auto* ctx = std::get_if<DispatcherContext>(&d.context)) {
    json pairs = json::array();
    for (const auto& p : std::get<Assignment<Millis>>(action).pairs)
      pairs.push_back({{"passenger", ctx->requests.at(p.request).passenger}, {"taxi", ctx->taxis.at(p.taxi).taxi}});
    return {{"assignment", pairs}};
  }
  return {{"decision", std::string(to_string(std::get<TaxiDecision>(action)))}};
}

inline DecisionAction action_from_json(const DecisionPoint& d, const json& j) {
  try {
    if (const auto* ctx = std::get_if<DispatcherContext>(&d.context)) {
      if (!j.is_object() || !j.contains("assignment") || !j.at("assignment").is_array())
        throw MalformedAction("dispatcher action needs an assignment list");
      Assignment<Millis> a;
      for (const auto& pj : j.at("assignment")) {
        const auto passenger = pj.at("passenger").get<PassengerId>();
        const auto taxi = pj.at("taxi").get<TaxiId>();
        const auto r = std::find_if(ctx->requests.begin(), ctx->requests.end(),
                                    [&](const PendingRequest& q) { return q.passenger == passenger; });
        const auto c = std::find_if(ctx->taxis.begin(), ctx->taxis.end(), [&](const BatchTaxi& t) { return t.taxi == taxi; });
        if (r == ctx->requests.end()) throw MalformedAction("passenger " + std::to_string(passenger) + " is not in the batch");
        if (c == ctx->taxis.end()) throw MalformedAction("taxi " + std::to_string(taxi) + " is not in the batch");
        a.pairs.push_back({static_cast<std::size_t>(r - ctx->requests.begin()),
                           static_cast<std::size_t>(c - ctx->taxis.begin()), 0});
      }
      return Simulation::normalize_assignment(ctx->cost, a);
    }
    if (!j.is_object() || !j.contains("decision")) throw MalformedAction("taxi action needs a decision");
    const auto s = j.at("decision").get<std::string>();
    if (s == "accept") return TaxiDecision::Accept;
    if (s == "reject") return TaxiDecision::Reject;
    throw MalformedAction("unknown taxi decision '" + s + "'");
  } catch (const json::exception& ex) {
    throw MalformedAction(ex.what());
  }
}

inline DecisionAction proposal_of(const DecisionPoint& d) {
  if (const auto* ctx = std::get_if<DispatcherContext>(&d.context)) return ctx->proposal;
  return std::get<TaxiOfferContext>(d.context).proposal;
}

inline bool same_action(const DecisionAction& a, const DecisionAction& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<TaxiDecision>(&a)) return *x == std::get<TaxiDecision>(b);
  const auto& pa = std::get<Assignment<Millis>>(a).pairs;
  const auto& pb = std::get<Assignment<Millis>>(b).pairs;
  return std::equal(pa.begin(), pa.end(), pb.begin(), pb.end(),
                    [](const auto& p, const auto& q) { return p.request == q.request && p.taxi == q.taxi; });
}

inline json decision_prompt_json(const DecisionPoint& d) {
  return {{"v", kSchemaVersion},
          {"type", "decision_prompt"},
          {"decision_id", d.id},
          {"time", millis_to_seconds(d.time)},
          {"role", d.role()},
          {"context_hash", d.context_hash},
          {"context", decision_context_to_json(d)},
          {"proposal", action_to_json(d, proposal_of(d))}};
}

// ---- action log -----------------------------------------------------------

enum class EntryKind { Validated, Amended, Auto };

inline std::string_view to_string(EntryKind k) {
  constexpr std::string_view names[] = {"validated", "amended", "auto"};
  return names[static_cast<int>(k)];
}

inline EntryKind parse_entry_kind(std::string_view s) {
  if (s == "validated") return EntryKind::Validated;
  if (s == "amended") return EntryKind::Amended;
  if (s == "auto") return EntryKind::Auto;
  throw InvalidConfig("unknown entry kind '" + std::string(s) + "'");
}

inline constexpr std::string_view kSystemResponder = "system";

struct ActionLogEntry {
  std::uint64_t decision_id = 0;
  Millis sim_time = 0;
  std::int64_t wall_time = 0;  // ms since the Unix epoch
  std::string role;
  std::string context_hash;
  json context;
  json proposal;
  json final_action;
  EntryKind kind = EntryKind::Auto;
  std::string responder;

  friend bool operator==(const ActionLogEntry&, const ActionLogEntry&) = default;
};

inline json entry_to_json(const ActionLogEntry& e) {
  return {{"v", kSchemaVersion},
          {"record", "entry"},
          {"decision_id", e.decision_id},
          {"sim_time", millis_to_seconds(e.sim_time)},
          {"wall_time", e.wall_time},
          {"role", e.role},
          {"context_hash", e.context_hash},
          {"context", e.context},
          {"proposal", e.proposal},
          {"final", e.final_action},
          {"kind", std::string(to_string(e.kind))},
          {"responder", e.responder}};
}

inline ActionLogEntry entry_from_json(const json& j) {
  ActionLogEntry e;
  e.decision_id = j.at("decision_id").get<std::uint64_t>();
  e.sim_time = seconds_to_millis(j.at("sim_time").get<double>());
  e.wall_time = j.at("wall_time").get<std::int64_t>();
  e.role = j.at("role").get<std::string>();
  e.context_hash = j.at("context_hash").get<std::string>();
  e.context = j.at("context");
  e.proposal = j.at("proposal");
  e.final_action = j.at("final");
  e.kind = parse_entry_kind(j.at("kind").get<std::string>());
  e.responder = j.at("responder").get<std::string>();
  return e;
}

struct ActionLog {
  ScenarioConfig config;  // includes the human bindings
  std::vector<ActionLogEntry> entries;
};

inline void write_action_log(std::ostream& out, const ActionLog& log) {
  json header{{"v", kSchemaVersion},
              {"record", "header"},
              {"schema", "taxisim.action_log"},
              {"config_hash", config_hash(log.config)},
              {"seed", log.config.seed},
              {"config", config_to_json(log.config)}};
  out << header.dump() << '\n';
  for (const auto& e : log.entries) out << entry_to_json(e).dump() << '\n';
}

inline std::string action_log_jsonl(const ActionLog& log) {
  std::ostringstream out;
  write_action_log(out, log);
  return out.str();
}

inline ActionLog read_action_log(std::istream& in) {
  std::string line;
  ActionLog log;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.at("v").get<int>() != kSchemaVersion) throw InvalidConfig("unsupported action log version");
      if (!have_header) {
        if (j.at("record") != "header") throw InvalidConfig("action log must start with a header");
        log.config = config_from_json(j.at("config"));
        if (config_hash(log.config) != j.at("config_hash").get<std::string>() ||
            log.config.seed != j.at("seed").get<std::uint64_t>())
          throw InvalidConfig("action log header is inconsistent");
        have_header = true;
      } else {
        log.entries.push_back(entry_from_json(j));
      }
    }
  } catch (const json::exception& ex) {
    throw InvalidConfig(std::string("action log: ") + ex.what());
  }
  if (!have_header) throw InvalidConfig("action log is empty");
  return log;
}

inline ActionLog load_action_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open " + path);
  return read_action_log(in);
}

// ---- sessions -------------------------------------------------------------

enum class SessionState { Created, Running, PausedOnDecision, Finished, Aborted };

inline std::string_view to_string(SessionState s) {
  constexpr std::string_view names[] = {"created", "running", "paused_on_decision", "finished", "aborted"};
  return names[static_cast<int>(s)];
}

struct Pacing {
  enum class Mode { AsFastAsPossible, WallClock };
  Mode mode = Mode::AsFastAsPossible;
  double factor = 1.0;  // simulated seconds per wall second
};

struct SessionOptions {
  Pacing pacing;
  std::optional<double> timeout = 60.0;  // wall seconds; absent disables
  Millis snapshot_interval = 0;          // simulated ms between observer snapshots; 0 disables
};

struct Finished {};
using SessionProgress = std::variant<DecisionPoint, Finished>;

inline std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// A simulation with some roles bound to humans. Not thread-safe; callers
// serialize access.
class Session {
 public:
  using SnapshotObserver = std::function<void(const Simulation::Snapshot&)>;

  Session(std::string id, ScenarioConfig config, SessionOptions options = {},
          std::function<std::int64_t()> wall_clock = wall_clock_ms)
      : id_(std::move(id)), options_(options), wall_clock_(std::move(wall_clock)), sim_(validated(std::move(config))) {
    install_observer();
  }

  const std::string& id() const { return id_; }
  SessionState state() const { return state_; }
  const SessionOptions& options() const { return options_; }
  const ScenarioConfig& config() const { return sim_.config(); }
  const Simulation& simulation() const { return sim_; }
  const std::vector<ActionLogEntry>& log() const { return log_; }
  std::optional<std::int64_t> pending_since() const { return pending_since_; }

  void set_snapshot_observer(SnapshotObserver observer) { observer_ = std::move(observer); }

  // Hands one more role to a human. Only legal before the session starts.
  void bind(const RoleBinding& binding) {
    if (state_ != SessionState::Created) throw InvalidConfig("roles can only be bound before the session starts");
    ScenarioConfig c = sim_.config();
    if (std::find(c.bindings.begin(), c.bindings.end(), binding) == c.bindings.end()) c.bindings.push_back(binding);
    sim_ = Simulation(validated(std::move(c)));
    install_observer();
  }

  void start() {
    if (state_ != SessionState::Created) throw StaleDecision("session already started");
    state_ = SessionState::Running;
  }

  // Runs to the next human decision or to the horizon. With a limit, stops
  // once simulated time reaches it and returns nullopt.
  std::optional<SessionProgress> next_decision(std::optional<Millis> until = std::nullopt) {
    if (state_ == SessionState::Aborted) throw SessionAborted("session " + id_ + " was aborted");
    if (state_ == SessionState::Created) start();
    if (state_ == SessionState::Finished) return Finished{};
    if (state_ == SessionState::PausedOnDecision) return *sim_.pending_decision();
    for (;;) {
      if (until && sim_.clock() >= *until && !sim_.finished()) return std::nullopt;
      if (sim_.step()) continue;
      if (const auto* d = sim_.pending_decision()) {
        state_ = SessionState::PausedOnDecision;
        pending_since_ = wall_clock_();
        return *d;
      }
      state_ = SessionState::Finished;
      return Finished{};
    }
  }

  // Applies a human response; no action means "validate the proposal".
  ActionLogEntry submit_response(std::uint64_t decision_id, const std::optional<json>& action,
                                 const std::string& responder = "human") {
    const DecisionPoint& d = pending_or_throw(decision_id);
    const DecisionAction proposal = proposal_of(d);
    const DecisionAction final_action = action ? action_from_json(d, *action) : proposal;
    const EntryKind kind = same_action(final_action, proposal) ? EntryKind::Validated : EntryKind::Amended;
    return apply(d, final_action, kind, responder);
  }

  // Applies the proposal on behalf of the system. No-op when the decision is
  // no longer pending.
  std::optional<ActionLogEntry> timeout_decision(std::uint64_t decision_id) {
    if (state_ != SessionState::PausedOnDecision) return std::nullopt;
    const DecisionPoint& d = *sim_.pending_decision();
    if (d.id != decision_id) return std::nullopt;
    return apply(d, proposal_of(d), EntryKind::Auto, std::string(kSystemResponder));
  }

  void abort() {
    if (state_ != SessionState::Finished) state_ = SessionState::Aborted;
    pending_since_.reset();
  }

  ActionLog action_log() const { return {sim_.config(), log_}; }

  std::string export_action_log() const {
    if (state_ != SessionState::Finished && state_ != SessionState::Aborted)
      throw StaleDecision("session " + id_ + " is still " + std::string(to_string(state_)));
    return action_log_jsonl(action_log());
  }

  RunOutputs outputs() const { return sim_.outputs(); }

 private:
  void install_observer() {
    sim_.set_event_observer([this](const Event& ev) {
      if (!observer_ || options_.snapshot_interval <= 0) return;
      while (ev.time >= next_snapshot_) {
        observer_(sim_.snapshot());
        next_snapshot_ += options_.snapshot_interval;
      }
    });
  }

  static ScenarioConfig validated(ScenarioConfig c) {
    c.validate();
    return c;
  }

  const DecisionPoint& pending_or_throw(std::uint64_t decision_id) const {
    if (state_ == SessionState::Aborted) throw SessionAborted("session " + id_ + " was aborted");
    const DecisionPoint* d = sim_.pending_decision();
    if (state_ != SessionState::PausedOnDecision || !d || d->id != decision_id)
      throw StaleDecision("decision " + std::to_string(decision_id) + " is not pending");
    return *d;
  }

  ActionLogEntry apply(const DecisionPoint& d, const DecisionAction& final_action, EntryKind kind,
                       const std::string& responder) {
    ActionLogEntry e{d.id,
                     d.time,
                     wall_clock_(),
                     d.role(),
                     d.context_hash,
                     decision_context_to_json(d),
                     action_to_json(d, proposal_of(d)),
                     action_to_json(d, final_action),
                     kind,
                     responder};
    sim_.resolve(final_action);
    log_.push_back(e);
    pending_since_.reset();
    state_ = SessionState::Running;
    return e;
  }

  std::string id_;
  SessionOptions options_;
  std::function<std::int64_t()> wall_clock_;
  Simulation sim_;
  SessionState state_ = SessionState::Created;
  std::vector<ActionLogEntry> log_;
  std::optional<std::int64_t> pending_since_;
  SnapshotObserver observer_;
  Millis next_snapshot_ = 0;
};

// Re-runs a session from its log, applying each logged final action at the
// decision point it was recorded for.
inline RunOutputs replay_log(const ScenarioConfig& config, const ActionLog& log) {
  if (config_hash(config) != config_hash(log.config))
    throw LogMismatch("config hash " + config_hash(config) + " differs from the log's " + config_hash(log.config));
  ScenarioConfig c = config;
  c.bindings = log.config.bindings;
  Simulation sim(c);
  std::size_t next = 0;
  for (;;) {
    sim.advance();
    const DecisionPoint* d = sim.pending_decision();
    if (!d) break;
    if (next >= log.entries.size())
      throw LogMismatch("decision " + std::to_string(d->id) + " has no log entry");
    const auto& e = log.entries[next];
    if (e.decision_id != d->id || e.context_hash != d->context_hash)
      throw LogMismatch("decision " + std::to_string(d->id) + " context " + d->context_hash +
                        " does not match log entry " + std::to_string(e.decision_id) + " (" + e.context_hash + ")");
    sim.resolve(action_from_json(*d, e.final_action));
    ++next;
  }
  if (next != log.entries.size())
    throw LogMismatch(std::to_string(log.entries.size() - next) + " log entries were never reached");
  return sim.outputs();
}

}  // namespace taxisim
