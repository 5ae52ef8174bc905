#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "taxisim/participatory.hpp"

namespace taxisim {

using nlohmann::json;

// Receives server->client messages. Must not call back into the service.
using Sink = std::function<void(const json&)>;

inline json error_json(const std::exception& ex) {
  std::string what = ex.what();
  std::string name = "Error";
  if (const auto colon = what.find(": "); colon != std::string::npos && colon < 32 &&
                                          what.find(' ') > colon) {
    name = what.substr(0, colon);
    what = what.substr(colon + 2);
  }
  return {{"v", kSchemaVersion}, {"type", "error"}, {"error", name}, {"message", what}};
}

inline json finished_json(const Session& s) {
  return {{"v", kSchemaVersion},
          {"type", "finished"},
          {"state", std::string(to_string(s.state()))},
          {"report", metrics_to_json(s.simulation().metrics())},
          {"decisions", s.log().size()}};
}

inline json metrics_update_json(const Session& s) {
  return {{"v", kSchemaVersion},
          {"type", "metrics_update"},
          {"time", millis_to_seconds(s.simulation().clock())},
          {"report", metrics_to_json(s.simulation().metrics())}};
}

struct SessionCommand {
  enum class Kind { Start, Response, Timeout, Abort };
  Kind kind = Kind::Start;
  std::uint64_t decision_id = 0;
  std::optional<json> action;  // absent: validate the proposal
  std::string responder = "human";
  Sink reply;                  // where errors go; absent: all subscribers
};

// Owns one session. Commands are queued and applied in order, either by a
// dedicated worker thread or by pump() on the caller's thread.
class SessionHost {
 public:
  SessionHost(std::unique_ptr<Session> session, bool threaded) : session_(std::move(session)) {
    session_->set_snapshot_observer([this](const Simulation::Snapshot& s) {
      json j = snapshot_to_json(s);
      j["v"] = kSchemaVersion;
      j["type"] = "snapshot";
      broadcast(j);
    });
    if (threaded) worker_ = std::thread([this] { work(); });
  }

  ~SessionHost() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  SessionHost(const SessionHost&) = delete;
  SessionHost& operator=(const SessionHost&) = delete;

  void post(SessionCommand c) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(c));
    }
    cv_.notify_all();
  }

  // Applies queued commands and runs the session until it needs input.
  void pump() {
    std::unique_lock lock(mutex_);
    for (;;) {
      if (!queue_.empty()) {
        auto c = std::move(queue_.front());
        queue_.pop_front();
        apply(c);
      } else if (session_->state() == SessionState::Running) {
        drive(false);
      } else {
        return;
      }
    }
  }

  int subscribe(Sink sink) {
    std::lock_guard lock(mutex_);
    sinks_[next_sink_] = std::move(sink);
    return next_sink_++;
  }

  void unsubscribe(int id) {
    std::lock_guard lock(mutex_);
    sinks_.erase(id);
  }

  template <typename F>
  auto with_session(F&& f) {
    std::lock_guard lock(mutex_);
    return f(*session_);
  }

  // Blocks until the session is idle or finished; threaded hosts only.
  bool wait_idle(std::chrono::milliseconds limit) {
    std::unique_lock lock(mutex_);
    return idle_cv_.wait_for(lock, limit, [&] { return queue_.empty() && session_->state() != SessionState::Running; });
  }

 private:
  void broadcast(const json& j) {
    for (auto& [id, sink] : sinks_) sink(j);
  }

  void apply(SessionCommand& c) {
    try {
      switch (c.kind) {
        case SessionCommand::Kind::Start:
          session_->start();
          break;
        case SessionCommand::Kind::Response: {
          const auto entry = session_->submit_response(c.decision_id, c.action, c.responder);
          logged(entry);
          break;
        }
        case SessionCommand::Kind::Timeout:
          if (const auto entry = session_->timeout_decision(c.decision_id)) logged(*entry);
          break;
        case SessionCommand::Kind::Abort:
          session_->abort();
          broadcast(finished_json(*session_));
          break;
      }
    } catch (const std::exception& ex) {
      if (c.reply) c.reply(error_json(ex));
      else broadcast(error_json(ex));
    }
  }

  void logged(const ActionLogEntry& e) {
    json j = entry_to_json(e);
    j.erase("v");
    j.erase("record");
    broadcast({{"v", kSchemaVersion}, {"type", "decision_logged"}, {"entry", j}});
    broadcast(metrics_update_json(*session_));
  }

  // Advances the session; paced sessions move one chunk of simulated time.
  void drive(bool paced) {
    std::optional<Millis> until;
    if (paced) until = session_->simulation().clock() + chunk();
    std::optional<SessionProgress> p;
    try {
      p = session_->next_decision(until);
    } catch (const std::exception& ex) {
      session_->abort();
      broadcast(error_json(ex));
      broadcast(finished_json(*session_));
      return;
    }
    if (!p) return;
    if (const auto* d = std::get_if<DecisionPoint>(&*p)) {
      broadcast(decision_prompt_json(*d));
    } else {
      broadcast(metrics_update_json(*session_));
      broadcast(finished_json(*session_));
    }
  }

  Millis chunk() const {
    const auto& o = session_->options();
    return o.snapshot_interval > 0 ? o.snapshot_interval : 1000;
  }

  void work() {
    std::unique_lock lock(mutex_);
    while (!stop_) {
      if (!queue_.empty()) {
        auto c = std::move(queue_.front());
        queue_.pop_front();
        apply(c);
        continue;
      }
      if (session_->state() == SessionState::Running) {
        const auto& pacing = session_->options().pacing;
        const bool paced = pacing.mode == Pacing::Mode::WallClock;
        drive(paced);
        if (paced && session_->state() == SessionState::Running) {
          const auto wall = std::chrono::milliseconds(
              static_cast<std::int64_t>(static_cast<double>(chunk()) / std::max(pacing.factor, 1e-6)));
          cv_.wait_for(lock, wall, [&] { return stop_ || !queue_.empty(); });
        }
        continue;
      }
      idle_cv_.notify_all();
      cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
    }
  }

  std::unique_ptr<Session> session_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<SessionCommand> queue_;
  std::map<int, Sink> sinks_;
  int next_sink_ = 0;
  bool stop_ = false;
  std::thread worker_;
};

struct SessionRequest {
  ScenarioConfig config;
  SessionOptions options;
};

inline RoleBinding binding_from_json(const json& b) {
  const auto role = b.at("role").get<std::string>();
  if (role == "dispatcher") return {RoleBinding::Role::Dispatcher, 0};
  if (role == "taxi") return {RoleBinding::Role::Taxi, b.at("id").get<TaxiId>()};
  throw InvalidConfig("unknown role '" + role + "'");
}

// {"config": {...}, "bindings": [...], "pacing": {...}, "timeout": s|null,
//  "snapshot_interval": s}
inline SessionRequest session_request_from_json(const json& j) {
  try {
    if (!j.is_object()) throw InvalidConfig("session request must be an object");
    SessionRequest r;
    if (j.contains("config")) r.config = config_from_json(j.at("config"));
    if (j.contains("bindings"))
      for (const auto& b : j.at("bindings")) {
        const auto binding = binding_from_json(b);
        if (std::find(r.config.bindings.begin(), r.config.bindings.end(), binding) == r.config.bindings.end())
          r.config.bindings.push_back(binding);
      }
    if (j.contains("pacing")) {
      const auto& p = j.at("pacing");
      const auto mode = p.at("mode").get<std::string>();
      if (mode == "as_fast_as_possible") r.options.pacing.mode = Pacing::Mode::AsFastAsPossible;
      else if (mode == "wall_clock") r.options.pacing.mode = Pacing::Mode::WallClock;
      else throw InvalidConfig("unknown pacing mode '" + mode + "'");
      if (p.contains("factor")) r.options.pacing.factor = p.at("factor").get<double>();
      if (!(r.options.pacing.factor > 0.0)) throw InvalidConfig("pacing factor must be > 0");
    }
    if (j.contains("timeout")) {
      if (j.at("timeout").is_null()) r.options.timeout.reset();
      else r.options.timeout = j.at("timeout").get<double>();
    }
    if (j.contains("snapshot_interval")) r.options.snapshot_interval = seconds_from_json(j.at("snapshot_interval"));
    r.config.validate();
    return r;
  } catch (const json::exception& ex) {
    throw InvalidConfig(std::string("session request: ") + ex.what());
  }
}

class SessionManager {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit SessionManager(bool threaded = true, Clock clock = wall_clock_ms)
      : threaded_(threaded), clock_(std::move(clock)) {}

  std::string create(const SessionRequest& request) {
    std::lock_guard lock(mutex_);
    const std::string id = "s" + std::to_string(++counter_);
    auto session = std::make_unique<Session>(id, request.config, request.options, clock_);
    hosts_.emplace(id, std::make_shared<SessionHost>(std::move(session), threaded_));
    return id;
  }

  std::shared_ptr<SessionHost> find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = hosts_.find(id);
    if (it == hosts_.end()) throw UnknownSession("no session '" + id + "'");
    return it->second;
  }

  std::vector<std::string> ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, host] : hosts_) out.push_back(id);
    return out;
  }

  json describe(const std::string& id) const {
    return find(id)->with_session([&](Session& s) {
      const auto* pending = s.simulation().pending_decision();
      return json{{"session_id", id},
                  {"state", std::string(to_string(s.state()))},
                  {"config_hash", config_hash(s.config())},
                  {"seed", s.config().seed},
                  {"time", millis_to_seconds(s.simulation().clock())},
                  {"decisions", s.log().size()},
                  {"pending_decision", pending ? json(pending->id) : json(nullptr)}};
    });
  }

  json list() const {
    json out = json::array();
    for (const auto& id : ids()) out.push_back(describe(id));
    return out;
  }

  // Queues a timeout for every decision pending longer than its session's
  // limit. Returns the number queued.
  std::size_t poll_timeouts() {
    const auto now = clock_();
    std::size_t fired = 0;
    for (const auto& id : ids()) {
      auto host = find(id);
      const auto due = host->with_session([&](Session& s) -> std::optional<std::uint64_t> {
        const auto since = s.pending_since();
        const auto limit = s.options().timeout;
        if (s.state() != SessionState::PausedOnDecision || !since || !limit) return std::nullopt;
        if (static_cast<double>(now - *since) < *limit * 1000.0) return std::nullopt;
        return s.simulation().pending_decision()->id;
      });
      if (due) {
        host->post({SessionCommand::Kind::Timeout, *due, std::nullopt, std::string(kSystemResponder), nullptr});
        if (!threaded_) host->pump();
        ++fired;
      }
    }
    return fired;
  }

  bool threaded() const { return threaded_; }

 private:
  bool threaded_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<SessionHost>> hosts_;
  std::uint64_t counter_ = 0;
};

// One client connection speaking the JSON protocol. Transport-agnostic: the
// server feeds it text frames and forwards whatever it sends.
class ProtocolEndpoint {
 public:
  ProtocolEndpoint(SessionManager& manager, Sink send) : manager_(manager), send_(std::move(send)) {}

  ~ProtocolEndpoint() { detach(); }

  ProtocolEndpoint(const ProtocolEndpoint&) = delete;
  ProtocolEndpoint& operator=(const ProtocolEndpoint&) = delete;

  const std::optional<std::string>& session_id() const { return session_id_; }

  void handle(const std::string& text) {
    try {
      json j;
      try {
        j = json::parse(text);
      } catch (const json::exception& ex) {
        throw MalformedAction(std::string("not JSON: ") + ex.what());
      }
      if (!j.is_object() || !j.contains("type")) throw MalformedAction("message needs a type");
      if (j.contains("v") && j.at("v") != kSchemaVersion)
        throw MalformedAction("unsupported protocol version " + j.at("v").dump());
      dispatch(j.at("type").get<std::string>(), j);
    } catch (const json::exception& ex) {
      send_(error_json(MalformedAction(ex.what())));
    } catch (const std::exception& ex) {
      send_(error_json(ex));
    }
  }

 private:
  void dispatch(const std::string& type, const json& j) {
    if (type == "create_session") {
      const auto id = manager_.create(session_request_from_json(j));
      attach(id);
      send_({{"v", kSchemaVersion}, {"type", "session_created"}, {"session_id", id}});
      return;
    }
    if (type == "bind") {
      const auto id = j.contains("session_id") ? j.at("session_id").get<std::string>() : session_id_.value_or("");
      auto host = manager_.find(id);
      if (j.contains("role")) {
        const auto binding = binding_from_json(j);
        host->with_session([&](Session& s) { s.bind(binding); });
      }
      attach(id);
      send_({{"v", kSchemaVersion}, {"type", "bound"}, {"session_id", id}});
      return;
    }
    auto host = attached();
    SessionCommand c;
    c.reply = send_;
    if (type == "start") {
      c.kind = SessionCommand::Kind::Start;
    } else if (type == "response") {
      c.kind = SessionCommand::Kind::Response;
      c.decision_id = j.at("decision_id").get<std::uint64_t>();
      if (j.contains("action") && !(j.at("action").is_string() && j.at("action") == "validate"))
        c.action = j.at("action");
      if (j.contains("responder")) c.responder = j.at("responder").get<std::string>();
      if (c.responder == kSystemResponder) throw MalformedAction("responder name is reserved");
    } else if (type == "abort") {
      c.kind = SessionCommand::Kind::Abort;
    } else {
      throw MalformedAction("unknown message type '" + type + "'");
    }
    host->post(std::move(c));
    if (!manager_.threaded()) host->pump();
  }

  std::shared_ptr<SessionHost> attached() {
    if (!session_id_) throw UnknownSession("connection is not bound to a session");
    return manager_.find(*session_id_);
  }

  void attach(const std::string& id) {
    detach();
    auto host = manager_.find(id);
    subscription_ = host->subscribe(send_);
    session_id_ = id;
  }

  void detach() {
    if (session_id_ && subscription_) {
      try {
        manager_.find(*session_id_)->unsubscribe(*subscription_);
      } catch (const UnknownSession&) {
      }
    }
    session_id_.reset();
    subscription_.reset();
  }

  SessionManager& manager_;
  Sink send_;
  std::optional<std::string> session_id_;
  std::optional<int> subscription_;
};

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Session management over HTTP: POST /sessions, GET /sessions,
// GET /sessions/{id}, GET /sessions/{id}/log.
inline HttpReply handle_http(SessionManager& manager, const std::string& method, const std::string& target,
                             const std::string& body) {
  const auto reply = [](int status, const json& j) { return HttpReply{status, "application/json", j.dump()}; };
  const auto fail = [&](int status, const std::exception& ex) {
    json e = error_json(ex);
    e.erase("type");
    return reply(status, e);
  };
  std::string path = target.substr(0, target.find('?'));
  while (path.size() > 1 && path.back() == '/') path.pop_back();
  try {
    if (path == "/sessions") {
      if (method == "POST") {
        json j;
        try {
          j = body.empty() ? json::object() : json::parse(body);
        } catch (const json::exception& ex) {
          throw InvalidConfig(std::string("body is not JSON: ") + ex.what());
        }
        const auto id = manager.create(session_request_from_json(j));
        return reply(201, manager.describe(id));
      }
      if (method == "GET") return reply(200, manager.list());
      return reply(405, {{"error", "MethodNotAllowed"}, {"message", method}});
    }
    const std::string prefix = "/sessions/";
    if (path.rfind(prefix, 0) == 0) {
      std::string rest = path.substr(prefix.size());
      const bool log = rest.size() > 4 && rest.ends_with("/log");
      if (log) rest.resize(rest.size() - 4);
      if (method != "GET") return reply(405, {{"error", "MethodNotAllowed"}, {"message", method}});
      if (!log) return reply(200, manager.describe(rest));
      auto host = manager.find(rest);
      return HttpReply{200, "application/x-ndjson", host->with_session([](Session& s) { return s.export_action_log(); })};
    }
    return reply(404, {{"error", "NotFound"}, {"message", path}});
  } catch (const UnknownSession& ex) {
    return fail(404, ex);
  } catch (const StaleDecision& ex) {
    return fail(409, ex);
  } catch (const Error& ex) {
    return fail(400, ex);
  }
}

}  // namespace taxisim
