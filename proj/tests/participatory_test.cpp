#include <gtest/gtest.h>

#include <sstream>

#include "taxisim/participatory.hpp"

namespace taxisim {
namespace {

ScenarioConfig scenario(int fleet = 5) {
  ScenarioConfig c;
  c.fleet_size = fleet;
  c.sim_duration = 3600;
  c.seed = 21;
  return c;
}

RoleBinding dispatcher() { return {RoleBinding::Role::Dispatcher, 0}; }
RoleBinding taxi(TaxiId id) { return {RoleBinding::Role::Taxi, id}; }

std::optional<DecisionPoint> as_decision(const std::optional<SessionProgress>& p) {
  if (!p || !std::holds_alternative<DecisionPoint>(*p)) return std::nullopt;
  return std::get<DecisionPoint>(*p);
}

// Validates every proposal and returns the finished session.
std::unique_ptr<Session> validate_all(ScenarioConfig c) {
  auto s = std::make_unique<Session>("t", std::move(c));
  while (const auto d = as_decision(s->next_decision())) s->submit_response(d->id, std::nullopt);
  return s;
}

TEST(Session, NoBindingsMatchesTheAutomatedRun) {
  Session s("a", scenario());
  const auto p = s.next_decision();
  ASSERT_TRUE(p && std::holds_alternative<Finished>(*p));
  EXPECT_EQ(s.state(), SessionState::Finished);
  EXPECT_TRUE(s.log().empty());
  EXPECT_EQ(s.outputs().summary_csv(), run(scenario()).summary_csv());
  EXPECT_EQ(s.outputs().trace_jsonl(), run(scenario()).trace_jsonl());
}

TEST(Session, DispatcherPromptCarriesContextAndProposal) {
  auto c = scenario();
  c.bindings = {dispatcher()};
  Session s("a", c);
  const auto d = as_decision(s.next_decision());
  ASSERT_TRUE(d);
  EXPECT_EQ(s.state(), SessionState::PausedOnDecision);
  const auto prompt = decision_prompt_json(*d);
  EXPECT_EQ(prompt["type"], "decision_prompt");
  EXPECT_EQ(prompt["role"], "dispatcher");
  EXPECT_EQ(prompt["context"]["kind"], "dispatcher");
  const auto& ctx = std::get<DispatcherContext>(d->context);
  EXPECT_EQ(prompt["context"]["cost"].size(), ctx.cost.rows());
  EXPECT_EQ(prompt["proposal"]["assignment"].size(), ctx.proposal.size());
  EXPECT_TRUE(same_action(action_from_json(*d, prompt["proposal"]), ctx.proposal));
}

TEST(Session, TaxiPromptOffersAcceptOrReject) {
  auto c = scenario(2);
  c.bindings = {taxi(1)};
  Session s("a", c);
  const auto d = as_decision(s.next_decision());
  ASSERT_TRUE(d);
  EXPECT_EQ(d->role(), "taxi:1");
  const auto prompt = decision_prompt_json(*d);
  EXPECT_EQ(prompt["context"]["kind"], "taxi");
  EXPECT_EQ(prompt["proposal"], json({{"decision", "accept"}}));
  const auto e = s.submit_response(d->id, json{{"decision", "reject"}});
  EXPECT_EQ(e.kind, EntryKind::Amended);
  EXPECT_THROW(s.submit_response(d->id, std::nullopt), StaleDecision);
}

TEST(Session, BindingAnUnknownTaxiFails) {
  Session s("a", scenario(3));
  EXPECT_THROW(s.bind(taxi(3)), UnknownAgent);
  EXPECT_THROW(Session("b", [] {
    auto c = scenario(3);
    c.bindings = {taxi(-1)};
    return c;
  }()),
               UnknownAgent);
}

TEST(Session, BindingAfterStartFails) {
  Session s("a", scenario());
  s.start();
  EXPECT_THROW(s.bind(dispatcher()), InvalidConfig);
}

TEST(Session, ValidatingEveryProposalMatchesTheAutomatedRun) {
  auto c = scenario();
  c.bindings = {dispatcher(), taxi(0), taxi(3)};
  const auto s = validate_all(c);
  EXPECT_GT(s->log().size(), 20u);
  for (const auto& e : s->log()) {
    EXPECT_EQ(e.kind, EntryKind::Validated);
    EXPECT_EQ(e.final_action, e.proposal);
  }
  const auto automated = run(scenario());
  EXPECT_EQ(s->outputs().summary_csv(), automated.summary_csv());
  EXPECT_EQ(trips_csv(s->outputs().trips), trips_csv(automated.trips));
}

// Finds a dispatcher decision where two assigned pairs can swap taxis.
struct Swap {
  json action;
  std::uint64_t id;
};

std::optional<Swap> find_swappable(Session& s) {
  for (;;) {
    const auto d = as_decision(s.next_decision());
    if (!d) return std::nullopt;
    const auto& ctx = std::get<DispatcherContext>(d->context);
    const auto& pairs = ctx.proposal.pairs;
    if (pairs.size() >= 2 && ctx.cost.feasible(pairs[0].request, pairs[1].taxi) &&
        ctx.cost.feasible(pairs[1].request, pairs[0].taxi)) {
      json a = action_to_json(*d, ctx.proposal);
      std::swap(a["assignment"][0]["taxi"], a["assignment"][1]["taxi"]);
      return Swap{a, d->id};
    }
    s.submit_response(d->id, std::nullopt);
  }
}

TEST(Session, AmendedAssignmentIsAppliedAndLogged) {
  auto c = scenario(8);
  c.bindings = {dispatcher()};
  Session s("a", c);
  const auto swap = find_swappable(s);
  ASSERT_TRUE(swap);
  const auto e = s.submit_response(swap->id, std::optional<json>(swap->action), "alice");
  EXPECT_EQ(e.kind, EntryKind::Amended);
  EXPECT_EQ(e.responder, "alice");
  EXPECT_EQ(e.final_action, swap->action);
  EXPECT_NE(e.final_action, e.proposal);
}

TEST(Session, DuplicateTaxiIsRejectedAndTheDecisionStaysOpen) {
  auto c = scenario(8);
  c.bindings = {dispatcher()};
  Session s("a", c);
  const auto swap = find_swappable(s);
  ASSERT_TRUE(swap);
  json dup = swap->action;
  dup["assignment"][1]["taxi"] = dup["assignment"][0]["taxi"];
  EXPECT_THROW(s.submit_response(swap->id, std::optional<json>(dup)), MalformedAction);
  EXPECT_THROW(s.submit_response(swap->id, json{{"assignment", {{{"passenger", -5}, {"taxi", 0}}}}}), MalformedAction);
  EXPECT_THROW(s.submit_response(swap->id, json{{"decision", "accept"}}), MalformedAction);
  EXPECT_EQ(s.state(), SessionState::PausedOnDecision);
  EXPECT_NO_THROW(s.submit_response(swap->id, std::nullopt));
}

TEST(Session, StaleDecisionIds) {
  auto c = scenario();
  c.bindings = {dispatcher()};
  Session s("a", c);
  const auto d = as_decision(s.next_decision());
  ASSERT_TRUE(d);
  const auto id = d->id;
  EXPECT_THROW(s.submit_response(id + 1, std::nullopt), StaleDecision);
  s.submit_response(id, std::nullopt);
  EXPECT_THROW(s.submit_response(id, std::nullopt), StaleDecision);
}

TEST(Session, TimeoutAppliesTheProposalOnce) {
  auto c = scenario();
  c.bindings = {dispatcher()};
  std::int64_t now = 1000;
  Session s("a", c, {}, [&] { return now; });
  const auto d = as_decision(s.next_decision());
  ASSERT_TRUE(d);
  EXPECT_EQ(s.pending_since(), 1000);
  const auto id = d->id;
  now = 61000;
  const auto e = s.timeout_decision(id);
  ASSERT_TRUE(e);
  EXPECT_EQ(e->kind, EntryKind::Auto);
  EXPECT_EQ(e->responder, "system");
  EXPECT_EQ(e->wall_time, 61000);
  EXPECT_FALSE(s.timeout_decision(id));
  EXPECT_THROW(s.submit_response(id, std::nullopt), StaleDecision);
}

TEST(Session, ResponseAfterTimeoutIsStale) {
  auto c = scenario();
  c.bindings = {dispatcher()};
  Session s("a", c);
  const auto id = as_decision(s.next_decision())->id;
  s.timeout_decision(id);
  s.next_decision();
  EXPECT_THROW(s.submit_response(id, std::nullopt), StaleDecision);
}

TEST(Session, ExportNeedsAFinishedSession) {
  auto c = scenario();
  c.bindings = {dispatcher()};
  Session s("a", c);
  s.next_decision();
  EXPECT_THROW(s.export_action_log(), StaleDecision);
  s.abort();
  EXPECT_EQ(s.state(), SessionState::Aborted);
  EXPECT_THROW(s.next_decision(), SessionAborted);
  EXPECT_NO_THROW(s.export_action_log());
}

TEST(Session, EmptyLogExportIsHeaderOnly) {
  Session s("a", scenario());
  s.next_decision();
  const auto text = s.export_action_log();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  std::stringstream in(text);
  const auto log = read_action_log(in);
  EXPECT_TRUE(log.entries.empty());
  EXPECT_EQ(config_to_json(log.config), config_to_json(scenario()));
}

TEST(Session, SnapshotsArriveAtTheConfiguredInterval) {
  SessionOptions o;
  o.snapshot_interval = 60000;
  Session s("a", scenario(), o);
  std::vector<Millis> times;
  s.set_snapshot_observer([&](const Simulation::Snapshot& snap) {
    times.push_back(snap.time);
    EXPECT_EQ(snap.taxis.size(), 5u);
  });
  s.next_decision();
  EXPECT_GE(times.size(), 59u);
  EXPECT_TRUE(std::is_sorted(times.begin(), times.end()));
}

// Runs a session mixing validated, amended and timed-out responses.
std::unique_ptr<Session> mixed_session() {
  auto c = scenario(8);
  c.bindings = {dispatcher(), taxi(2)};
  auto s = std::make_unique<Session>("m", c);
  int n = 0;
  bool amended = false;
  while (const auto d = as_decision(s->next_decision())) {
    const auto& pairs = d->is_dispatcher() ? std::get<DispatcherContext>(d->context).proposal.pairs
                                           : std::vector<MatchedPair<Millis>>{};
    if (!d->is_dispatcher() && n % 4 == 1) {
      s->submit_response(d->id, json{{"decision", "reject"}});
    } else if (!amended && pairs.size() >= 2) {
      const auto& ctx = std::get<DispatcherContext>(d->context);
      if (ctx.cost.feasible(pairs[0].request, pairs[1].taxi) && ctx.cost.feasible(pairs[1].request, pairs[0].taxi)) {
        json a = action_to_json(*d, ctx.proposal);
        std::swap(a["assignment"][0]["taxi"], a["assignment"][1]["taxi"]);
        s->submit_response(d->id, std::optional<json>(a));
        amended = true;
      } else {
        s->submit_response(d->id, std::nullopt);
      }
    } else if (n % 3 == 2) {
      s->timeout_decision(d->id);
    } else {
      s->submit_response(d->id, std::nullopt);
    }
    ++n;
  }
  return s;
}

TEST(Replay, LogRoundTripAndReplayReproduceTheSession) {
  const auto s = mixed_session();
  std::set<EntryKind> kinds;
  for (const auto& e : s->log()) kinds.insert(e.kind);
  EXPECT_EQ(kinds.size(), 3u);

  const auto text = s->export_action_log();
  std::stringstream in(text);
  const auto log = read_action_log(in);
  EXPECT_EQ(log.entries, s->log());
  EXPECT_EQ(action_log_jsonl(log), text);

  const auto replayed = replay_log(log.config, log);
  const auto live = s->outputs();
  EXPECT_EQ(replayed.trace_jsonl(), live.trace_jsonl());
  EXPECT_EQ(trips_csv(replayed.trips), trips_csv(live.trips));
  EXPECT_EQ(taxi_intervals_csv(replayed.taxis), taxi_intervals_csv(live.taxis));
  EXPECT_EQ(replayed.summary_csv(), live.summary_csv());
}

TEST(Replay, UsesTheLogBindingsWhenTheConfigHasNone) {
  const auto s = mixed_session();
  const auto log = s->action_log();
  auto plain = log.config;
  plain.bindings.clear();
  EXPECT_EQ(replay_log(plain, log).trace_jsonl(), s->outputs().trace_jsonl());
}

TEST(Replay, WrongSeedIsALogMismatch) {
  const auto s = mixed_session();
  const auto log = s->action_log();
  auto other = log.config;
  other.seed += 1;
  EXPECT_THROW(replay_log(other, log), LogMismatch);
}

TEST(Replay, DifferentScenarioIsALogMismatch) {
  const auto s = mixed_session();
  const auto log = s->action_log();
  auto other = log.config;
  other.fleet_size += 1;
  EXPECT_THROW(replay_log(other, log), LogMismatch);
}

TEST(Replay, TruncatedOrPaddedLogsAreMismatches) {
  const auto s = mixed_session();
  auto log = s->action_log();
  auto shorter = log;
  shorter.entries.pop_back();
  EXPECT_THROW(replay_log(log.config, shorter), LogMismatch);
  auto longer = log;
  longer.entries.push_back(log.entries.back());
  EXPECT_THROW(replay_log(log.config, longer), LogMismatch);
}

TEST(Replay, CorruptLogsAreRejected) {
  std::stringstream empty("");
  EXPECT_THROW(read_action_log(empty), InvalidConfig);
  std::stringstream garbage("{not json\n");
  EXPECT_THROW(read_action_log(garbage), InvalidConfig);
  const auto s = mixed_session();
  auto header = json::parse(s->export_action_log().substr(0, s->export_action_log().find('\n')));
  header["seed"] = 12345;
  std::stringstream tampered(header.dump() + "\n");
  EXPECT_THROW(read_action_log(tampered), InvalidConfig);
}

}  // namespace
}  // namespace taxisim
