#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "taxisim/server.hpp"

namespace taxisim {
namespace {

json scenario_json(int fleet = 5, double duration = 1800) {
  ScenarioConfig c;
  c.fleet_size = fleet;
  c.sim_duration = duration;
  c.seed = 8;
  return config_to_json(c);
}

// A headless client: records everything the endpoint sends.
struct Client {
  explicit Client(SessionManager& m) : endpoint(m, [this](const json& j) { inbox.push_back(j); }) {}

  void send(const json& j) { endpoint.handle(j.dump()); }

  std::vector<json> of_type(const std::string& type) const {
    std::vector<json> out;
    for (const auto& j : inbox)
      if (j.at("type") == type) out.push_back(j);
    return out;
  }

  const json& last() const { return inbox.back(); }

  std::vector<json> inbox;
  ProtocolEndpoint endpoint;
};

json create(int fleet, json bindings, json extra = json::object()) {
  json j{{"v", 1}, {"type", "create_session"}, {"config", scenario_json(fleet)}, {"bindings", bindings}};
  j.update(extra);
  return j;
}

TEST(Protocol, SessionRunsToCompletionWithValidatedDecisions) {
  SessionManager m(false);
  Client c(m);
  c.send(create(5, {{{"role", "dispatcher"}}}));
  ASSERT_EQ(c.last()["type"], "session_created");
  EXPECT_EQ(c.last()["session_id"], "s1");
  c.send({{"v", 1}, {"type", "start"}});
  std::size_t answered = 0;
  while (c.last()["type"] == "decision_prompt") {
    c.send({{"v", 1}, {"type", "response"}, {"decision_id", c.last()["decision_id"]}, {"action", "validate"}});
    ++answered;
  }
  EXPECT_GT(answered, 5u);
  EXPECT_EQ(c.last()["type"], "finished");
  EXPECT_EQ(c.last()["decisions"], answered);
  const auto logged = c.of_type("decision_logged");
  ASSERT_EQ(logged.size(), answered);
  EXPECT_EQ(logged[0]["entry"]["kind"], "validated");
  EXPECT_EQ(c.of_type("metrics_update").size(), answered + 1);
  EXPECT_TRUE(c.of_type("error").empty());

  ScenarioConfig plain = config_from_json(scenario_json(5));
  const auto automated = run(plain);
  EXPECT_EQ(c.last()["report"], metrics_to_json(automated.report));
}

TEST(Protocol, AmendedAndRejectedResponses) {
  SessionManager m(false);
  Client c(m);
  c.send(create(4, {{{"role", "taxi"}, {"id", 1}}}));
  c.send({{"type", "start"}});
  ASSERT_EQ(c.last()["type"], "decision_prompt");
  EXPECT_EQ(c.last()["role"], "taxi:1");
  EXPECT_EQ(c.last()["proposal"]["decision"], "accept");
  const auto id = c.last()["decision_id"];
  c.send({{"type", "response"}, {"decision_id", id}, {"action", {{"decision", "maybe"}}}});
  EXPECT_EQ(c.last()["type"], "error");
  EXPECT_EQ(c.last()["error"], "MalformedAction");
  c.send({{"type", "response"}, {"decision_id", id}, {"action", {{"decision", "reject"}}}, {"responder", "bob"}});
  const auto logged = c.of_type("decision_logged");
  ASSERT_EQ(logged.size(), 1u);
  EXPECT_EQ(logged[0]["entry"]["kind"], "amended");
  EXPECT_EQ(logged[0]["entry"]["responder"], "bob");
  c.send({{"type", "response"}, {"decision_id", id}});
  EXPECT_EQ(c.last()["type"], "error");
  EXPECT_EQ(c.last()["error"], "StaleDecision");
}

TEST(Protocol, ReservedResponderAndUnknownTypes) {
  SessionManager m(false);
  Client c(m);
  c.send({{"type", "start"}});
  EXPECT_EQ(c.last()["error"], "UnknownSession");
  c.send(create(3, {{{"role", "dispatcher"}}}));
  c.send({{"type", "start"}});
  c.send({{"type", "response"}, {"decision_id", c.last()["decision_id"]}, {"responder", "system"}});
  EXPECT_EQ(c.last()["error"], "MalformedAction");
  c.send({{"type", "teleport"}});
  EXPECT_EQ(c.last()["error"], "MalformedAction");
  c.endpoint.handle("not json");
  EXPECT_EQ(c.last()["error"], "MalformedAction");
  c.send({{"v", 2}, {"type", "start"}});
  EXPECT_EQ(c.last()["error"], "MalformedAction");
}

TEST(Protocol, InvalidConfigsAndUnknownAgents) {
  SessionManager m(false);
  Client c(m);
  c.send(create(3, {{{"role", "taxi"}, {"id", 7}}}));
  EXPECT_EQ(c.last()["error"], "UnknownAgent");
  json bad = create(3, json::array());
  bad["config"]["colour"] = "red";
  c.send(bad);
  EXPECT_EQ(c.last()["error"], "InvalidConfig");
  c.send(create(3, {{{"role", "pilot"}}}));
  EXPECT_EQ(c.last()["error"], "InvalidConfig");
  EXPECT_TRUE(m.ids().empty());
}

TEST(Protocol, SecondClientBindsARole) {
  SessionManager m(false);
  Client a(m), b(m);
  a.send(create(4, {{{"role", "dispatcher"}}}));
  b.send({{"type", "bind"}, {"session_id", "s1"}, {"role", "taxi"}, {"id", 2}});
  EXPECT_EQ(b.last()["type"], "bound");
  a.send({{"type", "start"}});
  std::set<std::string> roles;
  for (int i = 0; i < 400 && a.last()["type"] == "decision_prompt"; ++i) {
    roles.insert(a.last()["role"].get<std::string>());
    auto& who = a.last()["role"] == "dispatcher" ? a : b;
    who.send({{"type", "response"}, {"decision_id", a.last()["decision_id"]}});
  }
  EXPECT_TRUE(roles.contains("dispatcher"));
  EXPECT_TRUE(roles.contains("taxi:2"));
  EXPECT_EQ(a.of_type("decision_prompt").size(), b.of_type("decision_prompt").size());
  b.send({{"type", "bind"}, {"session_id", "s1"}, {"role", "taxi"}, {"id", 3}});
  EXPECT_EQ(b.last()["error"], "InvalidConfig");
}

TEST(Protocol, AbortEndsTheSession) {
  SessionManager m(false);
  Client c(m);
  c.send(create(3, {{{"role", "dispatcher"}}}));
  c.send({{"type", "start"}});
  c.send({{"type", "abort"}});
  EXPECT_EQ(c.last()["type"], "finished");
  EXPECT_EQ(c.last()["state"], "aborted");
  c.send({{"type", "response"}, {"decision_id", 0}});
  EXPECT_EQ(c.last()["error"], "SessionAborted");
}

TEST(Protocol, SnapshotsAreStreamed) {
  SessionManager m(false);
  Client c(m);
  c.send(create(3, json::array(), {{"snapshot_interval", 300}}));
  c.send({{"type", "start"}});
  const auto snaps = c.of_type("snapshot");
  ASSERT_GE(snaps.size(), 5u);
  EXPECT_EQ(snaps[0]["taxis"].size(), 3u);
  EXPECT_EQ(c.last()["type"], "finished");
}

TEST(Protocol, TimeoutsApplyTheProposal) {
  std::int64_t now = 0;
  SessionManager m(false, [&] { return now; });
  Client c(m);
  c.send(create(3, {{{"role", "dispatcher"}}}, {{"timeout", 5}}));
  c.send({{"type", "start"}});
  const auto id = c.last()["decision_id"];
  now = 4999;
  EXPECT_EQ(m.poll_timeouts(), 0u);
  now = 5000;
  EXPECT_EQ(m.poll_timeouts(), 1u);
  const auto logged = c.of_type("decision_logged");
  ASSERT_EQ(logged.size(), 1u);
  EXPECT_EQ(logged[0]["entry"]["kind"], "auto");
  EXPECT_EQ(logged[0]["entry"]["responder"], "system");
  c.send({{"type", "response"}, {"decision_id", id}});
  EXPECT_EQ(c.last()["error"], "StaleDecision");
}

TEST(Protocol, NullTimeoutWaitsForever) {
  std::int64_t now = 0;
  SessionManager m(false, [&] { return now; });
  Client c(m);
  c.send(create(3, {{{"role", "dispatcher"}}}, {{"timeout", nullptr}}));
  c.send({{"type", "start"}});
  now = 1'000'000'000;
  EXPECT_EQ(m.poll_timeouts(), 0u);
}

TEST(Http, CreateListFetchAndLog) {
  SessionManager m(false);
  auto r = handle_http(m, "POST", "/sessions", json{{"config", scenario_json(3)}}.dump());
  EXPECT_EQ(r.status, 201);
  EXPECT_EQ(json::parse(r.body)["session_id"], "s1");
  EXPECT_EQ(json::parse(r.body)["state"], "created");

  r = handle_http(m, "GET", "/sessions", "");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body).size(), 1u);

  r = handle_http(m, "GET", "/sessions/s1/", "");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body)["config_hash"], config_hash(config_from_json(scenario_json(3))));

  EXPECT_EQ(handle_http(m, "GET", "/sessions/s1/log", "").status, 409);
  Client c(m);
  c.send({{"type", "bind"}, {"session_id", "s1"}});
  c.send({{"type", "start"}});
  ASSERT_EQ(c.last()["type"], "finished");
  r = handle_http(m, "GET", "/sessions/s1/log", "");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "application/x-ndjson");
  std::stringstream in(r.body);
  EXPECT_TRUE(read_action_log(in).entries.empty());
}

TEST(Http, Errors) {
  SessionManager m(false);
  EXPECT_EQ(handle_http(m, "GET", "/sessions/s9", "").status, 404);
  EXPECT_EQ(handle_http(m, "GET", "/sessions/s9/log", "").status, 404);
  EXPECT_EQ(handle_http(m, "GET", "/elsewhere", "").status, 404);
  EXPECT_EQ(handle_http(m, "DELETE", "/sessions", "").status, 405);
  EXPECT_EQ(handle_http(m, "POST", "/sessions/s1", "").status, 405);
  const auto bad = handle_http(m, "POST", "/sessions", "{");
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(json::parse(bad.body)["error"], "InvalidConfig");
  EXPECT_EQ(handle_http(m, "POST", "/sessions", R"({"pacing":{"mode":"slow"}})").status, 400);
}

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

http::response<http::string_body> http_request(unsigned short port, http::verb verb, const std::string& target,
                                               const std::string& body = {}) {
  net::io_context ioc;
  tcp::resolver resolver(ioc);
  beast::tcp_stream stream(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  req.set(http::field::content_type, "application/json");
  req.body() = body;
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return res;
}

TEST(Server, WebSocketSessionAndHttpLog) {
  SessionManager manager;
  Server server(manager, "127.0.0.1", 0);
  server.start();

  net::io_context ioc;
  tcp::resolver resolver(ioc);
  websocket::stream<tcp::socket> ws(ioc);
  net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/ws");
  const auto send = [&](const json& j) { ws.write(net::buffer(j.dump())); };
  const auto receive = [&] {
    beast::flat_buffer buffer;
    ws.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  };

  send(create(4, {{{"role", "dispatcher"}}}));
  const auto created = receive();
  ASSERT_EQ(created["type"], "session_created");
  const std::string id = created["session_id"];
  send({{"type", "start"}});

  std::size_t prompts = 0;
  bool amended = false;
  for (;;) {
    const auto msg = receive();
    if (msg["type"] == "finished") break;
    ASSERT_NE(msg["type"], "error") << msg.dump();
    if (msg["type"] != "decision_prompt") continue;
    ++prompts;
    json response{{"type", "response"}, {"decision_id", msg["decision_id"]}};
    if (!amended) {
      response["action"] = {{"assignment", json::array()}};
      amended = true;
    }
    send(response);
  }
  EXPECT_GT(prompts, 3u);

  auto res = http_request(server.port(), http::verb::get, "/sessions/" + id + "/log");
  EXPECT_EQ(res.result_int(), 200);
  std::stringstream in(res.body());
  const auto log = read_action_log(in);
  EXPECT_EQ(log.entries.size(), prompts);
  EXPECT_EQ(log.entries[0].kind, EntryKind::Amended);
  const auto replayed = replay_log(log.config, log);
  EXPECT_EQ(replayed.summary_csv(),
            manager.find(id)->with_session([](Session& s) { return s.outputs().summary_csv(); }));

  res = http_request(server.port(), http::verb::post, "/sessions", json{{"config", scenario_json(2)}}.dump());
  EXPECT_EQ(res.result_int(), 201);
  res = http_request(server.port(), http::verb::get, "/sessions");
  EXPECT_EQ(json::parse(res.body()).size(), 2u);

  ws.close(websocket::close_code::normal);
  server.stop();
}

}  // namespace
}  // namespace taxisim
