// Gateway behavior: replay never touches the network, record persists rows
// that a fresh store can replay, and the retry loop distinguishes retriable
// from fatal failures with exponential backoff.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibench/gateway.hpp"
#include "calibench/hash.hpp"

namespace fs = std::filesystem;
using namespace calibench;
using nlohmann::json;

namespace {

// Scripted transport: replays a fixed sequence of outcomes and records every
// request it sees. An outcome with `throws` set raises instead of returning.
struct ScriptedTransport : gateway::Transport {
  struct Outcome {
    bool throws = false;
    gateway::HttpResponse response;
  };
  struct Call {
    std::string base_url, path, body;
    std::vector<gateway::Header> headers;
  };

  std::vector<Outcome> script;
  std::vector<Call> calls;

  gateway::HttpResponse post(const std::string& base_url, const std::string& path,
                             const std::vector<gateway::Header>& headers,
                             const std::string& body) override {
    calls.push_back({base_url, path, body, headers});
    REQUIRE(calls.size() <= script.size());
    const Outcome& o = script[calls.size() - 1];
    if (o.throws) throw std::runtime_error("connection reset");
    return o.response;
  }
};

std::string completion_body(const std::string& text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

gateway::EndpointConfig test_endpoint() {
  gateway::EndpointConfig ep;
  ep.id = "mock";
  ep.base_url = "http://unit.test";
  ep.model = "mock-model-1";
  return ep;
}

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "calibench_gateway_tests";
  fs::create_directories(dir);
  fs::path p = dir / name;
  fs::remove(p);
  return p;
}

}  // namespace

TEST_CASE("content key is the sha256 of model newline prompt", "[gateway]") {
  const std::string model = "gpt-test";
  const std::string prompt = "Estimate ranges.";
  CHECK(gateway::content_key(model, prompt) == hash::sha256_hex("gpt-test\nEstimate ranges."));
  // Moving a character across the separator must change the key.
  CHECK(gateway::content_key("gpt-tes", "tEstimate ranges.") !=
        gateway::content_key(model, prompt));
}

TEST_CASE("replay mode serves stored answers without a transport", "[gateway]") {
  gateway::ReplayStore store;
  const std::string key = gateway::content_key("mock-model-1", "hello");
  store.put(key, "mock-model-1", hash::sha256_hex("hello"), "stored answer");

  gateway::ModelGateway gw(gateway::QueryMode::Replay, test_endpoint(), nullptr, &store);
  CHECK(gw.query("hello") == "stored answer");
}

TEST_CASE("replay miss names the missing key", "[gateway]") {
  gateway::ReplayStore store;
  gateway::ModelGateway gw(gateway::QueryMode::Replay, test_endpoint(), nullptr, &store);

  const std::string expect_key = gateway::content_key("mock-model-1", "unseen prompt");
  try {
    gw.query("unseen prompt");
    FAIL("expected ReplayMissError");
  } catch (const gateway::ReplayMissError& e) {
    CHECK(e.key == expect_key);
    CHECK(std::string(e.what()) == "replay store has no entry for key " + expect_key);
  }
}

TEST_CASE("record mode posts once and persists a replayable row", "[gateway]") {
  ScriptedTransport transport;
  transport.script = {{false, {200, completion_body("recorded text")}}};

  fs::path file = temp_file("record.jsonl");
  gateway::ReplayStore store;
  store.open_append(file);

  gateway::ModelGateway gw(gateway::QueryMode::Record, test_endpoint(), &transport, &store);
  CHECK(gw.query("the prompt") == "recorded text");
  CHECK(transport.calls.size() == 1);
  CHECK(store.size() == 1);

  // Row format on disk: {key, model, prompt_sha, response}.
  std::ifstream in(file);
  std::string line;
  REQUIRE(std::getline(in, line));
  json row = json::parse(line);
  CHECK(row.at("key") == gateway::content_key("mock-model-1", "the prompt"));
  CHECK(row.at("model") == "mock-model-1");
  CHECK(row.at("prompt_sha") == hash::sha256_hex("the prompt"));
  CHECK(row.at("response") == "recorded text");

  // A fresh store loaded from that file replays the answer with no transport.
  gateway::ReplayStore replayed;
  replayed.load_file(file);
  gateway::ModelGateway gw2(gateway::QueryMode::Replay, test_endpoint(), nullptr, &replayed);
  CHECK(gw2.query("the prompt") == "recorded text");
}

TEST_CASE("request body carries model, prompt, and optional temperature", "[gateway]") {
  ScriptedTransport transport;
  transport.script = {{false, {200, completion_body("ok")}},
                      {false, {200, completion_body("ok")}}};

  auto ep = test_endpoint();
  gateway::ModelGateway gw(gateway::QueryMode::Live, ep, &transport, nullptr);
  gw.query("ping");

  json body = json::parse(transport.calls[0].body);
  CHECK(body.at("model") == "mock-model-1");
  CHECK(body.at("messages")[0].at("role") == "user");
  CHECK(body.at("messages")[0].at("content") == "ping");
  CHECK_FALSE(body.contains("temperature"));
  CHECK(transport.calls[0].base_url == "http://unit.test");
  CHECK(transport.calls[0].path == "/v1/chat/completions");

  ep.temperature = 0.25;
  gateway::ModelGateway gw_temp(gateway::QueryMode::Live, ep, &transport, nullptr);
  gw_temp.query("ping");
  json body2 = json::parse(transport.calls[1].body);
  CHECK(body2.at("temperature") == Catch::Approx(0.25));
}

TEST_CASE("retriable failures back off exponentially then succeed", "[gateway]") {
  ScriptedTransport transport;
  transport.script = {{true, {}},                           // connection-level failure
                      {false, {503, "overloaded"}},         // retriable status
                      {false, {200, completion_body("eventually")}}};

  std::vector<double> naps;
  auto ep = test_endpoint();
  ep.max_retries = 3;
  ep.backoff_base_s = 0.5;
  gateway::ModelGateway gw(gateway::QueryMode::Live, ep, &transport, nullptr,
                           [&](double s) { naps.push_back(s); });

  CHECK(gw.query("flaky") == "eventually");
  CHECK(transport.calls.size() == 3);
  REQUIRE(naps.size() == 2);
  CHECK(naps[0] == Catch::Approx(0.5));
  CHECK(naps[1] == Catch::Approx(1.0));
}

TEST_CASE("retry exhaustion reports the attempt count and last error", "[gateway]") {
  ScriptedTransport transport;
  transport.script = {{false, {429, ""}}, {false, {500, ""}}, {false, {502, ""}}};

  std::vector<double> naps;
  auto ep = test_endpoint();
  ep.max_retries = 2;
  gateway::ModelGateway gw(gateway::QueryMode::Live, ep, &transport, nullptr,
                           [&](double s) { naps.push_back(s); });

  CHECK_THROWS_MATCHES(gw.query("p"), gateway::TransportError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("retries exhausted after 3")));
  CHECK(transport.calls.size() == 3);
  CHECK(naps.size() == 2);
}

TEST_CASE("client errors are fatal without retry", "[gateway]") {
  ScriptedTransport transport;
  transport.script = {{false, {400, "bad request"}}};

  std::vector<double> naps;
  gateway::ModelGateway gw(gateway::QueryMode::Live, test_endpoint(), &transport, nullptr,
                           [&](double s) { naps.push_back(s); });

  CHECK_THROWS_MATCHES(gw.query("p"), gateway::TransportError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("non-retriable status 400")));
  CHECK(transport.calls.size() == 1);
  CHECK(naps.empty());
}

TEST_CASE("bearer token comes from the configured environment variable", "[gateway]") {
  ScriptedTransport transport;
  transport.script = {{false, {200, completion_body("ok")}}};

  auto ep = test_endpoint();
  ep.auth_env = "CALIBENCH_TEST_TOKEN";

  ::unsetenv("CALIBENCH_TEST_TOKEN");
  gateway::ModelGateway gw(gateway::QueryMode::Live, ep, &transport, nullptr);
  CHECK_THROWS_AS(gw.query("p"), gateway::TransportError);
  CHECK(transport.calls.empty());  // auth failure happens before any post

  ::setenv("CALIBENCH_TEST_TOKEN", "sekrit", 1);
  gw.query("p");
  ::unsetenv("CALIBENCH_TEST_TOKEN");

  REQUIRE(transport.calls.size() == 1);
  bool saw_auth = false;
  for (const auto& [name, value] : transport.calls[0].headers) {
    if (name == "Authorization") {
      saw_auth = true;
      CHECK(value == "Bearer sekrit");
    }
  }
  CHECK(saw_auth);
}

TEST_CASE("malformed completion payloads are transport errors", "[gateway]") {
  ScriptedTransport transport;
  transport.script = {{false, {200, "{\"choices\": []}"}}};

  gateway::ModelGateway gw(gateway::QueryMode::Live, test_endpoint(), &transport, nullptr);
  CHECK_THROWS_MATCHES(gw.query("p"), gateway::TransportError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("malformed completion response")));
}

TEST_CASE("constructor enforces mode prerequisites", "[gateway]") {
  gateway::ReplayStore store;
  CHECK_THROWS_AS(
      gateway::ModelGateway(gateway::QueryMode::Live, test_endpoint(), nullptr, nullptr),
      std::invalid_argument);
  ScriptedTransport transport;
  CHECK_THROWS_AS(
      gateway::ModelGateway(gateway::QueryMode::Record, test_endpoint(), &transport, nullptr),
      std::invalid_argument);
  CHECK_NOTHROW(
      gateway::ModelGateway(gateway::QueryMode::Replay, test_endpoint(), nullptr, &store));
}

TEST_CASE("query mode keys round-trip", "[gateway]") {
  using gateway::QueryMode;
  for (auto m : {QueryMode::Live, QueryMode::Record, QueryMode::Replay})
    CHECK(gateway::query_mode_from_key(gateway::query_mode_key(m)) == m);
  CHECK_THROWS_AS(gateway::query_mode_from_key("offline"), std::invalid_argument);
}
