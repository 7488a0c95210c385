#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "amulet/scorer.hpp"
#include "corpus.hpp"

using namespace amulet;
using nlohmann::json;

namespace {

ScoreRequest req(std::vector<std::pair<Role, std::string>> msgs, std::string response) {
  return ScoreRequest{std::move(msgs), std::move(response)};
}

// Expected values computed with Python's hashlib/json over the same canonical
// bytes (sort_keys, compact separators, ensure_ascii=False).
struct Frozen {
  ScoreRequest request;
  std::string canonical;
  double score;
};

std::vector<Frozen> frozen() {
  return {
      {req({{Role::Human, "hello"}}, "hi there"),
       R"({"messages":[{"role":"human","text":"hello"}],"response":"hi there"})", 0.17824057196086432},
      {req({{Role::Human, "what is 2+2?"}, {Role::Assistant, "4"}, {Role::Human, "and the caf\xC3\xA9 \"menu\"?"}},
           "It is closed."),
       "{\"messages\":[{\"role\":\"human\",\"text\":\"what is 2+2?\"},{\"role\":\"assistant\",\"text\":\"4\"},"
       "{\"role\":\"human\",\"text\":\"and the caf\xC3\xA9 \\\"menu\\\"?\"}],\"response\":\"It is closed.\"}",
       0.7278560785820697},
      {req({}, ""), R"({"messages":[],"response":""})", 0.8776678897820674},
  };
}

struct ScoreServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  std::atomic<bool> loading{false};

  ScoreServer() {
    server.Post("/v1/score", [this](const httplib::Request& r, httplib::Response& res) {
      ++hits;
      json body;
      try {
        body = json::parse(r.body);
      } catch (...) {
        res.status = 400;
        return;
      }
      if (!body.contains("messages") || !body.contains("response") || !body["response"].is_string()) {
        res.status = 400;
        res.set_content(R"({"error":"schema"})", "application/json");
        return;
      }
      const std::string resp = body["response"];
      if (resp == "overload") {
        res.status = 503;
        return;
      }
      if (resp == "garbage") {
        res.set_content("not json", "text/plain");
        return;
      }
      ScoreRequest sr;
      for (const auto& m : body["messages"]) {
        sr.messages.emplace_back(m["role"] == "human" ? Role::Human : Role::Assistant, m["text"].get<std::string>());
      }
      sr.response = resp;
      res.set_content(json{{"score", mock_score(sr)}, {"model_id", "mock"}}.dump(), "application/json");
    });
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      if (loading) {
        res.status = 503;
        res.set_content(R"({"status":"loading","model_id":"rm-small","mode":"real"})", "application/json");
        return;
      }
      res.set_content(R"({"status":"ready","model_id":"mock","mode":"mock"})", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~ScoreServer() {
    server.stop();
    thread.join();
  }
  HttpScorer client() const {
    HttpScorerConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port);
    c.timeout = std::chrono::milliseconds(5000);
    return HttpScorer(c);
  }
};

class CountingScorer : public Scorer {
 public:
  double score(const ScoreRequest& r) override {
    ++calls;
    return mock_score(r);
  }
  std::string id() const override { return "counting"; }
  int calls = 0;
};

}  // namespace

TEST_CASE("canonical request bytes and mock scores match the frozen values") {
  for (const auto& f : frozen()) {
    CHECK(f.request.canonical() == f.canonical);
    CHECK(mock_score(f.request) == f.score);
    CHECK(MockScorer().score(f.request) == f.score);
  }
}

TEST_CASE("mock scores are deterministic and lie in [0, 1)") {
  for (const auto& e : testing::synthetic_instances(100, 31)) {
    for (Choice c : {Choice::A, Choice::B}) {
      auto r = ScoreRequest::from(e, c);
      const double s = mock_score(r);
      CHECK(s >= 0.0);
      CHECK(s < 1.0);
      CHECK(mock_score(r) == s);
    }
    CHECK(ScoreRequest::from(e, Choice::A).response == e.response_a);
  }
}

TEST_CASE("http scorer client against a local mock service") {
  ScoreServer srv;
  auto client = srv.client();
  SUBCASE("scores agree with the built-in mock") {
    for (const auto& f : frozen()) CHECK(client.score(f.request) == f.score);
    for (const auto& e : testing::synthetic_instances(20, 2)) {
      auto r = ScoreRequest::from(e, Choice::B);
      CHECK(client.score(r) == mock_score(r));
    }
  }
  SUBCASE("service errors become ScorerFailed") {
    CHECK_THROWS_AS(client.score(req({{Role::Human, "x"}}, "overload")), ScorerFailed);
    CHECK_THROWS_AS(client.score(req({{Role::Human, "x"}}, "garbage")), ScorerFailed);
  }
  SUBCASE("health states") {
    auto h = client.health();
    CHECK(h.ready());
    CHECK(h.status == "ready");
    CHECK(h.mode == "mock");
    srv.loading = true;
    auto loading = client.health();
    CHECK_FALSE(loading.ready());
    CHECK(loading.http_status == 503);
    CHECK(loading.status == "loading");
    CHECK(loading.model_id == "rm-small");
  }
}

TEST_CASE("schema rejections surface as ScorerFailed") {
  httplib::Server server;
  server.Post("/v1/score", [](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content(R"({"error":"messages must be a list"})", "application/json");
  });
  server.Post("/nan/v1/score", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"score":"NaN"})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  HttpScorer bad({"http://127.0.0.1:" + std::to_string(port), "http", std::chrono::milliseconds(2000)});
  CHECK_THROWS_AS(bad.score(req({}, "x")), ScorerFailed);
  HttpScorer nan({"http://127.0.0.1:" + std::to_string(port) + "/nan", "http", std::chrono::milliseconds(2000)});
  CHECK_THROWS_AS(nan.score(req({}, "x")), ScorerFailed);
  server.stop();
  t.join();
}

TEST_CASE("unreachable scorer") {
  HttpScorer client({"http://127.0.0.1:1", "http", std::chrono::milliseconds(500)});
  CHECK_THROWS_AS(client.score(req({}, "x")), ScorerFailed);
  auto h = client.health();
  CHECK(h.http_status == 0);
  CHECK_FALSE(h.ready());
}

TEST_CASE("cached scorer stores once and replays offline") {
  AppendLog log;
  CountingScorer inner;
  CachedScorer live(log, "rm", BackendMode::Live, &inner);
  auto r = frozen()[0].request;
  CHECK(live.score(r) == frozen()[0].score);
  CHECK(live.score(r) == frozen()[0].score);
  CHECK(inner.calls == 1);
  CHECK(log.size() == 1);

  CachedScorer replay(log, "rm", BackendMode::Replay);
  CHECK(replay.score(r) == frozen()[0].score);
  CHECK_THROWS_AS(replay.score(frozen()[1].request), ReplayMiss);

  CachedScorer other_id(log, "rm2", BackendMode::Replay);
  CHECK_THROWS_AS(other_id.score(r), ReplayMiss);
}
