#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <thread>

#include "amulet/backend.hpp"
#include "amulet/digest.hpp"

using namespace amulet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("amulet_test_backend_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ChatRequest request(const std::string& id, const std::string& prompt = "prompt text") {
  ChatRequest r;
  r.prompt = prompt;
  r.model = "judge-model";
  r.key = {id, PromptKind::IO, ResponseOrder::Original, "judge-model", "hash", 1};
  return r;
}

class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::size_t rejections, bool refuse = false) : rejections_(rejections), refuse_(refuse) {}
  ChatResponse complete(const ChatRequest& req) override {
    const std::size_t n = ++calls_;
    attempts_seen.push_back(req.key.attempt);
    ChatResponse r;
    if (n <= rejections_) {
      r.refused = refuse_;
      r.text = refuse_ ? "" : "bad " + std::to_string(n);
    } else {
      r.text = "ok";
    }
    return r;
  }
  std::size_t calls() const { return calls_; }
  std::vector<std::size_t> attempts_seen;

 private:
  std::size_t rejections_;
  bool refuse_;
  std::atomic<std::size_t> calls_{0};
};

class SlowEcho : public ChatBackend {
 public:
  ChatResponse complete(const ChatRequest& req) override {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    ChatResponse r;
    r.text = "echo:" + req.prompt;
    return r;
  }
  std::atomic<int> calls{0};
};

const Validator kAcceptOk = [](const std::string& t) -> std::optional<std::string> {
  if (t == "ok") return std::nullopt;
  return "not ok";
};

}  // namespace

TEST_CASE("transcript keys") {
  TranscriptKey k{"id-1", PromptKind::DA, ResponseOrder::Swapped, "m", "h", 3};
  CHECK(k.str() == "id-1|DA|swapped|m|h|3");
  CHECK(TranscriptKey::from_json(k.to_json()) == k);
}

TEST_CASE("append log persists, reopens and refuses overwrites") {
  auto dir = temp_dir("log");
  const auto path = dir / "log.jsonl";
  {
    AppendLog log(path);
    log.put("a", json{{"v", 1}});
    log.put("b", json{{"v", 2}});
    CHECK_THROWS_AS(log.put("a", json{{"v", 3}}), CacheConflict);
  }
  AppendLog reopened(path);
  CHECK(reopened.size() == 2);
  CHECK((*reopened.get("a"))["v"] == 1);
  CHECK_FALSE(reopened.get("zzz").has_value());
  fs::remove_all(dir);
}

TEST_CASE("a torn final line is truncated on open") {
  auto dir = temp_dir("torn");
  const auto path = dir / "log.jsonl";
  {
    AppendLog log(path);
    log.put("a", json{{"v", 1}});
  }
  {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << R"({"key":"b","payl)";
  }
  {
    AppendLog log(path);
    CHECK(log.size() == 1);
    log.put("b", json{{"v", 2}});
  }
  AppendLog again(path);
  CHECK(again.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("corrupted records are rejected") {
  auto dir = temp_dir("corrupt");
  const auto path = dir / "log.jsonl";
  {
    AppendLog log(path);
    log.put("a", json{{"v", 1}});
  }
  std::string content;
  {
    std::ifstream in(path);
    std::getline(in, content);
  }
  SUBCASE("checksum mismatch") {
    auto edited = content;
    edited.replace(edited.find("\"v\":1"), 5, "\"v\":2");
    std::ofstream(path, std::ios::trunc) << edited << "\n";
    CHECK_THROWS_AS(AppendLog{path}, CorruptLog);
  }
  SUBCASE("malformed line") {
    std::ofstream(path, std::ios::trunc) << "garbage\n" << content << "\n";
    CHECK_THROWS_AS(AppendLog{path}, CorruptLog);
  }
  SUBCASE("duplicate key") {
    std::ofstream(path, std::ios::trunc) << content << "\n" << content << "\n";
    CHECK_THROWS_AS(AppendLog{path}, CorruptLog);
  }
  fs::remove_all(dir);
}

TEST_CASE("cached backend serves hits and calls live once per key") {
  TranscriptStore store;
  ScriptedBackend live(0);
  CachedBackend cached(store, BackendMode::Live, &live);
  auto r1 = cached.complete(request("x"));
  auto r2 = cached.complete(request("x"));
  CHECK(r1.text == "ok");
  CHECK(r2.text == "ok");
  CHECK(live.calls() == 1);
  CHECK(cached.hits() == 1);
  CHECK(cached.live_calls() == 1);
  CHECK(r2.metadata["message_layout"] == "single_user_message");

  SUBCASE("a changed prompt under the same key is a conflict") {
    CHECK_THROWS_AS(cached.complete(request("x", "another prompt")), CacheConflict);
  }
  SUBCASE("replay serves stored records and fails loudly on a miss") {
    CachedBackend replay(store, BackendMode::Replay);
    CHECK(replay.complete(request("x")).text == "ok");
    try {
      replay.complete(request("y"));
      FAIL("expected ReplayMiss");
    } catch (const ReplayMiss& e) {
      CHECK(e.key() == request("y").key.str());
    }
  }
}

TEST_CASE("transcripts survive a restart byte-exactly") {
  auto dir = temp_dir("store");
  const std::string tricky = "line one\n  \"quoted\" \xE2\x80\x9C curly \xE2\x80\x9D\ttab";
  {
    TranscriptStore store(dir / "t.jsonl");
    store.put({request("x").key, sha256_hex("prompt text"), ChatResponse{tricky, false, 12.5, json{{"k", "v"}}}});
  }
  TranscriptStore store(dir / "t.jsonl");
  CachedBackend replay(store, BackendMode::Replay);
  auto r = replay.complete(request("x"));
  CHECK(r.text == tricky);
  CHECK(r.latency_ms == 12.5);
  CHECK(r.metadata["k"] == "v");
  CHECK(store.records().size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("concurrent misses on one key are coalesced") {
  TranscriptStore store;
  SlowEcho live;
  CachedBackend cached(store, BackendMode::Live, &live);
  std::vector<std::thread> threads;
  std::vector<std::string> texts(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { texts[i] = cached.complete(request(i % 2 ? "odd" : "even")).text; });
  }
  for (auto& t : threads) t.join();
  CHECK(live.calls == 2);
  for (const auto& t : texts) CHECK(t == "echo:prompt text");
}

TEST_CASE("format retries stop at the first accepted attempt") {
  for (std::size_t n = 0; n <= 5; ++n) {
    ScriptedBackend b(n);
    auto out = complete_with_format_retries(b, request("r"), kAcceptOk);
    REQUIRE(std::holds_alternative<Accepted>(out));
    CHECK(std::get<Accepted>(out).attempts == n + 1);
    CHECK(b.calls() == n + 1);
    for (std::size_t i = 0; i < b.attempts_seen.size(); ++i) CHECK(b.attempts_seen[i] == i + 1);
  }
  ScriptedBackend b(6);
  auto out = complete_with_format_retries(b, request("r"), kAcceptOk);
  REQUIRE(std::holds_alternative<InstanceFailure>(out));
  CHECK(std::get<InstanceFailure>(out).raw_texts.size() == 6);
  CHECK(std::get<InstanceFailure>(out).raw_texts[5] == "bad 6");
  CHECK(b.calls() == 6);

  ScriptedBackend capped(100);
  complete_with_format_retries(capped, request("r"), kAcceptOk, 50);
  CHECK(capped.calls() == kMaxAttempts);
}

TEST_CASE("refusals consume attempts") {
  ScriptedBackend b(2, true);
  auto out = complete_with_format_retries(b, request("r"), kAcceptOk);
  REQUIRE(std::holds_alternative<Accepted>(out));
  CHECK(std::get<Accepted>(out).attempts == 3);

  ScriptedBackend always(10, true);
  auto fail = complete_with_format_retries(always, request("r"), kAcceptOk);
  REQUIRE(std::holds_alternative<InstanceFailure>(fail));
  CHECK(std::get<InstanceFailure>(fail).errors[0] == "refused");
}

namespace {

struct ChatServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  json last_body;
  std::string last_auth;
  std::mutex mu;

  explicit ChatServer(std::function<void(int, const json&, httplib::Response&)> handler) {
    server.Post("/api/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits;
      json body = json::parse(req.body);
      {
        std::lock_guard lock(mu);
        last_body = body;
        last_auth = req.get_header_value("Authorization");
      }
      handler(n, body, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~ChatServer() {
    server.stop();
    thread.join();
  }
  HttpBackendConfig config() const {
    HttpBackendConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/api/";
    c.api_key = "secret";
    c.timeout = std::chrono::milliseconds(5000);
    c.transport_retries = 2;
    c.backoff = std::chrono::milliseconds(1);
    return c;
  }
};

json completion(const std::string& content, const std::string& finish = "stop") {
  return {{"model", "served-model"},
          {"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}},
                                     {"finish_reason", finish}}})},
          {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 2}}}};
}

}  // namespace

TEST_CASE("http chat backend speaks the chat-completions protocol") {
  ChatServer srv([](int, const json&, httplib::Response& res) {
    res.set_content(completion("{\"Answer\": \"1\"}").dump(), "application/json");
  });
  HttpChatBackend backend(srv.config());
  auto r = backend.complete(request("x", "the whole prompt"));
  CHECK(r.text == "{\"Answer\": \"1\"}");
  CHECK_FALSE(r.refused);
  CHECK(r.metadata["finish_reason"] == "stop");
  CHECK(r.metadata["usage"]["prompt_tokens"] == 10);
  std::lock_guard lock(srv.mu);
  CHECK(srv.last_auth == "Bearer secret");
  CHECK(srv.last_body["model"] == "judge-model");
  CHECK(srv.last_body["temperature"] == 0.0);
  REQUIRE(srv.last_body["messages"].size() == 1);
  CHECK(srv.last_body["messages"][0]["role"] == "user");
  CHECK(srv.last_body["messages"][0]["content"] == "the whole prompt");
}

TEST_CASE("http chat backend retries server errors, then gives up") {
  SUBCASE("recovers after a 503") {
    ChatServer srv([](int n, const json&, httplib::Response& res) {
      if (n == 1) {
        res.status = 503;
        return;
      }
      res.set_content(completion("fine").dump(), "application/json");
    });
    HttpChatBackend backend(srv.config());
    CHECK(backend.complete(request("x")).text == "fine");
    CHECK(srv.hits == 2);
  }
  SUBCASE("persistent 500 raises BackendUnavailable") {
    ChatServer srv([](int, const json&, httplib::Response& res) { res.status = 500; });
    HttpChatBackend backend(srv.config());
    CHECK_THROWS_AS(backend.complete(request("x")), BackendUnavailable);
    CHECK(srv.hits == 3);
  }
  SUBCASE("client errors are not retried") {
    ChatServer srv([](int, const json&, httplib::Response& res) { res.status = 401; });
    HttpChatBackend backend(srv.config());
    CHECK_THROWS_AS(backend.complete(request("x")), BackendUnavailable);
    CHECK(srv.hits == 1);
  }
  SUBCASE("unreachable host") {
    HttpBackendConfig c;
    c.base_url = "http://127.0.0.1:1";
    c.transport_retries = 1;
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(500);
    HttpChatBackend backend(c);
    CHECK_THROWS_AS(backend.complete(request("x")), BackendUnavailable);
  }
}

TEST_CASE("http chat backend flags refusals") {
  ChatServer srv([](int n, const json&, httplib::Response& res) {
    json body = completion("", n == 1 ? "content_filter" : "stop");
    if (n == 2) body["choices"][0]["message"]["refusal"] = "I can't help with that.";
    res.set_content(body.dump(), "application/json");
  });
  HttpChatBackend backend(srv.config());
  CHECK(backend.complete(request("x")).refused);
  auto r = backend.complete(request("x"));
  CHECK(r.refused);
  CHECK(r.metadata["refusal"] == "I can't help with that.");
}
