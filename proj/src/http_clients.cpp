// The only translation unit that includes cpp-httplib.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>
#include <thread>

#include "amulet/backend.hpp"
#include "amulet/scorer.hpp"

namespace amulet {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_base_url(const std::string& base) {
  auto scheme_end = base.find("://");
  std::size_t host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto slash = base.find('/', host_begin);
  Endpoint e;
  e.origin = slash == std::string::npos ? base : base.substr(0, slash);
  e.prefix = slash == std::string::npos ? "" : base.substr(slash);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

void configure(httplib::Client& cli, std::chrono::milliseconds timeout) {
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw std::invalid_argument("backend base_url is empty");
}

ChatResponse HttpChatBackend::complete(const ChatRequest& req) {
  const Endpoint ep = split_base_url(config_.base_url);
  json body{{"model", req.model},
            {"temperature", req.temperature},
            {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})}};
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= config_.transport_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << std::min<std::size_t>(attempt - 1, 6)));
    httplib::Client cli(ep.origin);
    configure(cli, config_.timeout);
    auto t0 = std::chrono::steady_clock::now();
    auto res = cli.Post(ep.prefix + "/v1/chat/completions", headers, payload, "application/json");
    auto t1 = std::chrono::steady_clock::now();
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (retryable(res->status)) continue;
      break;
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::parse_error&) {
      last_error = "malformed JSON reply";
      continue;
    }
    const auto& choices = reply.value("choices", json::array());
    if (!choices.is_array() || choices.empty()) {
      last_error = "reply has no choices";
      continue;
    }
    const json& choice = choices[0];
    const json message = choice.value("message", json::object());
    ChatResponse out;
    if (message.contains("content") && message["content"].is_string()) out.text = message["content"];
    std::string finish = choice.value("finish_reason", json()).is_string() ? choice["finish_reason"] : "";
    bool has_refusal = message.contains("refusal") && !message["refusal"].is_null();
    out.refused = has_refusal || finish == "content_filter";
    out.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.metadata = {{"finish_reason", finish}, {"model", reply.value("model", req.model)}};
    if (reply.contains("usage")) out.metadata["usage"] = reply["usage"];
    if (has_refusal) out.metadata["refusal"] = message["refusal"];
    return out;
  }
  throw BackendUnavailable(config_.base_url + ": " + last_error);
}

HttpScorer::HttpScorer(HttpScorerConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw std::invalid_argument("scorer base_url is empty");
}

double HttpScorer::score(const ScoreRequest& req) {
  const Endpoint ep = split_base_url(config_.base_url);
  httplib::Client cli(ep.origin);
  configure(cli, config_.timeout);
  auto res = cli.Post(ep.prefix + "/v1/score", req.to_json().dump(), "application/json");
  if (!res) throw ScorerFailed("scorer transport error: " + httplib::to_string(res.error()));
  if (res->status == 400) throw ScorerFailed("scorer rejected request: " + res->body);
  if (res->status == 503) throw ScorerFailed("scorer unavailable");
  if (res->status != 200) throw ScorerFailed("scorer HTTP " + std::to_string(res->status));
  try {
    double s = json::parse(res->body).at("score").get<double>();
    if (!std::isfinite(s)) throw ScorerFailed("scorer returned a non-finite score");
    return s;
  } catch (const json::exception& e) {
    throw ScorerFailed(std::string("malformed scorer reply: ") + e.what());
  }
}

HealthStatus HttpScorer::health() const {
  const Endpoint ep = split_base_url(config_.base_url);
  httplib::Client cli(ep.origin);
  configure(cli, config_.timeout);
  HealthStatus h;
  auto res = cli.Get(ep.prefix + "/healthz");
  if (!res) return h;
  h.http_status = res->status;
  try {
    auto j = json::parse(res->body);
    h.status = j.value("status", "");
    h.model_id = j.value("model_id", j.value("model", ""));
    h.mode = j.value("mode", "");
  } catch (const json::exception&) {
  }
  return h;
}

}  // namespace amulet
