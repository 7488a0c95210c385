#include "amulet/scorer.hpp"

#include <cmath>
#include <cstdint>

#include "amulet/digest.hpp"

namespace amulet {

using nlohmann::json;

ScoreRequest ScoreRequest::from(const PreferenceInstance& e, Choice which) {
  ScoreRequest r;
  for (const auto& t : e.context.turns()) r.messages.emplace_back(t.role, t.text);
  r.response = which == Choice::A ? e.response_a : e.response_b;
  return r;
}

json ScoreRequest::to_json() const {
  json msgs = json::array();
  for (const auto& [role, t] : messages) msgs.push_back({{"role", to_string(role)}, {"text", t}});
  return {{"messages", std::move(msgs)}, {"response", response}};
}

std::string ScoreRequest::canonical() const { return to_json().dump(); }

double mock_score(const ScoreRequest& req) {
  auto d = sha256(req.canonical());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  return std::ldexp(static_cast<double>(v), -64);
}

CachedScorer::CachedScorer(AppendLog& log, std::string id, BackendMode mode, Scorer* inner)
    : log_(log), id_(std::move(id)), mode_(mode), inner_(inner) {
  if (mode_ == BackendMode::Live && inner_ == nullptr) throw std::invalid_argument("live mode requires a scorer");
}

double CachedScorer::score(const ScoreRequest& req) {
  const std::string key = id_ + "|" + sha256_hex(req.canonical());
  if (auto p = log_.get(key)) return p->at("score").get<double>();
  if (mode_ == BackendMode::Replay) throw ReplayMiss(key);
  double s = inner_->score(req);
  try {
    log_.put(key, json{{"scorer", id_}, {"score", s}});
  } catch (const CacheConflict&) {
    // A concurrent caller stored the same request first; scores are deterministic.
  }
  return s;
}

}  // namespace amulet
