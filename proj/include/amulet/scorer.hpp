#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amulet/backend.hpp"
#include "amulet/domain.hpp"

namespace amulet {

/// Body of POST /v1/score: the context plus one candidate response.
struct ScoreRequest {
  std::vector<std::pair<Role, std::string>> messages;
  std::string response;

  static ScoreRequest from(const PreferenceInstance& e, Choice which);
  nlohmann::json to_json() const;
  /// Sorted keys, no whitespace, UTF-8 left unescaped.
  std::string canonical() const;
};

class ScorerFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const ScoreRequest& req) = 0;
  virtual std::string id() const = 0;
};

/// First 8 bytes of SHA-256(canonical request), big-endian, divided by 2^64.
double mock_score(const ScoreRequest& req);

class MockScorer : public Scorer {
 public:
  double score(const ScoreRequest& req) override { return mock_score(req); }
  std::string id() const override { return "mock"; }
};

struct HttpScorerConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string id = "http";
  std::chrono::milliseconds timeout{60000};
};

struct HealthStatus {
  int http_status = 0;  // 0 when the service could not be reached
  std::string status;
  std::string model_id;
  std::string mode;  // "real" or "mock"
  bool ready() const { return http_status == 200; }
};

/// Client for the scoring service. Schema rejections (400), service errors
/// (503), transport failures and non-finite scores raise ScorerFailed.
class HttpScorer : public Scorer {
 public:
  explicit HttpScorer(HttpScorerConfig config);
  double score(const ScoreRequest& req) override;
  std::string id() const override { return config_.id; }
  HealthStatus health() const;

 private:
  HttpScorerConfig config_;
};

/// Persists scores keyed by (scorer id, request digest) so RM stages replay
/// offline. In replay mode a missing score raises ReplayMiss.
class CachedScorer : public Scorer {
 public:
  CachedScorer(AppendLog& log, std::string id, BackendMode mode, Scorer* inner = nullptr);
  double score(const ScoreRequest& req) override;
  std::string id() const override { return id_; }

 private:
  AppendLog& log_;
  std::string id_;
  BackendMode mode_;
  Scorer* inner_;
};

}  // namespace amulet
