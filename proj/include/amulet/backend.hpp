#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "amulet/prompting.hpp"

namespace amulet {

inline constexpr std::size_t kMaxAttempts = 6;

struct TranscriptKey {
  std::string instance_id;
  PromptKind kind = PromptKind::IO;
  ResponseOrder order = ResponseOrder::Original;
  std::string model;
  std::string template_hash;
  std::size_t attempt = 1;  // 1-based

  /// Stable string form used as the cache index key.
  std::string str() const;
  nlohmann::json to_json() const;
  static TranscriptKey from_json(const nlohmann::json& j);
  friend auto operator<=>(const TranscriptKey&, const TranscriptKey&) = default;
};

struct ChatRequest {
  std::string prompt;
  std::string model;
  double temperature = 0.0;
  TranscriptKey key;
};

struct ChatResponse {
  std::string text;  // byte-exact completion
  bool refused = false;
  double latency_ms = 0.0;
  nlohmann::json metadata = nlohmann::json::object();
};

class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReplayMiss : public std::runtime_error {
 public:
  explicit ReplayMiss(const std::string& key) : std::runtime_error("replay miss: " + key), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Write-once violation or a cached record that no longer matches its request.
class CacheConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptLog : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

/// Append-only JSONL log of (key, payload) records with a SHA-256 checksum per
/// line and an in-memory index. Thread-safe. A key can be written once.
class AppendLog {
 public:
  /// Opens or creates the log. A torn final line (no trailing newline) is
  /// truncated; any other malformed or checksum-failing line throws CorruptLog.
  explicit AppendLog(std::filesystem::path path);
  /// In-memory only; nothing is persisted.
  AppendLog();

  std::optional<nlohmann::json> get(const std::string& key) const;
  bool contains(const std::string& key) const;
  /// Throws CacheConflict if the key already exists.
  void put(const std::string& key, const nlohmann::json& payload);
  std::size_t size() const;
  std::vector<std::string> keys() const;

  static std::string checksum(const std::string& key, const nlohmann::json& payload);

 private:
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
  mutable std::mutex mu_;
  std::map<std::string, nlohmann::json> index_;
};

struct TranscriptRecord {
  TranscriptKey key;
  std::string prompt_digest;  // sha256 hex of the prompt text
  ChatResponse response;
};

class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path path) : log_(std::move(path)) {}
  TranscriptStore() = default;

  std::optional<TranscriptRecord> get(const TranscriptKey& key) const;
  void put(const TranscriptRecord& record);
  std::size_t size() const { return log_.size(); }
  std::vector<TranscriptRecord> records() const;

 private:
  AppendLog log_;
};

enum class BackendMode : std::uint8_t { Live, Replay };

std::string_view to_string(BackendMode m);

/// Serves completions from the transcript store; in live mode a miss goes to
/// the wrapped backend exactly once per key, even under concurrent callers.
class CachedBackend : public ChatBackend {
 public:
  CachedBackend(TranscriptStore& store, BackendMode mode, ChatBackend* live = nullptr);

  ChatResponse complete(const ChatRequest& req) override;

  std::size_t hits() const;
  std::size_t live_calls() const;
  BackendMode mode() const { return mode_; }

 private:
  TranscriptStore& store_;
  BackendMode mode_;
  ChatBackend* live_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::set<std::string> in_flight_;
  std::size_t hits_ = 0;
  std::size_t live_calls_ = 0;
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. https://api.example.com; requests go to {base}/v1/chat/completions
  std::string api_key;   // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{120000};
  std::size_t transport_retries = 3;
  std::chrono::milliseconds backoff{1000};
};

/// OpenAI-compatible chat-completions client. The whole prompt is sent as one
/// user message.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);
  ChatResponse complete(const ChatRequest& req) override;

 private:
  HttpBackendConfig config_;
};

struct InstanceFailure {
  std::vector<std::string> raw_texts;  // one per attempt
  std::vector<std::string> errors;     // validator message per attempt
};

struct Accepted {
  ChatResponse response;
  std::size_t attempts = 0;
};

/// Returns an error message for a rejected completion, nullopt when accepted.
using Validator = std::function<std::optional<std::string>(const std::string&)>;

/// Issues attempts 1..max_attempts (capped at kMaxAttempts) for req.key and
/// returns the first accepted completion. Refusals count as rejections.
std::variant<Accepted, InstanceFailure> complete_with_format_retries(ChatBackend& backend, ChatRequest req,
                                                                     const Validator& validator,
                                                                     std::size_t max_attempts = kMaxAttempts);

}  // namespace amulet
