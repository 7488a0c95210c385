#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "amulet/backend.hpp"
#include "amulet/jury.hpp"
#include "amulet/prompting.hpp"

namespace amulet {

/// Collects every invalid field so one run reports all of them.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct DatasetConfig {
  std::string name;
  std::filesystem::path path;
  std::optional<std::filesystem::path> reference;
  std::size_t min_human_turns = 4;
  std::optional<std::size_t> max_words_per_turn;
  std::optional<std::size_t> record_cap;
};

struct ScorerConfig {
  enum class Type : std::uint8_t { Mock, Http };
  std::string id;
  Type type = Type::Mock;
  std::string base_url;
  std::size_t timeout_ms = 60000;
};

struct BackendConfig {
  std::string base_url;
  std::string auth_env;  // name of the environment variable holding the token
  std::size_t timeout_ms = 120000;
  std::size_t transport_retries = 3;
  std::size_t backoff_ms = 1000;
};

struct RunConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::vector<DatasetConfig> datasets;
  std::string model;
  PromptDialect dialect = PromptDialect::Default;
  std::string template_version = std::string(kDefaultTemplateVersion);
  std::size_t max_attempts = kMaxAttempts;
  double echo_tolerance = 0.10;
  BackendConfig backend;
  std::map<std::string, ScorerConfig> scorers;
  std::vector<Cascade> cascades;
  BackendMode mode = BackendMode::Replay;
  std::filesystem::path out = "out";
  std::filesystem::path transcripts;  // default: <out>/transcripts.jsonl
  std::filesystem::path scores;       // default: <out>/scores.jsonl
  std::size_t concurrency = 4;
  std::uint64_t seed = 0;
  bool forward_failures = false;

  nlohmann::json raw;  // snapshot after command-line overrides

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  const DatasetConfig& dataset(const std::string& name) const;
  const Cascade& cascade(const std::string& name) const;
  JudgeConfig judge() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

}  // namespace amulet
