#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "amulet/backend.hpp"
#include "amulet/domain.hpp"
#include "amulet/parse.hpp"
#include "amulet/prompting.hpp"
#include "amulet/scorer.hpp"

namespace amulet {

struct Vote {
  Choice choice;  // order-corrected
  ResponseOrder order;
  PromptKind kind;
  TranscriptKey provenance;  // key of the accepted attempt
};

using VoteResult = std::variant<Vote, InstanceFailure>;

struct DaAnnotations {
  std::optional<DaJudgment> original;
  std::optional<DaJudgment> swapped;
};

struct MaximAnnotations {
  std::optional<MaximJudgment> original;
  std::optional<MaximJudgment> swapped;
};

using AttachedAnnotations = std::variant<std::monostate, DaAnnotations, MaximAnnotations>;

struct MethodResult {
  PromptKind kind = PromptKind::IO;
  std::string instance_id;
  VoteResult vote_original = InstanceFailure{};
  VoteResult vote_swapped = InstanceFailure{};
  AttachedAnnotations annotations;
  std::optional<std::string> explanation_original;  // WExpl only
  std::optional<std::string> explanation_swapped;
};

struct JudgeConfig {
  std::string model;
  PromptDialect dialect = PromptDialect::Default;  // applies to DA prompts only
  std::string template_version = std::string(kDefaultTemplateVersion);
  std::size_t max_attempts = kMaxAttempts;
  DaParseOptions parse_options;
  const TemplateRegistry* registry = nullptr;  // builtin when null
};

/// Renders both orders, obtains validated completions and maps the answers
/// back to A/B. Per-vote failures are recorded, never thrown.
MethodResult run_method(PromptKind kind, const PreferenceInstance& e, const JudgeConfig& cfg, ChatBackend& backend);

struct StageDecision {
  enum class Kind : std::uint8_t { Agreed, TieForward, Failed };
  Kind kind;
  std::optional<Choice> choice;  // set iff Agreed

  static StageDecision agreed(Choice c) { return {Kind::Agreed, c}; }
  static StageDecision tie_forward() { return {Kind::TieForward, std::nullopt}; }
  static StageDecision failed() { return {Kind::Failed, std::nullopt}; }
  friend bool operator==(const StageDecision&, const StageDecision&) = default;
};

std::string_view to_string(StageDecision::Kind k);

StageDecision resolve_stage(const MethodResult& r);

struct RmResult {
  std::optional<double> score_a;
  std::optional<double> score_b;
  std::optional<Choice> decision;  // empty means the scorer failed
  std::string error;
};

/// Two independent single-response scores, no order swap. Equal scores or a
/// scorer error leave the decision empty. ReplayMiss propagates.
RmResult score_with_rm(Scorer& scorer, const PreferenceInstance& e);

struct Stage {
  enum class Type : std::uint8_t { Method, RM };
  Type type = Type::Method;
  PromptKind kind = PromptKind::DA;  // Method stages
  std::string scorer_id;             // RM stages

  static Stage method(PromptKind k) { return {Type::Method, k, {}}; }
  static Stage rm(std::string id) { return {Type::RM, PromptKind::DA, std::move(id)}; }
  std::string label() const;
  friend bool operator==(const Stage&, const Stage&) = default;
};

struct Cascade {
  std::string name;
  std::vector<Stage> stages;
};

/// Parses stage labels such as "DA", "Maxim", "WExpl", "IO", "RM:mock".
/// Throws std::invalid_argument on an empty cascade, an unknown stage or an
/// RM stage that is not last.
Cascade make_cascade(std::string name, const std::vector<std::string>& stage_labels);
void validate_cascade(const Cascade& c);

/// Supplies stage results on demand so later stages are only run when needed.
class StageExecutor {
 public:
  virtual ~StageExecutor() = default;
  virtual MethodResult method(PromptKind kind, const PreferenceInstance& e) = 0;
  virtual RmResult rm(const std::string& scorer_id, const PreferenceInstance& e) = 0;
};

struct StageTrace {
  Stage stage;
  StageDecision decision;
  std::optional<MethodResult> method;
  std::optional<RmResult> rm;
};

struct CascadeResult {
  enum class Final : std::uint8_t { Decided, Tie, Failed };
  Final final = Final::Tie;
  std::optional<Choice> decision;
  std::optional<std::size_t> deciding_stage;  // 0-based; unset for Tie and exhausted failures
  std::vector<StageTrace> trace;
};

struct CascadeOptions {
  /// When set, a Failed stage forwards to the next stage like a tie; an
  /// exhausted cascade with any failure is then Failed rather than Tie.
  bool forward_failures = false;
};

CascadeResult run_cascade(const Cascade& c, const PreferenceInstance& e, StageExecutor& exec,
                          const CascadeOptions& options = {});

enum class OutcomeKind : std::uint8_t { Win, Tie, Loss };

std::string_view to_string(OutcomeKind k);

struct Outcome {
  OutcomeKind kind;
  std::optional<std::size_t> deciding_stage;
};

Outcome outcome_of(const CascadeResult& r, Choice chosen);

struct Accounting {
  std::size_t total = 0;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;

  /// Percentages rounded half-up to one decimal, as "59.8".
  std::string accuracy() const { return win_pct(); }
  std::string win_pct() const;
  std::string tie_pct() const;
  std::string loss_pct() const;
};

/// Throws std::invalid_argument on empty input.
Accounting account(const std::vector<Outcome>& outcomes);

/// count/total*100 rounded half-up to tenths, computed in integers.
std::string percent_tenths(std::size_t count, std::size_t total);

/// Runs methods through a backend and RM stages through named scorers.
/// Method results are memoized per (kind, instance id) so several cascades
/// over the same data reuse them.
class BackendExecutor : public StageExecutor {
 public:
  BackendExecutor(ChatBackend& backend, JudgeConfig cfg, std::map<std::string, Scorer*> scorers = {});

  MethodResult method(PromptKind kind, const PreferenceInstance& e) override;
  RmResult rm(const std::string& scorer_id, const PreferenceInstance& e) override;

 private:
  ChatBackend& backend_;
  JudgeConfig cfg_;
  std::map<std::string, Scorer*> scorers_;
  std::mutex mu_;
  std::map<std::pair<PromptKind, std::string>, MethodResult> memo_;
};

nlohmann::json to_json(const MethodResult& r);
nlohmann::json to_json(const RmResult& r);
nlohmann::json to_json(const CascadeResult& r, const Cascade& c);

}  // namespace amulet
