#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace amulet {

// ---------------------------------------------------------------------------
// Conversations and preference instances
// ---------------------------------------------------------------------------

enum class Role : std::uint8_t { Human, Assistant };

std::string_view to_string(Role r);

struct Turn {
  Role role;
  std::string text;
  std::size_t index = 0;
  friend bool operator==(const Turn&, const Turn&) = default;
};

/// Ordered turns. Indices are assigned from position on construction, so the
/// index invariant holds by construction; role alternation is checked by
/// validate_instance() because raw data may violate it.
class Conversation {
 public:
  Conversation() = default;
  explicit Conversation(std::vector<std::pair<Role, std::string>> turns);

  const std::vector<Turn>& turns() const { return turns_; }
  std::size_t size() const { return turns_.size(); }
  bool empty() const { return turns_.empty(); }
  const Turn& operator[](std::size_t i) const { return turns_[i]; }

  friend bool operator==(const Conversation&, const Conversation&) = default;

 private:
  std::vector<Turn> turns_;
};

std::size_t human_turn_count(const Conversation& c);

enum class Choice : std::uint8_t { A, B };

inline Choice flip(Choice c) { return c == Choice::A ? Choice::B : Choice::A; }
std::string_view to_string(Choice c);

struct PreferenceInstance {
  std::string id;
  Conversation context;
  std::string response_a;
  std::string response_b;
  Choice chosen = Choice::A;
  std::string dataset_tag;

  const std::string& chosen_text() const { return chosen == Choice::A ? response_a : response_b; }
  const std::string& rejected_text() const { return chosen == Choice::A ? response_b : response_a; }
};

/// Exchanges the two responses and relabels `chosen` so it still names the
/// same text.
PreferenceInstance swap_responses(const PreferenceInstance& e);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Violation tags, one per PreferenceInstance invariant.
inline constexpr std::string_view kViolationEmptyContext = "empty context";
inline constexpr std::string_view kViolationFirstNotHuman = "first turn not human";
inline constexpr std::string_view kViolationAlternation = "alternation";
inline constexpr std::string_view kViolationEmptyTurn = "empty turn";
inline constexpr std::string_view kViolationLastNotHuman = "context does not end with human turn";
inline constexpr std::string_view kViolationEmptyResponse = "empty response";
inline constexpr std::string_view kViolationIdentical = "identical responses";

ValidationReport validate_instance(const PreferenceInstance& e);

// ---------------------------------------------------------------------------
// Dialog-act taxonomy
// ---------------------------------------------------------------------------

enum class Dimension : std::uint8_t {
  Task,
  AutoFeedback,
  AlloFeedback,
  TurnManagement,
  TimeManagement,
  ContactManagement,
  OwnCommunicationManagement,
  PartnerCommunicationManagement,
  DiscourseStructuring,
  SocialObligationsManagement,
};

inline constexpr std::size_t kDimensionCount = 10;

std::string_view name(Dimension d);
/// True for the 8 dimensions enumerated in the dialog-act prompt.
bool prompt_active(Dimension d);
std::span<const Dimension> all_dimensions();

enum class CommFunction : std::uint8_t {
  // Task
  PropositionalQuestion,
  SetQuestion,
  ChoiceQuestion,
  Answer,
  Confirm,
  Disconfirm,
  Inform,
  Agreement,
  Disagreement,
  Correction,
  Promise,
  Offer,
  AcceptRequest,
  DeclineRequest,
  AcceptSuggest,
  DeclineSuggest,
  Request,
  Instruct,
  Suggest,
  // Auto-Feedback
  AutoPositive,
  AutoNegative,
  // Allo-Feedback
  AlloPositive,
  AlloNegative,
  FeedbackElicitation,
  // Time Management
  Stalling,
  Pausing,
  // Own Communication Management
  SelfCorrection,
  SelfError,
  Retraction,
  // Partner Communication Management
  Completion,
  CorrectMisspeaking,
  // Discourse/Interaction Structuring
  InteractionStructuring,
  Opening,
  Closing,
  // Social Obligations Management
  InitialGreeting,
  ReturnGreeting,
  InitialSelfIntroduction,
  ReturnSelfIntroduction,
  Apology,
  AcceptApology,
  Thanking,
  AcceptThanking,
  InitialGoodbye,
  ReturnGoodbye,
};

inline constexpr std::size_t kFunctionCount = 44;

std::string_view name(CommFunction f);
Dimension dimension_of(CommFunction f);
std::span<const CommFunction> all_functions();

/// Case-insensitive, whitespace-collapsing, surrounding-punctuation-stripping
/// key used for taxonomy lookups.
std::string canonical_name(std::string_view raw);

/// Lookup restricted to the prompt-active dimensions. Returns nullopt for
/// hallucinated names (including the two dimensions absent from the prompt).
std::optional<Dimension> parse_dimension(std::string_view raw);
std::optional<CommFunction> parse_function(std::string_view raw);

struct DialogAct {
  Dimension dimension;
  CommFunction function;
  friend auto operator<=>(const DialogAct&, const DialogAct&) = default;
};

/// Set of (dimension, function) pairs for one turn. Every pair satisfies
/// dimension_of(function) == dimension.
class DialogActSet {
 public:
  DialogActSet() = default;
  DialogActSet(std::initializer_list<CommFunction> fs);

  void insert(CommFunction f);
  /// Throws std::invalid_argument when f does not belong to d.
  void insert(Dimension d, CommFunction f);

  bool empty() const { return acts_.empty(); }
  std::size_t size() const { return acts_.size(); }
  const std::set<DialogAct>& acts() const { return acts_; }
  auto begin() const { return acts_.begin(); }
  auto end() const { return acts_.end(); }

  std::set<Dimension> dimensions() const;
  std::set<CommFunction> functions() const;

  friend bool operator==(const DialogActSet&, const DialogActSet&) = default;
  friend auto operator<=>(const DialogActSet& a, const DialogActSet& b) { return a.acts_ <=> b.acts_; }

 private:
  std::set<DialogAct> acts_;
};

bool da_set_equal(const DialogActSet& x, const DialogActSet& y);

// ---------------------------------------------------------------------------
// Maxims
// ---------------------------------------------------------------------------

enum class MaximId : std::uint8_t {
  Quantity1,
  Quantity2,
  Quality,
  Relevance1,
  Relevance2,
  Manner1,
  Manner2,
  Benevolence1,
  Benevolence2,
  Transparency1,
  Transparency2,
  Transparency3,
};

inline constexpr std::size_t kMaximCount = 12;

std::string_view name(MaximId m);
std::span<const MaximId> all_maxims();
std::optional<MaximId> parse_maxim_id(std::string_view raw);

enum class MaximVerdict : std::uint8_t { Resp1, Resp2, Both, Neither };

std::string_view to_string(MaximVerdict v);

enum class ResponseSlot : std::uint8_t { Resp1, Resp2 };

using MaximSet = std::bitset<kMaximCount>;

/// Total map MaximId -> MaximVerdict.
class MaximSheet {
 public:
  using Verdicts = std::array<MaximVerdict, kMaximCount>;

  /// Indexed by MaximId order; totality holds by construction.
  explicit MaximSheet(const Verdicts& verdicts) : verdicts_(verdicts) {}

  /// Throws std::invalid_argument on a missing or duplicated maxim.
  static MaximSheet from_entries(std::span<const std::pair<MaximId, MaximVerdict>> entries);

  static MaximSheet uniform(MaximVerdict v);

  MaximVerdict verdict(MaximId m) const { return verdicts_[static_cast<std::size_t>(m)]; }
  const Verdicts& verdicts() const { return verdicts_; }

  MaximSet satisfied_by(ResponseSlot r) const;

  /// Relabels Resp1 <-> Resp2.
  MaximSheet swapped() const;

  friend bool operator==(const MaximSheet&, const MaximSheet&) = default;

 private:
  Verdicts verdicts_;
};

}  // namespace amulet
