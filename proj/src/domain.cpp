#include "amulet/domain.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_map>

#include "amulet/text.hpp"

namespace amulet {

std::string_view to_string(Role r) { return r == Role::Human ? "human" : "assistant"; }

std::string_view to_string(Choice c) { return c == Choice::A ? "A" : "B"; }

Conversation::Conversation(std::vector<std::pair<Role, std::string>> turns) {
  turns_.reserve(turns.size());
  for (auto& [role, text] : turns) {
    turns_.push_back(Turn{role, std::move(text), turns_.size()});
  }
}

std::size_t human_turn_count(const Conversation& c) {
  return static_cast<std::size_t>(std::count_if(c.turns().begin(), c.turns().end(),
                                                [](const Turn& t) { return t.role == Role::Human; }));
}

PreferenceInstance swap_responses(const PreferenceInstance& e) {
  PreferenceInstance out = e;
  std::swap(out.response_a, out.response_b);
  out.chosen = flip(e.chosen);
  return out;
}

ValidationReport validate_instance(const PreferenceInstance& e) {
  ValidationReport report;
  auto add = [&](std::string_view v) {
    if (std::find(report.violations.begin(), report.violations.end(), v) == report.violations.end())
      report.violations.emplace_back(v);
  };
  const auto& turns = e.context.turns();
  if (turns.empty()) {
    add(kViolationEmptyContext);
  } else {
    if (turns.front().role != Role::Human) add(kViolationFirstNotHuman);
    for (std::size_t i = 1; i < turns.size(); ++i) {
      if (turns[i].role == turns[i - 1].role) add(kViolationAlternation);
    }
    if (turns.back().role != Role::Human) add(kViolationLastNotHuman);
    for (const auto& t : turns) {
      if (text::trim(t.text).empty()) add(kViolationEmptyTurn);
    }
  }
  if (text::trim(e.response_a).empty() || text::trim(e.response_b).empty()) add(kViolationEmptyResponse);
  if (e.response_a == e.response_b) add(kViolationIdentical);
  return report;
}

// ---------------------------------------------------------------------------
// Taxonomy tables
// ---------------------------------------------------------------------------

namespace {

struct DimensionInfo {
  Dimension id;
  std::string_view name;
  bool prompt_active;
};

constexpr std::array<DimensionInfo, kDimensionCount> kDimensions{{
    {Dimension::Task, "Task", true},
    {Dimension::AutoFeedback, "Auto-Feedback", true},
    {Dimension::AlloFeedback, "Allo-Feedback", true},
    {Dimension::TurnManagement, "Turn Management", false},
    {Dimension::TimeManagement, "Time Management", true},
    {Dimension::ContactManagement, "Contact Management", false},
    {Dimension::OwnCommunicationManagement, "Own Communication Management", true},
    {Dimension::PartnerCommunicationManagement, "Partner Communication Management", true},
    {Dimension::DiscourseStructuring, "Discourse/Interaction Structuring", true},
    {Dimension::SocialObligationsManagement, "Social Obligations Management", true},
}};

struct FunctionInfo {
  CommFunction id;
  std::string_view name;
  Dimension dimension;
};

constexpr std::array<FunctionInfo, kFunctionCount> kFunctions{{
    {CommFunction::PropositionalQuestion, "Propositional Question", Dimension::Task},
    {CommFunction::SetQuestion, "Set Question", Dimension::Task},
    {CommFunction::ChoiceQuestion, "Choice Question", Dimension::Task},
    {CommFunction::Answer, "Answer", Dimension::Task},
    {CommFunction::Confirm, "Confirm", Dimension::Task},
    {CommFunction::Disconfirm, "Disconfirm", Dimension::Task},
    {CommFunction::Inform, "Inform", Dimension::Task},
    {CommFunction::Agreement, "Agreement", Dimension::Task},
    {CommFunction::Disagreement, "Disagreement", Dimension::Task},
    {CommFunction::Correction, "Correction", Dimension::Task},
    {CommFunction::Promise, "Promise", Dimension::Task},
    {CommFunction::Offer, "Offer", Dimension::Task},
    {CommFunction::AcceptRequest, "Accept Request", Dimension::Task},
    {CommFunction::DeclineRequest, "Decline Request", Dimension::Task},
    {CommFunction::AcceptSuggest, "Accept Suggest", Dimension::Task},
    {CommFunction::DeclineSuggest, "Decline Suggest", Dimension::Task},
    {CommFunction::Request, "Request", Dimension::Task},
    {CommFunction::Instruct, "Instruct", Dimension::Task},
    {CommFunction::Suggest, "Suggest", Dimension::Task},
    {CommFunction::AutoPositive, "Auto-Positive", Dimension::AutoFeedback},
    {CommFunction::AutoNegative, "Auto-Negative", Dimension::AutoFeedback},
    {CommFunction::AlloPositive, "Allo-Positive", Dimension::AlloFeedback},
    {CommFunction::AlloNegative, "Allo-Negative", Dimension::AlloFeedback},
    {CommFunction::FeedbackElicitation, "Feedback Elicitation", Dimension::AlloFeedback},
    {CommFunction::Stalling, "Stalling", Dimension::TimeManagement},
    {CommFunction::Pausing, "Pausing", Dimension::TimeManagement},
    {CommFunction::SelfCorrection, "Self-Correction", Dimension::OwnCommunicationManagement},
    {CommFunction::SelfError, "Self-Error", Dimension::OwnCommunicationManagement},
    {CommFunction::Retraction, "Retraction", Dimension::OwnCommunicationManagement},
    {CommFunction::Completion, "Completion", Dimension::PartnerCommunicationManagement},
    {CommFunction::CorrectMisspeaking, "Correct Misspeaking", Dimension::PartnerCommunicationManagement},
    {CommFunction::InteractionStructuring, "Interaction Structuring", Dimension::DiscourseStructuring},
    {CommFunction::Opening, "Opening", Dimension::DiscourseStructuring},
    {CommFunction::Closing, "Closing", Dimension::DiscourseStructuring},
    {CommFunction::InitialGreeting, "Initial Greeting", Dimension::SocialObligationsManagement},
    {CommFunction::ReturnGreeting, "Return Greeting", Dimension::SocialObligationsManagement},
    {CommFunction::InitialSelfIntroduction, "Initial Self-Introduction", Dimension::SocialObligationsManagement},
    {CommFunction::ReturnSelfIntroduction, "Return Self-Introduction", Dimension::SocialObligationsManagement},
    {CommFunction::Apology, "Apology", Dimension::SocialObligationsManagement},
    {CommFunction::AcceptApology, "Accept Apology", Dimension::SocialObligationsManagement},
    {CommFunction::Thanking, "Thanking", Dimension::SocialObligationsManagement},
    {CommFunction::AcceptThanking, "Accept Thanking", Dimension::SocialObligationsManagement},
    {CommFunction::InitialGoodbye, "Initial Goodbye", Dimension::SocialObligationsManagement},
    {CommFunction::ReturnGoodbye, "Return Goodbye", Dimension::SocialObligationsManagement},
}};

constexpr std::array<std::string_view, kMaximCount> kMaximNames{
    "Quantity-1", "Quantity-2",    "Quality",       "Relevance-1",    "Relevance-2",    "Manner-1",
    "Manner-2",   "Benevolence-1", "Benevolence-2", "Transparency-1", "Transparency-2", "Transparency-3",
};

template <typename E, std::size_t N>
constexpr std::array<E, N> enumerate() {
  std::array<E, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<E>(i);
  return out;
}

constexpr auto kAllDimensions = enumerate<Dimension, kDimensionCount>();
constexpr auto kAllFunctions = enumerate<CommFunction, kFunctionCount>();
constexpr auto kAllMaxims = enumerate<MaximId, kMaximCount>();

const std::unordered_map<std::string, Dimension>& dimension_index() {
  static const auto index = [] {
    std::unordered_map<std::string, Dimension> m;
    for (const auto& d : kDimensions) {
      if (d.prompt_active) m.emplace(canonical_name(d.name), d.id);
    }
    return m;
  }();
  return index;
}

const std::unordered_map<std::string, CommFunction>& function_index() {
  static const auto index = [] {
    std::unordered_map<std::string, CommFunction> m;
    for (const auto& f : kFunctions) m.emplace(canonical_name(f.name), f.id);
    // The prompt's own function list spells this one "Intitial".
    m.emplace(canonical_name("Intitial Self-Introduction"), CommFunction::InitialSelfIntroduction);
    return m;
  }();
  return index;
}

}  // namespace

std::string_view name(Dimension d) { return kDimensions[static_cast<std::size_t>(d)].name; }
bool prompt_active(Dimension d) { return kDimensions[static_cast<std::size_t>(d)].prompt_active; }
std::span<const Dimension> all_dimensions() { return kAllDimensions; }

std::string_view name(CommFunction f) { return kFunctions[static_cast<std::size_t>(f)].name; }
Dimension dimension_of(CommFunction f) { return kFunctions[static_cast<std::size_t>(f)].dimension; }
std::span<const CommFunction> all_functions() { return kAllFunctions; }

std::string canonical_name(std::string_view raw) {
  auto is_punct_or_space = [](char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 0x80 && !std::isalnum(u);
  };
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && is_punct_or_space(raw[b])) ++b;
  while (e > b && is_punct_or_space(raw[e - 1])) --e;
  return text::collapse_lower(raw.substr(b, e - b));
}

std::optional<Dimension> parse_dimension(std::string_view raw) {
  const auto& idx = dimension_index();
  auto it = idx.find(canonical_name(raw));
  if (it == idx.end()) return std::nullopt;
  return it->second;
}

std::optional<CommFunction> parse_function(std::string_view raw) {
  const auto& idx = function_index();
  auto it = idx.find(canonical_name(raw));
  if (it == idx.end()) return std::nullopt;
  return it->second;
}

DialogActSet::DialogActSet(std::initializer_list<CommFunction> fs) {
  for (auto f : fs) insert(f);
}

void DialogActSet::insert(CommFunction f) { acts_.insert(DialogAct{dimension_of(f), f}); }

void DialogActSet::insert(Dimension d, CommFunction f) {
  if (dimension_of(f) != d) {
    throw std::invalid_argument("function '" + std::string(name(f)) + "' does not belong to dimension '" +
                                std::string(name(d)) + "'");
  }
  acts_.insert(DialogAct{d, f});
}

std::set<Dimension> DialogActSet::dimensions() const {
  std::set<Dimension> out;
  for (const auto& a : acts_) out.insert(a.dimension);
  return out;
}

std::set<CommFunction> DialogActSet::functions() const {
  std::set<CommFunction> out;
  for (const auto& a : acts_) out.insert(a.function);
  return out;
}

bool da_set_equal(const DialogActSet& x, const DialogActSet& y) { return x == y; }

// ---------------------------------------------------------------------------
// Maxims
// ---------------------------------------------------------------------------

std::string_view name(MaximId m) { return kMaximNames[static_cast<std::size_t>(m)]; }
std::span<const MaximId> all_maxims() { return kAllMaxims; }

std::optional<MaximId> parse_maxim_id(std::string_view raw) {
  auto key = canonical_name(raw);
  for (std::size_t i = 0; i < kMaximCount; ++i) {
    if (canonical_name(kMaximNames[i]) == key) return static_cast<MaximId>(i);
  }
  return std::nullopt;
}

std::string_view to_string(MaximVerdict v) {
  switch (v) {
    case MaximVerdict::Resp1: return "1";
    case MaximVerdict::Resp2: return "2";
    case MaximVerdict::Both: return "both";
    case MaximVerdict::Neither: return "neither";
  }
  return "?";
}

MaximSheet MaximSheet::from_entries(std::span<const std::pair<MaximId, MaximVerdict>> entries) {
  std::array<std::optional<MaximVerdict>, kMaximCount> slots{};
  for (const auto& [id, v] : entries) {
    auto& slot = slots[static_cast<std::size_t>(id)];
    if (slot) throw std::invalid_argument("duplicate maxim '" + std::string(name(id)) + "'");
    slot = v;
  }
  Verdicts out{};
  for (std::size_t i = 0; i < kMaximCount; ++i) {
    if (!slots[i]) throw std::invalid_argument("missing maxim '" + std::string(kMaximNames[i]) + "'");
    out[i] = *slots[i];
  }
  return MaximSheet(out);
}

MaximSheet MaximSheet::uniform(MaximVerdict v) {
  Verdicts out{};
  out.fill(v);
  return MaximSheet(out);
}

MaximSet MaximSheet::satisfied_by(ResponseSlot r) const {
  const auto own = r == ResponseSlot::Resp1 ? MaximVerdict::Resp1 : MaximVerdict::Resp2;
  MaximSet out;
  for (std::size_t i = 0; i < kMaximCount; ++i) {
    out[i] = verdicts_[i] == own || verdicts_[i] == MaximVerdict::Both;
  }
  return out;
}

MaximSheet MaximSheet::swapped() const {
  Verdicts out = verdicts_;
  for (auto& v : out) {
    if (v == MaximVerdict::Resp1) {
      v = MaximVerdict::Resp2;
    } else if (v == MaximVerdict::Resp2) {
      v = MaximVerdict::Resp1;
    }
  }
  return MaximSheet(out);
}

}  // namespace amulet
