#include "amulet/ingest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "amulet/text.hpp"

namespace amulet {

namespace {

using nlohmann::json;

const std::string& require_string(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) throw DatasetError(line, field, "missing field");
  if (!it->is_string()) throw DatasetError(line, field, "expected string for field");
  return it->get_ref<const std::string&>();
}

std::optional<Role> role_from(std::string_view s) {
  if (s == "human") return Role::Human;
  if (s == "assistant") return Role::Assistant;
  return std::nullopt;
}

// Trimmed (role, text) turns plus the two responses, joined with separators
// that cannot occur in JSON-decoded text without being explicit.
std::string triple_key(const RawRecord& r, bool reversed) {
  std::string key;
  for (const auto& [role, t] : r.messages) {
    key += role;
    key += '\x1f';
    key += text::trim(t);
    key += '\x1e';
  }
  key += '\x1d';
  key += text::trim(reversed ? r.rejected : r.chosen);
  key += '\x1d';
  key += text::trim(reversed ? r.chosen : r.rejected);
  return key;
}

bool well_formed(const RawRecord& r) {
  if (r.messages.empty()) return false;
  std::optional<Role> prev;
  for (const auto& [role_s, t] : r.messages) {
    auto role = role_from(role_s);
    if (!role) return false;
    if (!prev && *role != Role::Human) return false;
    if (prev && *prev == *role) return false;
    if (text::trim(t).empty()) return false;
    prev = role;
  }
  if (*prev != Role::Human) return false;
  return !text::trim(r.chosen).empty() && !text::trim(r.rejected).empty();
}

std::size_t human_turns(const RawRecord& r) {
  std::size_t n = 0;
  for (const auto& m : r.messages) n += m.first == "human" ? 1 : 0;
  return n;
}

bool any_turn_too_long(const RawRecord& r, std::size_t max_words) {
  auto too_long = [&](const std::string& t) { return text::word_count(t) >= max_words; };
  for (const auto& m : r.messages) {
    if (too_long(m.second)) return true;
  }
  return too_long(r.chosen) || too_long(r.rejected);
}

constexpr RejectReason kRuleOrder[] = {
    RejectReason::OverCap,           RejectReason::IllFormedStructure, RejectReason::TooFewHumanTurns,
    RejectReason::IdenticalResponses, RejectReason::TurnTooLong,       RejectReason::DuplicateOfReference,
    RejectReason::ReversedPreferenceOverlap,
};

}  // namespace

RawRecord parse_record(const std::string& line_text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(line_text);
  } catch (const json::parse_error& e) {
    throw DatasetError(line, "", std::string("malformed record (") + e.what() + ")");
  }
  if (!obj.is_object()) throw DatasetError(line, "", "record is not an object");

  RawRecord r;
  r.line = line;
  auto msgs = obj.find("messages");
  if (msgs == obj.end()) throw DatasetError(line, "messages", "missing field");
  if (!msgs->is_array()) throw DatasetError(line, "messages", "expected list for field");
  for (const auto& m : *msgs) {
    if (!m.is_object()) throw DatasetError(line, "messages", "expected objects in");
    r.messages.emplace_back(require_string(m, "role", line), require_string(m, "text", line));
  }
  r.chosen = require_string(obj, "chosen", line);
  r.rejected = require_string(obj, "rejected", line);
  if (auto it = obj.find("id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw DatasetError(line, "id", "expected string for field");
    r.id = it->get<std::string>();
  }
  if (auto it = obj.find("meta"); it != obj.end()) r.meta = *it;
  return r;
}

std::vector<RawRecord> load_dataset_from_string(const std::string& content) {
  std::vector<RawRecord> out;
  std::istringstream in(content);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(parse_record(line, n));
  }
  return out;
}

std::vector<RawRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_dataset_from_string(buf.str());
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::OverCap: return "over_cap";
    case RejectReason::IllFormedStructure: return "ill_formed_structure";
    case RejectReason::TooFewHumanTurns: return "too_few_human_turns";
    case RejectReason::IdenticalResponses: return "identical_responses";
    case RejectReason::TurnTooLong: return "turn_too_long";
    case RejectReason::DuplicateOfReference: return "duplicate_of_reference";
    case RejectReason::ReversedPreferenceOverlap: return "reversed_preference_overlap";
  }
  return "?";
}

std::size_t CleaningReport::count(RejectReason r) const {
  auto it = rejections.find(r);
  return it == rejections.end() ? 0 : it->second;
}

std::size_t CleaningReport::total_rejected() const {
  std::size_t n = 0;
  for (const auto& [_, c] : rejections) n += c;
  return n;
}

std::vector<std::pair<std::string, std::size_t>> CleaningReport::rows() const {
  std::vector<std::pair<std::string, std::size_t>> out;
  out.emplace_back("input", input);
  for (auto r : kRuleOrder) out.emplace_back(std::string(to_string(r)), count(r));
  out.emplace_back("survivors", survivors);
  return out;
}

PreferenceInstance to_instance(const RawRecord& r, const std::string& dataset_tag) {
  std::vector<std::pair<Role, std::string>> turns;
  turns.reserve(r.messages.size());
  for (const auto& [role_s, t] : r.messages) {
    auto role = role_from(role_s);
    if (!role) throw DatasetError(r.line, "role", "unknown role '" + role_s + "' in");
    turns.emplace_back(*role, t);
  }
  PreferenceInstance e;
  e.id = r.id ? *r.id : dataset_tag + ":" + std::to_string(r.line);
  e.context = Conversation(std::move(turns));
  e.response_a = r.chosen;
  e.response_b = r.rejected;
  e.chosen = Choice::A;
  e.dataset_tag = dataset_tag;
  return e;
}

RawRecord to_record(const PreferenceInstance& e) {
  RawRecord r;
  for (const auto& t : e.context.turns()) r.messages.emplace_back(std::string(to_string(t.role)), t.text);
  r.chosen = e.chosen_text();
  r.rejected = e.rejected_text();
  r.id = e.id;
  return r;
}

CleaningResult clean(const std::vector<RawRecord>& records, const CleaningPolicy& policy) {
  std::set<std::string> reference_keys;
  if (policy.reference) {
    for (const auto& ref : *policy.reference) reference_keys.insert(triple_key(ref, false));
  }

  CleaningResult result;
  result.report.input = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::optional<RejectReason> reason;
    if (policy.record_cap && i >= *policy.record_cap) {
      reason = RejectReason::OverCap;
    } else if (!well_formed(r)) {
      reason = RejectReason::IllFormedStructure;
    } else if (human_turns(r) < policy.min_human_turns) {
      reason = RejectReason::TooFewHumanTurns;
    } else if (r.chosen == r.rejected) {
      reason = RejectReason::IdenticalResponses;
    } else if (policy.max_words_per_turn && any_turn_too_long(r, *policy.max_words_per_turn)) {
      reason = RejectReason::TurnTooLong;
    } else if (!reference_keys.empty() && reference_keys.count(triple_key(r, false))) {
      reason = RejectReason::DuplicateOfReference;
    } else if (!reference_keys.empty() && reference_keys.count(triple_key(r, true))) {
      reason = RejectReason::ReversedPreferenceOverlap;
    }

    if (reason) {
      ++result.report.rejections[*reason];
      continue;
    }
    result.survivors.push_back(to_instance(r, policy.dataset_tag));
    result.survivor_records.push_back(r);
    if (!result.survivor_records.back().id) result.survivor_records.back().id = result.survivors.back().id;
  }
  result.report.survivors = result.survivors.size();
  return result;
}

std::vector<PreferenceInstance> subset_min_turns(const std::vector<PreferenceInstance>& instances, std::size_t k) {
  if (k < 1) throw std::invalid_argument("subset_min_turns: k must be >= 1");
  std::vector<PreferenceInstance> out;
  for (const auto& e : instances) {
    if (human_turn_count(e.context) >= k) out.push_back(e);
  }
  return out;
}

std::string serialize_record(const RawRecord& r) {
  json obj;
  json msgs = json::array();
  for (const auto& [role, t] : r.messages) msgs.push_back({{"role", role}, {"text", t}});
  obj["messages"] = std::move(msgs);
  obj["chosen"] = r.chosen;
  obj["rejected"] = r.rejected;
  if (r.id) obj["id"] = *r.id;
  if (!r.meta.is_null()) obj["meta"] = r.meta;
  obj["human_turns"] = human_turns(r);
  return obj.dump();
}

void write_dataset(const std::filesystem::path& path, const std::vector<RawRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << serialize_record(r) << '\n';
}

}  // namespace amulet
