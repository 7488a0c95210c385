#include "synthetic.hpp"

#include <algorithm>
#include <sstream>

#include "amulet/digest.hpp"
#include "amulet/domain.hpp"

namespace amulet::testing {

namespace {

struct PaletteAct {
  const char* dim;
  const char* func;
};

constexpr PaletteAct kPalette[] = {
    {"Task", "Inform"},
    {"Task", "Set Question"},
    {"Task", "Propositional Question"},
    {"Task", "Answer"},
    {"Task", "Suggest"},
    {"Task", "Instruct"},
    {"Task", "Request"},
    {"Allo-Feedback", "Allo-Positive"},
    {"Auto-Feedback", "Auto-Positive"},
    {"Social Obligations Management", "Thanking"},
};

std::string sorted_pair(const std::string& a, const std::string& b) {
  return a < b ? a + "\x1f" + b : b + "\x1f" + a;
}

std::string acts_for(const std::string& turn_text) {
  const std::uint64_t h = h64("acts|" + turn_text);
  const std::size_t n = std::size(kPalette);
  const auto& first = kPalette[h % n];
  std::string out = std::string("{\"Dim\": \"") + first.dim + "\", \"Func\": \"" + first.func + "\"}";
  if ((h >> 8) % 3 == 0) {
    const auto& second = kPalette[(h >> 16) % n];
    if (std::string(second.dim) == first.dim && std::string(second.func) != first.func) {
      // Same dimension: exercise the "&" form.
      out = std::string("{\"Dim\": \"") + first.dim + "\", \"Func\": \"" + first.func + " & " + second.func + "\"}";
    } else {
      out += std::string(" {\"Dim\": \"") + second.dim + "\", \"Func\": \"" + second.func + "\"}";
    }
  }
  if ((h >> 24) % 23 == 0) out += " {\"Dim\": \"Emotion\", \"Func\": \"Empathy\"}";
  return out;
}

std::string answer_block(const std::string& answer, bool with_explanation, const char* key = "Answer") {
  std::string out = "{\n\"" + std::string(key) + "\": \"" + answer + "\"";
  if (with_explanation) out += ",\n\"Explanation\": \"Response " + answer + " is more helpful here.\"";
  out += "\n}";
  return out;
}

std::string da_output(const std::vector<ManifestTurn>& turns, const std::string& answer, PromptDialect dialect) {
  std::ostringstream out;
  if (dialect == PromptDialect::Default) {
    for (const auto& t : turns) out << t.label << ": " << t.text << " <SEP> " << acts_for(t.text) << "\n";
    out << "\n" << answer_block(answer, true) << "\n";
  } else {
    out << "{\n";
    for (const auto& t : turns) out << "\"" << t.label << ": " << t.text << "\": \"" << acts_for(t.text) << "\",\n";
    out << "'Answer': '" << answer << "',\n'Explanation': 'Response " << answer << " is more helpful here.'\n}\n";
  }
  return out.str();
}

std::string maxim_output(const std::string& r1, const std::string& r2, const std::string& answer) {
  const std::string pair = sorted_pair(r1, r2);
  const std::string& smaller = r1 < r2 ? r1 : r2;
  const char* smaller_slot = &smaller == &r1 ? "1" : "2";
  const char* other_slot = &smaller == &r1 ? "2" : "1";
  std::ostringstream out;
  out << "{\n";
  for (MaximId m : all_maxims()) {
    std::uint64_t v = h64("maxim|" + std::string(name(m)) + "|" + pair) % 4;
    const char* verdict = v == 0 ? smaller_slot : v == 1 ? other_slot : v == 2 ? "both" : "neither";
    out << "\"" << name(m) << "\": \"" << verdict << "\",\n";
  }
  out << "\"Explanation\": \"Response " << answer << " satisfies more maxims.\",\n";
  out << "\"Final Answer\": \"" << answer << "\"\n}\n";
  return out.str();
}

}  // namespace

std::uint64_t h64(const std::string& s) {
  auto d = sha256(s);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  return v;
}

std::vector<ManifestTurn> dialog_of(const std::string& prompt) {
  const std::string header = "\nDialog -\n";
  auto pos = prompt.rfind(header);
  if (pos == std::string::npos) return {};
  std::istringstream in(prompt.substr(pos + header.size()));
  std::vector<ManifestTurn> turns;
  std::string line;
  while (std::getline(in, line)) {
    auto colon = line.find(": ");
    if (colon == std::string::npos) continue;
    turns.push_back({line.substr(0, colon), line.substr(colon + 2)});
  }
  return turns;
}

JudgeBehavior behavior_for(PromptKind kind, const std::string& r1, const std::string& r2) {
  std::uint64_t h = h64("behavior|" + std::string(to_string(kind)) + "|" + sorted_pair(r1, r2)) % 20;
  if (h < 12) return JudgeBehavior::Consistent;
  if (h < 16) return JudgeBehavior::PositionBiased;
  if (h < 18) return JudgeBehavior::Flaky;
  if (h < 19) return JudgeBehavior::BrokenOneOrder;
  return JudgeBehavior::Refuses;
}

ChatResponse SyntheticJudge::complete(const ChatRequest& req) {
  ++calls_;
  const auto turns = dialog_of(req.prompt);
  ChatResponse resp;
  resp.metadata = {{"synthetic", true}};
  if (turns.size() < 3) {
    resp.text = "I could not find the dialog.";
    return resp;
  }
  const std::string& r1 = turns[turns.size() - 2].text;
  const std::string& r2 = turns[turns.size() - 1].text;
  const PromptKind kind = req.key.kind;
  const std::string kind_s(to_string(kind));
  const std::string preferred = h64("quality|" + kind_s + "|" + r1) > h64("quality|" + kind_s + "|" + r2) ? "1" : "2";
  const std::size_t attempt = req.key.attempt;

  std::string answer = preferred;
  switch (behavior_for(kind, r1, r2)) {
    case JudgeBehavior::Consistent:
      break;
    case JudgeBehavior::PositionBiased:
      answer = "1";
      break;
    case JudgeBehavior::Flaky: {
      std::size_t bad = 1 + h64("flaky|" + kind_s + "|" + sorted_pair(r1, r2)) % 5;
      if (attempt <= bad) {
        resp.text = "Both responses have merit, so it is hard to say.";
        return resp;
      }
      break;
    }
    case JudgeBehavior::BrokenOneOrder:
      if (r1 < r2) {
        resp.text = "{\"Answer\": \"both\"}";
        return resp;
      }
      break;
    case JudgeBehavior::Refuses:
      if (attempt <= 2) {
        resp.refused = true;
        resp.metadata["finish_reason"] = "content_filter";
        return resp;
      }
      break;
  }

  switch (kind) {
    case PromptKind::IO: resp.text = answer_block(answer, false); break;
    case PromptKind::WExpl: resp.text = answer_block(answer, true); break;
    case PromptKind::DA: resp.text = da_output(turns, answer, dialect_); break;
    case PromptKind::Maxim: resp.text = maxim_output(r1, r2, answer); break;
  }
  return resp;
}

}  // namespace amulet::testing
