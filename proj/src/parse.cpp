#include "amulet/parse.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "amulet/text.hpp"

namespace amulet {

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
}

bool is_quote(char c) { return c == '"' || c == '\''; }

bool is_hspace(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::size_t line_end(std::string_view s, std::size_t from) {
  auto p = s.find('\n', from);
  return p == std::string_view::npos ? s.size() : p;
}

enum class ValueMode { Short, Long };

struct KeyHit {
  std::size_t key_begin;
  std::size_t value_begin;
  std::size_t value_end;  // one past the raw value, including a closing quote
  std::string value;
};

// Reads the value that starts at or after position v (after the colon).
KeyHit read_value(std::string_view s, std::size_t key_begin, std::size_t v, ValueMode mode) {
  while (v < s.size() && (is_hspace(s[v]) || s[v] == '*')) ++v;
  KeyHit hit{key_begin, v, v, {}};
  std::size_t eol = line_end(s, v);
  if (v < s.size() && is_quote(s[v])) {
    char q = s[v];
    std::size_t start = v + 1;
    std::size_t end = std::string_view::npos;
    if (mode == ValueMode::Short) {
      for (std::size_t k = start; k < eol; ++k) {
        if (is_quote(s[k])) {
          end = k;
          break;
        }
      }
    } else {
      // A closing quote is one followed by a field or object terminator.
      for (std::size_t k = start; k < eol; ++k) {
        if (s[k] != q) continue;
        std::size_t t = k + 1;
        while (t < s.size() && is_hspace(s[t])) ++t;
        if (t >= s.size() || s[t] == ',' || s[t] == '}' || s[t] == '\n') {
          end = k;
          break;
        }
      }
    }
    if (end == std::string_view::npos) {
      hit.value = std::string(text::trim(s.substr(start, eol - start)));
      hit.value_end = eol;
    } else {
      hit.value = std::string(s.substr(start, end - start));
      hit.value_end = end + 1;
    }
    return hit;
  }
  std::size_t end = v;
  if (mode == ValueMode::Short) {
    while (end < eol && s[end] != ',' && s[end] != '}') ++end;
  } else {
    end = eol;
  }
  hit.value = std::string(text::trim(s.substr(v, end - v)));
  while (!hit.value.empty() && hit.value.back() == '*') hit.value.pop_back();
  hit.value_end = end;
  return hit;
}

// Occurrences of `key` used as a key: a standalone word, optionally quoted or
// bolded, followed by a colon.
std::vector<KeyHit> find_keys(std::string_view s, std::string_view key, ValueMode mode) {
  std::vector<KeyHit> out;
  const std::string hay = lower(s);
  const std::string needle = lower(key);
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    std::size_t i = pos;
    std::size_t j = pos + needle.size();
    pos = j;
    if (i > 0 && is_word_char(s[i - 1])) continue;
    if (j < s.size() && is_word_char(s[j])) continue;
    while (j < s.size() && (is_quote(s[j]) || s[j] == '*' || is_hspace(s[j]))) ++j;
    if (j >= s.size() || s[j] != ':') continue;
    out.push_back(read_value(s, i, j + 1, mode));
  }
  return out;
}

bool preceded_by_final(std::string_view s, std::size_t key_begin) {
  std::size_t k = key_begin;
  while (k > 0 && (is_hspace(s[k - 1]) || s[k - 1] == '_')) --k;
  return k >= 5 && lower(s.substr(k - 5, 5)) == "final" && (k == 5 || !is_word_char(s[k - 6]));
}

std::string strip_trailing_period(std::string v) {
  while (!v.empty() && (v.back() == '.' || std::isspace(static_cast<unsigned char>(v.back())))) v.pop_back();
  return v;
}

// "1", "Response-1", "Assistant 2", ... -> "1"/"2"; nullopt otherwise.
std::optional<std::string> normalize_slot(std::string_view raw) {
  std::string v = strip_trailing_period(lower(text::trim(raw)));
  for (std::string_view prefix : {"response", "assistant"}) {
    if (v.rfind(prefix, 0) == 0) {
      v = v.substr(prefix.size());
      if (!v.empty() && (v[0] == '-' || v[0] == ' ' || v[0] == '_')) v = v.substr(1);
      break;
    }
  }
  if (v == "1" || v == "2") return v;
  return std::nullopt;
}

// Blanks the explanation value so that key-like text inside it is ignored.
std::string mask_explanation(std::string_view s) {
  std::string out(s);
  for (const auto& hit : find_keys(s, "Explanation", ValueMode::Long)) {
    for (std::size_t k = hit.value_begin; k < hit.value_end && k < out.size(); ++k) {
      if (out[k] != '\n') out[k] = ' ';
    }
  }
  return out;
}

// Canonical whitespace and surrounding quoting for echo comparison.
std::string echo_form(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  auto strip = [](char c) { return is_quote(c) || c == '*' || c == ':' || c == '{' || c == ' '; };
  std::size_t b = 0, e = out.size();
  while (b < e && strip(out[b])) ++b;
  while (e > b && strip(out[e - 1])) --e;
  return out.substr(b, e - b);
}

// Start of the text after `label:` at the beginning of a line inside
// [from, to), or npos.
std::size_t find_label(std::string_view s, std::size_t from, std::size_t to, std::string_view label) {
  std::size_t line = from;
  while (line < to) {
    std::size_t k = line;
    while (k < to && (is_hspace(s[k]) || is_quote(s[k]) || s[k] == '*' || s[k] == '{')) ++k;
    if (k + label.size() <= to && text::starts_with_icase(s.substr(k), label)) {
      std::size_t j = k + label.size();
      while (j < to && s[j] == '*') ++j;
      if (j < to && s[j] == ':') {
        ++j;
        while (j < to && s[j] == '*') ++j;
        return j;
      }
    }
    std::size_t nl = s.find('\n', line);
    if (nl == std::string_view::npos || nl >= to) break;
    line = nl + 1;
  }
  return std::string_view::npos;
}

// Position of `label:` (optionally bolded) inside [from, to) that starts a
// word, or npos.
std::size_t find_inline_label(std::string_view s, std::size_t from, std::size_t to, std::string_view label) {
  const std::string hay = lower(s.substr(from, to - from));
  const std::string needle = lower(label);
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    std::size_t i = from + pos;
    std::size_t j = i + needle.size();
    pos += needle.size();
    if (i > from && is_word_char(s[i - 1])) continue;
    while (j < to && s[j] == '*') ++j;
    if (j < to && s[j] == ':') {
      while (i > from && s[i - 1] == '*') --i;
      return i;
    }
  }
  return std::string_view::npos;
}

std::size_t find_separator(std::string_view s, std::size_t from, PromptDialect dialect) {
  if (dialect == PromptDialect::Default) {
    std::string hay = lower(s.substr(from));
    auto p = hay.find("<sep>");
    return p == std::string::npos ? std::string_view::npos : from + p;
  }
  std::size_t best = std::string_view::npos;
  for (std::string_view key : {"Dim", "Func"}) {
    auto hits = find_keys(s.substr(from), key, ValueMode::Short);
    if (hits.empty()) continue;
    std::size_t p = from + hits.front().key_begin;
    // Include an opening quote or brace directly before the key.
    while (p > from && (is_quote(s[p - 1]) || s[p - 1] == '{')) --p;
    best = std::min(best, p);
  }
  return best;
}

void parse_annotation(std::string_view seg, TurnAnnotation& turn, std::size_t turn_no) {
  struct Tok {
    std::size_t pos;
    bool is_dim;
    std::string value;
  };
  std::vector<Tok> toks;
  for (const auto& h : find_keys(seg, "Dim", ValueMode::Short)) toks.push_back({h.key_begin, true, h.value});
  for (const auto& h : find_keys(seg, "Func", ValueMode::Short)) toks.push_back({h.key_begin, false, h.value});
  if (toks.empty()) throw FormatError("turn " + std::to_string(turn_no) + ": no dialog-act annotation");
  std::sort(toks.begin(), toks.end(), [](const Tok& a, const Tok& b) { return a.pos < b.pos; });

  auto hallucinate = [&](std::string token) {
    ++turn.raw_units;
    turn.hallucinated.push_back(std::move(token));
  };

  std::optional<std::string> pending_dim;
  auto flush_dim_without_func = [&] {
    if (!pending_dim) return;
    if (!parse_dimension(*pending_dim)) turn.dimensions_valid = false;
    turn.functions_valid = false;
    hallucinate(*pending_dim);
    pending_dim.reset();
  };

  for (auto& t : toks) {
    std::string value(text::trim(t.value));
    if (t.is_dim) {
      flush_dim_without_func();
      pending_dim = value;
      continue;
    }
    if (!pending_dim) {
      turn.functions_valid = false;
      hallucinate(value);
      continue;
    }
    auto dim = parse_dimension(*pending_dim);
    if (!dim) {
      turn.dimensions_valid = false;
      hallucinate(*pending_dim);
      pending_dim.reset();
      continue;
    }
    for (const auto& part : text::split(value, '&')) {
      std::string p(text::trim(part));
      auto fn = parse_function(p);
      if (!fn || dimension_of(*fn) != *dim) {
        turn.functions_valid = false;
        hallucinate(p);
        continue;
      }
      ++turn.raw_units;
      ++turn.accepted_units;
      turn.acts.insert(*dim, *fn);
    }
    pending_dim.reset();
  }
  flush_dim_without_func();
}

std::string json_quote(std::string_view s) {
  // Single-line, double-quoted; callers keep values free of quotes.
  std::string out = "\"";
  for (char c : s) out += c == '\n' ? ' ' : c;
  out += '"';
  return out;
}

std::string annotation_objects(const TurnAnnotation& t) {
  std::string out;
  for (const auto& act : t.acts) {
    if (!out.empty()) out += ' ';
    out += "{\"Dim\": " + json_quote(name(act.dimension)) + ", \"Func\": " + json_quote(name(act.function)) + "}";
  }
  for (const auto& h : t.hallucinated) {
    if (!out.empty()) out += ' ';
    out += "{\"Dim\": " + json_quote(h) + "}";
  }
  return out;
}

}  // namespace

namespace parse_detail {

std::string normalize_quotes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
      unsigned char d = static_cast<unsigned char>(s[i + 2]);
      if (d == 0x9C || d == 0x9D || d == 0x9E) {
        out += '"';
        i += 2;
        continue;
      }
      if (d == 0x98 || d == 0x99) {
        out += '\'';
        i += 2;
        continue;
      }
    }
    out += c == '`' ? '\'' : static_cast<char>(c);
  }
  return out;
}

std::string extract_answer(std::string_view text) {
  std::string masked = mask_explanation(text);
  std::vector<KeyHit> hits = find_keys(masked, "Final Answer", ValueMode::Short);
  if (hits.empty()) {
    for (auto& h : find_keys(masked, "Answer", ValueMode::Short)) {
      if (!preceded_by_final(masked, h.key_begin)) hits.push_back(std::move(h));
    }
  }
  if (hits.empty()) throw FormatError("no answer field");
  std::optional<std::string> answer;
  for (const auto& h : hits) {
    auto v = normalize_slot(h.value);
    if (!v) throw FormatError("answer must be 1 or 2, got '" + h.value + "'");
    if (answer && *answer != *v) throw FormatError("conflicting answer fields");
    answer = v;
  }
  return *answer;
}

std::optional<std::string> extract_explanation(std::string_view text) {
  auto hits = find_keys(text, "Explanation", ValueMode::Long);
  if (hits.empty()) return std::nullopt;
  return hits.front().value;
}

}  // namespace parse_detail

std::vector<DialogActSet> DaJudgment::annotations() const {
  std::vector<DialogActSet> out;
  out.reserve(turns.size());
  for (const auto& t : turns) out.push_back(t.acts);
  return out;
}

std::vector<std::string> DaJudgment::hallucinated_tokens() const {
  std::vector<std::string> out;
  for (const auto& t : turns) out.insert(out.end(), t.hallucinated.begin(), t.hallucinated.end());
  return out;
}

DaJudgment parse_da(std::string_view raw, std::span<const ManifestTurn> manifest, PromptDialect dialect,
                    const DaParseOptions& options) {
  const std::string s = parse_detail::normalize_quotes(raw);
  DaJudgment j;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& mt = manifest[i];
    const std::size_t turn_no = i + 1;
    std::size_t sep = find_separator(s, cursor, dialect);
    if (sep == std::string_view::npos) {
      throw FormatError("turn " + std::to_string(turn_no) + " (" + mt.label + "): missing annotation");
    }
    std::size_t echo_begin = find_label(s, cursor, sep, mt.label);
    if (echo_begin == std::string_view::npos) echo_begin = cursor;
    std::string echo = echo_form(std::string_view(s).substr(echo_begin, sep - echo_begin));
    std::string expected = echo_form(parse_detail::normalize_quotes(mt.text));

    TurnAnnotation turn;
    std::size_t longest = std::max(echo.size(), expected.size());
    auto limit = static_cast<std::size_t>(std::floor(options.echo_tolerance * static_cast<double>(longest)));
    turn.echo_distance = text::bounded_edit_distance(echo, expected, limit);
    if (turn.echo_distance > limit) {
      throw FormatError("turn " + std::to_string(turn_no) + " (" + mt.label + "): echoed text does not match");
    }

    std::size_t ann_begin = dialect == PromptDialect::Default ? sep + 5 : sep;
    std::size_t ann_end = line_end(s, ann_begin);
    if (i + 1 < manifest.size()) {
      // The next turn may follow on the same line.
      std::size_t next = find_inline_label(s, ann_begin, ann_end, manifest[i + 1].label);
      if (next != std::string_view::npos) ann_end = next;
    }
    parse_annotation(std::string_view(s).substr(ann_begin, ann_end - ann_begin), turn, turn_no);
    j.turns.push_back(std::move(turn));
    cursor = ann_end;
  }

  std::string_view tail = std::string_view(s).substr(cursor);
  j.answer = parse_detail::extract_answer(tail);
  j.explanation = parse_detail::extract_explanation(tail).value_or("");
  return j;
}

MaximJudgment parse_maxim(std::string_view raw) {
  const std::string s = parse_detail::normalize_quotes(raw);
  const std::string masked = mask_explanation(s);
  std::vector<std::pair<MaximId, MaximVerdict>> entries;
  for (MaximId m : all_maxims()) {
    auto hits = find_keys(masked, name(m), ValueMode::Short);
    if (hits.empty()) throw FormatError("missing maxim " + std::string(name(m)));
    std::optional<MaximVerdict> verdict;
    for (const auto& h : hits) {
      std::string v = strip_trailing_period(lower(text::trim(h.value)));
      MaximVerdict parsed;
      if (v == "both") {
        parsed = MaximVerdict::Both;
      } else if (v == "neither") {
        parsed = MaximVerdict::Neither;
      } else if (auto slot = normalize_slot(v)) {
        parsed = *slot == "1" ? MaximVerdict::Resp1 : MaximVerdict::Resp2;
      } else {
        throw FormatError("maxim " + std::string(name(m)) + ": invalid verdict '" + h.value + "'");
      }
      if (verdict && *verdict != parsed) throw FormatError("conflicting verdicts for " + std::string(name(m)));
      verdict = parsed;
    }
    entries.emplace_back(m, *verdict);
  }
  MaximJudgment j{MaximSheet::from_entries(entries), parse_detail::extract_answer(s),
                  parse_detail::extract_explanation(s).value_or("")};
  return j;
}

AnswerJudgment parse_answer(std::string_view raw, PromptKind kind) {
  if (kind != PromptKind::IO && kind != PromptKind::WExpl) {
    throw std::invalid_argument("parse_answer: kind must be IO or WExpl");
  }
  const std::string s = parse_detail::normalize_quotes(raw);
  AnswerJudgment j;
  j.answer = parse_detail::extract_answer(s);
  if (kind == PromptKind::WExpl) j.explanation = parse_detail::extract_explanation(s);
  return j;
}

std::string serialize_da(const DaJudgment& j, std::span<const ManifestTurn> manifest, PromptDialect dialect) {
  if (j.turns.size() != manifest.size()) throw std::invalid_argument("serialize_da: turn count mismatch");
  std::string out;
  if (dialect == PromptDialect::Default) {
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      out += manifest[i].label + ": " + manifest[i].text + " <SEP> " + annotation_objects(j.turns[i]) + "\n";
    }
    out += "\n{\n\"Answer\": " + json_quote(j.answer) + ",\n\"Explanation\": " + json_quote(j.explanation) + "\n}\n";
    return out;
  }
  out += "{\n";
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    out += "\"" + manifest[i].label + ": " + manifest[i].text + "\": \"" + annotation_objects(j.turns[i]) + "\",\n";
  }
  out += "'Answer': '" + j.answer + "',\n'Explanation': '" + j.explanation + "'\n}\n";
  return out;
}

std::string serialize_maxim(const MaximJudgment& j) {
  std::string out = "{\n";
  for (MaximId m : all_maxims()) {
    out += json_quote(name(m)) + ": " + json_quote(to_string(j.sheet.verdict(m))) + ",\n";
  }
  out += "\"Explanation\": " + json_quote(j.explanation) + ",\n";
  out += "\"Final Answer\": " + json_quote(j.answer) + "\n}\n";
  return out;
}

std::string serialize_answer(const AnswerJudgment& j) {
  std::string out = "{\n\"Answer\": " + json_quote(j.answer);
  if (j.explanation) out += ",\n\"Explanation\": " + json_quote(*j.explanation);
  out += "\n}\n";
  return out;
}

bool structurally_equal(const DaJudgment& a, const DaJudgment& b) {
  if (a.answer != b.answer || a.explanation != b.explanation || a.turns.size() != b.turns.size()) return false;
  for (std::size_t i = 0; i < a.turns.size(); ++i) {
    if (a.turns[i].acts != b.turns[i].acts || a.turns[i].hallucinated != b.turns[i].hallucinated) return false;
  }
  return true;
}

void ParseStats::add(const DaJudgment& j) {
  ++judgments;
  for (const auto& t : j.turns) {
    ++turns;
    turns_valid_dimensions += t.dimensions_valid ? 1 : 0;
    turns_valid_functions += t.functions_valid ? 1 : 0;
    raw_units += t.raw_units;
    accepted_units += t.accepted_units;
    echo_drift_turns += t.echo_distance > 0 ? 1 : 0;
    for (const auto& h : t.hallucinated) ++hallucinated[h];
  }
}

void ParseStats::merge(const ParseStats& o) {
  judgments += o.judgments;
  turns += o.turns;
  turns_valid_dimensions += o.turns_valid_dimensions;
  turns_valid_functions += o.turns_valid_functions;
  raw_units += o.raw_units;
  accepted_units += o.accepted_units;
  echo_drift_turns += o.echo_drift_turns;
  for (const auto& [k, v] : o.hallucinated) hallucinated[k] += v;
}

double ParseStats::pct_valid_dimensions() const {
  return turns == 0 ? 100.0 : 100.0 * static_cast<double>(turns_valid_dimensions) / static_cast<double>(turns);
}

double ParseStats::pct_valid_functions() const {
  return turns == 0 ? 100.0 : 100.0 * static_cast<double>(turns_valid_functions) / static_cast<double>(turns);
}

}  // namespace amulet
