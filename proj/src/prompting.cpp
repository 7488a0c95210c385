#include "amulet/prompting.hpp"

#include "amulet/digest.hpp"
#include "embedded_templates.hpp"

namespace amulet {

std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::IO: return "IO";
    case PromptKind::WExpl: return "WExpl";
    case PromptKind::DA: return "DA";
    case PromptKind::Maxim: return "Maxim";
  }
  return "?";
}

std::string_view to_string(ResponseOrder o) { return o == ResponseOrder::Original ? "original" : "swapped"; }

std::string_view to_string(PromptDialect d) { return d == PromptDialect::Default ? "default" : "claude-da"; }

PromptKind parse_prompt_kind(std::string_view s) {
  for (auto k : {PromptKind::IO, PromptKind::WExpl, PromptKind::DA, PromptKind::Maxim}) {
    if (s == to_string(k)) return k;
  }
  if (s == "W-Expl") return PromptKind::WExpl;
  if (s == "I/O") return PromptKind::IO;
  throw std::invalid_argument("unknown prompt kind '" + std::string(s) + "'");
}

ResponseOrder parse_response_order(std::string_view s) {
  if (s == "original") return ResponseOrder::Original;
  if (s == "swapped") return ResponseOrder::Swapped;
  throw std::invalid_argument("unknown response order '" + std::string(s) + "'");
}

PromptDialect parse_prompt_dialect(std::string_view s) {
  if (s == "default") return PromptDialect::Default;
  if (s == "claude-da") return PromptDialect::ClaudeDA;
  throw std::invalid_argument("unknown prompt dialect '" + std::string(s) + "'");
}

const TemplateRegistry& TemplateRegistry::builtin() {
  static const TemplateRegistry registry = [] {
    TemplateRegistry r;
    for (const auto& t : embedded::kTemplates) {
      r.add(parse_prompt_kind(t.kind), parse_prompt_dialect(t.dialect), std::string(t.version), std::string(t.text));
    }
    return r;
  }();
  return registry;
}

void TemplateRegistry::add(PromptKind kind, PromptDialect dialect, std::string version, std::string text) {
  PromptTemplate t{kind, dialect, version, std::move(text), {}};
  t.hash = sha256_hex(t.text);
  templates_.insert_or_assign({kind, dialect, std::move(version)}, std::move(t));
}

const PromptTemplate& TemplateRegistry::get(PromptKind kind, PromptDialect dialect, std::string_view version) const {
  auto it = templates_.find({kind, dialect, std::string(version)});
  if (it == templates_.end()) {
    throw std::out_of_range("no template for " + std::string(to_string(kind)) + "/" + std::string(to_string(dialect)) +
                            "/" + std::string(version));
  }
  return it->second;
}

std::vector<const PromptTemplate*> TemplateRegistry::all() const {
  std::vector<const PromptTemplate*> out;
  for (const auto& [_, t] : templates_) out.push_back(&t);
  return out;
}

namespace {

// Single left-to-right pass, so placeholder-like text inside the
// substituted values is never expanded.
std::string substitute(std::string_view tpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tpl.size() + 1024);
  std::size_t i = 0;
  while (i < tpl.size()) {
    auto open = tpl.find("{{", i);
    if (open == std::string_view::npos) break;
    auto close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    auto key = tpl.substr(open + 2, close - open - 2);
    auto it = values.find(key);
    out.append(tpl.substr(i, open - i));
    if (it == values.end()) {
      out.append(tpl.substr(open, close + 2 - open));
    } else {
      out.append(it->second);
    }
    i = close + 2;
  }
  out.append(tpl.substr(i));
  return out;
}

}  // namespace

RenderedPrompt render(PromptKind kind, const PreferenceInstance& e, ResponseOrder order, PromptDialect dialect,
                      const TemplateRegistry& registry, std::string_view version) {
  if (dialect == PromptDialect::ClaudeDA && kind != PromptKind::DA) {
    throw PromptError("dialect claude-da applies to DA prompts only, not " + std::string(to_string(kind)));
  }
  const auto& tpl = registry.get(kind, dialect, version);

  RenderedPrompt out{kind, order, dialect, {}, {}, tpl.version, tpl.hash};
  std::string conversation;
  for (const auto& t : e.context.turns()) {
    std::string label = t.role == Role::Human ? "Human" : "Assistant";
    if (!conversation.empty()) conversation += '\n';
    conversation += label + ": " + t.text;
    out.manifest.push_back({std::move(label), t.text});
  }
  const auto& r1 = order == ResponseOrder::Original ? e.response_a : e.response_b;
  const auto& r2 = order == ResponseOrder::Original ? e.response_b : e.response_a;
  out.manifest.push_back({"Assistant-1", r1});
  out.manifest.push_back({"Assistant-2", r2});

  out.text = substitute(tpl.text, {{"conversation", conversation}, {"response_1", r1}, {"response_2", r2}});
  return out;
}

Choice map_answer(ResponseOrder order, std::string_view raw) {
  Choice positional;
  if (raw == "1") {
    positional = Choice::A;
  } else if (raw == "2") {
    positional = Choice::B;
  } else {
    throw UnparseableAnswer("unparseable answer '" + std::string(raw) + "'");
  }
  return order == ResponseOrder::Original ? positional : flip(positional);
}

}  // namespace amulet
