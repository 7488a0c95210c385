#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "amulet/domain.hpp"

namespace amulet {

enum class PromptKind : std::uint8_t { IO, WExpl, DA, Maxim };
enum class ResponseOrder : std::uint8_t { Original, Swapped };
enum class PromptDialect : std::uint8_t { Default, ClaudeDA };

std::string_view to_string(PromptKind k);
std::string_view to_string(ResponseOrder o);
std::string_view to_string(PromptDialect d);
PromptKind parse_prompt_kind(std::string_view s);
ResponseOrder parse_response_order(std::string_view s);
PromptDialect parse_prompt_dialect(std::string_view s);

inline constexpr std::string_view kDefaultTemplateVersion = "v1";

struct PromptTemplate {
  PromptKind kind;
  PromptDialect dialect;
  std::string version;
  std::string text;  // placeholders: {{conversation}}, {{response_1}}, {{response_2}}
  std::string hash;  // sha256 hex of text
};

class TemplateRegistry {
 public:
  /// Registry holding the templates compiled into the library.
  static const TemplateRegistry& builtin();

  void add(PromptKind kind, PromptDialect dialect, std::string version, std::string text);
  /// Throws std::out_of_range when no template is registered for the key.
  const PromptTemplate& get(PromptKind kind, PromptDialect dialect, std::string_view version) const;
  std::vector<const PromptTemplate*> all() const;

 private:
  std::map<std::tuple<PromptKind, PromptDialect, std::string>, PromptTemplate> templates_;
};

struct ManifestTurn {
  std::string label;  // "Human", "Assistant", "Assistant-1", "Assistant-2"
  std::string text;
};

struct RenderedPrompt {
  PromptKind kind;
  ResponseOrder order;
  PromptDialect dialect;
  std::string text;
  std::vector<ManifestTurn> manifest;  // context turns, then the two labeled responses
  std::string template_version;
  std::string template_hash;
};

class PromptError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

RenderedPrompt render(PromptKind kind, const PreferenceInstance& e, ResponseOrder order, PromptDialect dialect,
                      const TemplateRegistry& registry = TemplateRegistry::builtin(),
                      std::string_view version = kDefaultTemplateVersion);

class UnparseableAnswer : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Maps a positional "1"/"2" answer back to the response it named.
Choice map_answer(ResponseOrder order, std::string_view raw);

}  // namespace amulet
