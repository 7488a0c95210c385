#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "amulet/domain.hpp"
#include "amulet/prompting.hpp"

namespace amulet {

/// A completion that does not have the expected structure. Triggers a retry.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TurnAnnotation {
  DialogActSet acts;
  /// Unrecognized dimension or function strings, in order of appearance.
  std::vector<std::string> hallucinated;
  /// Annotation units seen: one per (object, function part) under a known
  /// dimension, one per object otherwise. accepted_units + hallucinated.size()
  /// == raw_units.
  std::size_t raw_units = 0;
  std::size_t accepted_units = 0;
  bool dimensions_valid = true;
  bool functions_valid = true;
  std::size_t echo_distance = 0;
};

struct DaJudgment {
  std::vector<TurnAnnotation> turns;  // aligned with the prompt's turn manifest
  std::string answer;                 // "1" or "2"
  std::string explanation;

  std::vector<DialogActSet> annotations() const;
  std::vector<std::string> hallucinated_tokens() const;
};

struct MaximJudgment {
  MaximSheet sheet;  // Resp1 = Assistant-1 as shown in the prompt
  std::string answer;
  std::string explanation;
};

struct AnswerJudgment {
  std::string answer;
  std::optional<std::string> explanation;
};

struct DaParseOptions {
  /// Maximum edit distance between an echoed turn and the manifest turn,
  /// as a fraction of the longer of the two (after whitespace collapsing).
  double echo_tolerance = 0.10;
};

DaJudgment parse_da(std::string_view text, std::span<const ManifestTurn> manifest, PromptDialect dialect,
                    const DaParseOptions& options = {});
MaximJudgment parse_maxim(std::string_view text);
/// kind must be IO or WExpl.
AnswerJudgment parse_answer(std::string_view text, PromptKind kind);

/// Writes a judgment back in the layout the DA prompt asks for. Turns with
/// hallucinated tokens serialize them as dimension-only objects so that
/// re-parsing reproduces them.
std::string serialize_da(const DaJudgment& j, std::span<const ManifestTurn> manifest, PromptDialect dialect);
std::string serialize_maxim(const MaximJudgment& j);
std::string serialize_answer(const AnswerJudgment& j);

bool structurally_equal(const DaJudgment& a, const DaJudgment& b);

/// Aggregate DA parser statistics for one run.
struct ParseStats {
  std::size_t judgments = 0;
  std::size_t turns = 0;
  std::size_t turns_valid_dimensions = 0;
  std::size_t turns_valid_functions = 0;
  std::size_t raw_units = 0;
  std::size_t accepted_units = 0;
  std::size_t echo_drift_turns = 0;  // turns aligned with a nonzero echo distance
  std::map<std::string, std::size_t> hallucinated;

  void add(const DaJudgment& j);
  void merge(const ParseStats& other);
  double pct_valid_dimensions() const;
  double pct_valid_functions() const;
};

// Lower-level helpers shared with fixture generators.
namespace parse_detail {

/// Replaces typographic quotes and backticks with ASCII quotes.
std::string normalize_quotes(std::string_view s);

/// Value of the final answer key ("Final Answer" preferred, "Answer"
/// accepted), normalized to "1"/"2". Throws FormatError.
std::string extract_answer(std::string_view text);
std::optional<std::string> extract_explanation(std::string_view text);

}  // namespace parse_detail

}  // namespace amulet
