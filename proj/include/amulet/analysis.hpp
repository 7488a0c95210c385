#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amulet/domain.hpp"
#include "amulet/jury.hpp"
#include "amulet/parse.hpp"

namespace amulet {

/// First-vote annotations of one instance, oriented to chosen/rejected.
struct AnnotatedInstance {
  std::string id;
  std::vector<Role> context_roles;
  std::optional<std::vector<DialogActSet>> context_acts;  // aligned with context_roles
  std::optional<DialogActSet> chosen_acts;
  std::optional<DialogActSet> rejected_acts;
  /// Resp1 = chosen, Resp2 = rejected.
  std::optional<MaximSheet> maxim;

  bool has_da() const { return context_acts.has_value(); }
};

/// Builds an item from Original-order judgments (Assistant-1 = response_a).
/// Either judgment may be absent when the first vote failed.
AnnotatedInstance annotate(const PreferenceInstance& e, const DaJudgment* da_original,
                           const MaximJudgment* maxim_original);

/// Convenience over MethodResults; missing or failed first votes leave the
/// corresponding fields empty.
AnnotatedInstance annotate(const PreferenceInstance& e, const MethodResult* da, const MethodResult* maxim);

enum class Granularity : std::uint8_t { Full, Function, Dimension };

std::string_view to_string(Granularity g);

bool differs(const DialogActSet& x, const DialogActSet& y, Granularity g);

struct Ratio {
  std::size_t num = 0;
  std::size_t den = 0;
  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoleFrequency {
  std::vector<std::pair<std::string, std::size_t>> dimensions;  // descending count, then name
  std::vector<std::pair<std::string, std::size_t>> functions;
};

/// Counts per context turn: each dimension and each function present in the
/// turn's set is counted once.
std::map<Role, RoleFrequency> da_frequency(const std::vector<AnnotatedInstance>& items);

/// (x, number of conversations whose human turns carry >= x distinct
/// DialogActSets) for x = 1..max.
std::vector<std::pair<std::size_t, std::size_t>> da_count_cdf(const std::vector<AnnotatedInstance>& items);

/// Pooled over the dataset. Throws AnalysisError "no consecutive pairs" when
/// the denominator is zero.
Ratio turn_shift_rate(const std::vector<AnnotatedInstance>& items, Role role, Granularity g);

struct ConditionalShift {
  Ratio ratio;
  /// Changing human pairs whose second turn is the final human turn; their
  /// following assistant turn is the preference pair, so they are skipped.
  std::size_t excluded = 0;
};

ConditionalShift conditional_assistant_shift(const std::vector<AnnotatedInstance>& items);

/// Instances with at least one changing consecutive same-role pair.
Ratio conv_shift_rate(const std::vector<AnnotatedInstance>& items, Role role, Granularity g);

Ratio preference_da_diff(const std::vector<AnnotatedInstance>& items, Granularity g);

enum class MaximBalance : std::uint8_t { ChosenMore, RejectedMore, Equal };

std::string_view to_string(MaximBalance b);

struct CrossTable {
  /// counts[balance][0 = same DA, 1 = different DA]
  std::array<std::array<std::size_t, 2>, 3> counts{};
  std::size_t total = 0;
  double proportion(MaximBalance b, bool different_da) const;
};

/// Uses items carrying both response annotations and a maxim sheet.
CrossTable maxim_cross_table(const std::vector<AnnotatedInstance>& items);

struct MaximImportance {
  /// counts[maxim][0 chosen better, 1 rejected better, 2 both, 3 neither]
  std::array<std::array<std::size_t, 4>, kMaximCount> counts{};
  std::size_t total = 0;
  double proportion(MaximId m, std::size_t column) const;
};

MaximImportance maxim_importance(const std::vector<AnnotatedInstance>& items);

/// |satisfied_by(chosen) xor satisfied_by(rejected)| for one sheet.
std::size_t maxim_gap_of(const MaximSheet& s);

/// Mean over items with a sheet. Throws AnalysisError when there are none.
double maxim_gap(const std::vector<AnnotatedInstance>& items);

struct AnalysisReport {
  std::size_t instances = 0;
  std::size_t with_da = 0;
  std::size_t with_maxim = 0;
  std::map<Role, RoleFrequency> frequency;
  std::vector<std::pair<std::size_t, std::size_t>> cdf;
  /// (role, granularity) -> rate; absent when the denominator is zero.
  std::map<std::pair<Role, Granularity>, Ratio> turn_shift;
  std::map<std::pair<Role, Granularity>, Ratio> conv_shift;
  std::optional<ConditionalShift> conditional;
  std::map<Granularity, Ratio> preference_diff;
  CrossTable cross;
  MaximImportance importance;
  std::optional<double> gap;
};

AnalysisReport analyze(const std::vector<AnnotatedInstance>& items);

nlohmann::json to_json(const AnalysisReport& r);

}  // namespace amulet
