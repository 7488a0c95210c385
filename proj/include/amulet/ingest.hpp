#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amulet/domain.hpp"

namespace amulet {

/// One input line before any validation.
struct RawRecord {
  std::vector<std::pair<std::string, std::string>> messages;  // (role, text)
  std::string chosen;
  std::string rejected;
  std::optional<std::string> id;
  nlohmann::json meta;  // null when absent
  std::size_t line = 0;  // 1-based source line
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what + (field.empty() ? "" : " '" + field + "'")),
        line_(line),
        field_(std::move(field)) {}
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

RawRecord parse_record(const std::string& line_text, std::size_t line);
std::vector<RawRecord> load_dataset(const std::filesystem::path& path);
std::vector<RawRecord> load_dataset_from_string(const std::string& content);

enum class RejectReason {
  OverCap,
  IllFormedStructure,
  TooFewHumanTurns,
  IdenticalResponses,
  TurnTooLong,
  DuplicateOfReference,
  ReversedPreferenceOverlap,
};

std::string_view to_string(RejectReason r);

struct CleaningPolicy {
  std::size_t min_human_turns = 4;
  std::optional<std::size_t> max_words_per_turn;  // turns must have strictly fewer words
  std::optional<std::size_t> record_cap;          // keep only the first N records
  const std::vector<RawRecord>* reference = nullptr;
  std::string dataset_tag;
};

struct CleaningReport {
  std::map<RejectReason, std::size_t> rejections;
  std::size_t survivors = 0;
  std::size_t input = 0;

  std::size_t count(RejectReason r) const;
  std::size_t total_rejected() const;
  /// Flat (key, count) rows in the fixed rule order, survivors last.
  std::vector<std::pair<std::string, std::size_t>> rows() const;
  friend bool operator==(const CleaningReport&, const CleaningReport&) = default;
};

struct CleaningResult {
  std::vector<PreferenceInstance> survivors;
  std::vector<RawRecord> survivor_records;
  CleaningReport report;
};

CleaningResult clean(const std::vector<RawRecord>& records, const CleaningPolicy& policy);

/// Converts a structurally valid record; the dataset `chosen` text becomes
/// response_a.
PreferenceInstance to_instance(const RawRecord& r, const std::string& dataset_tag);

/// Inverse of to_instance for writing cleaned datasets.
RawRecord to_record(const PreferenceInstance& e);

std::vector<PreferenceInstance> subset_min_turns(const std::vector<PreferenceInstance>& instances, std::size_t k);

/// One JSON object per line, with the extra `human_turns` field.
std::string serialize_record(const RawRecord& r);
void write_dataset(const std::filesystem::path& path, const std::vector<RawRecord>& records);

}  // namespace amulet
