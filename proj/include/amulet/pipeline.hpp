#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "amulet/analysis.hpp"
#include "amulet/backend.hpp"
#include "amulet/config.hpp"
#include "amulet/ingest.hpp"
#include "amulet/jury.hpp"
#include "amulet/scorer.hpp"

namespace amulet {

/// Runs f(i) for i in [0, n) on up to `workers` threads. If any call throws,
/// the exception of the lowest index is rethrown after all threads finish.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct PreparedDataset {
  const DatasetConfig* config = nullptr;
  CleaningResult cleaned;
  std::string sha256;  // of the raw input file
};

struct CascadeRun {
  std::string dataset;
  std::string cascade;
  std::vector<Outcome> outcomes;  // instance order
  Accounting accounting;
};

/// Wires configuration, caches and modules together. Every command writes
/// under cfg.out and refreshes out/manifest.json.
class Pipeline {
 public:
  /// `live` replaces the HTTP backend in live mode (used by tests).
  explicit Pipeline(RunConfig cfg, ChatBackend* live = nullptr);
  ~Pipeline();

  const RunConfig& config() const { return cfg_; }

  PreparedDataset prepare(const DatasetConfig& d) const;

  std::vector<CleaningReport> clean(const std::optional<std::string>& dataset);
  std::vector<MethodResult> judge(const std::string& dataset, PromptKind kind);
  std::vector<CascadeRun> jury(const std::optional<std::string>& dataset, const std::optional<std::string>& cascade);
  AnalysisReport analyze(const std::string& dataset);
  /// Merges the outputs of earlier commands into report.md and summary.json.
  void report();

  std::vector<std::string> dataset_names(const std::optional<std::string>& only) const;
  void write_manifest() const;

 private:
  ChatBackend& backend();
  std::map<std::string, Scorer*> scorers();
  std::filesystem::path out(const std::filesystem::path& rel) const;

  RunConfig cfg_;
  ChatBackend* live_override_;
  std::unique_ptr<TranscriptStore> store_;
  std::unique_ptr<ChatBackend> http_;
  std::unique_ptr<CachedBackend> cached_;
  std::unique_ptr<AppendLog> score_log_;
  std::vector<std::unique_ptr<Scorer>> scorer_impls_;
  std::map<std::string, Scorer*> scorers_;
};

// Output helpers, shared with tests.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
std::string csv_escape(const std::string& field);
std::string csv_row(const std::vector<std::string>& fields);

}  // namespace amulet
