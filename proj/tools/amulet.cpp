#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "amulet/pipeline.hpp"

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::string> dataset;
  std::optional<std::string> cascade;
  std::optional<std::string> method;
  std::optional<std::string> out;
  std::optional<std::size_t> min_human_turns;
  std::optional<std::size_t> concurrency;
  bool replay = false;
  bool live = false;
};

amulet::RunConfig load_config(const Flags& f) {
  namespace fs = std::filesystem;
  const fs::path path = f.config;
  std::string text;
  try {
    text = amulet::read_file(path);
  } catch (const std::exception&) {
    throw amulet::ConfigError({"--config: cannot read " + f.config});
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw amulet::ConfigError({f.config + ": " + e.what()});
  }
  if (!j.is_object()) throw amulet::ConfigError({"config: expected an object"});
  // Command-line flags take precedence over the file.
  if (f.replay) j["mode"] = "replay";
  if (f.live) j["mode"] = "live";
  if (f.out) j["out"] = fs::absolute(*f.out).string();
  if (f.concurrency) j["concurrency"] = *f.concurrency;
  if (f.min_human_turns && j.contains("datasets") && j["datasets"].is_object()) {
    for (auto& [_, d] : j["datasets"].items()) {
      if (d.is_object()) d["min_human_turns"] = *f.min_human_turns;
    }
  }
  return amulet::RunConfig::from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

void print_accounting(const std::vector<amulet::CascadeRun>& runs) {
  std::cout << "dataset\tcascade\tn\taccuracy\twin\ttie\tloss\n";
  for (const auto& r : runs) {
    const auto& a = r.accounting;
    std::cout << r.dataset << '\t' << r.cascade << '\t' << a.total << '\t' << a.accuracy() << '\t' << a.win_pct()
              << '\t' << a.tie_pct() << '\t' << a.loss_pct() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-turn preference judging with dialog acts and maxims"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Run configuration (JSON)")->required();
    sub->add_option("--out", f.out, "Output directory (overrides config)");
    sub->add_option("--concurrency", f.concurrency, "Worker threads (overrides config)");
    auto* replay = sub->add_flag("--replay", f.replay, "Serve completions from the transcript cache only");
    auto* live = sub->add_flag("--live", f.live, "Call the configured backend on cache misses");
    replay->excludes(live);
  };

  auto* clean = app.add_subcommand("clean", "Clean datasets and write cleaning reports");
  add_common(clean);
  clean->add_option("--dataset", f.dataset, "Only this dataset");
  clean->add_option("--min-human-turns", f.min_human_turns, "Minimum human turns (overrides config)");

  auto* judge = app.add_subcommand("judge", "Run one judging method over a dataset");
  add_common(judge);
  judge->add_option("--dataset", f.dataset, "Dataset name")->required();
  judge->add_option("--method", f.method, "IO, WExpl, DA or Maxim")->required();
  judge->add_option("--min-human-turns", f.min_human_turns, "Minimum human turns (overrides config)");

  auto* jury = app.add_subcommand("jury", "Run cascades and write outcome logs and accuracy tables");
  add_common(jury);
  jury->add_option("--dataset", f.dataset, "Only this dataset");
  jury->add_option("--cascade", f.cascade, "Only this cascade");
  jury->add_option("--min-human-turns", f.min_human_turns, "Minimum human turns (overrides config)");

  auto* analyze = app.add_subcommand("analyze", "Compute dialog-act and maxim analyses");
  add_common(analyze);
  analyze->add_option("--dataset", f.dataset, "Only this dataset");
  analyze->add_option("--min-human-turns", f.min_human_turns, "Minimum human turns (overrides config)");

  auto* report = app.add_subcommand("report", "Merge outputs into report.md and summary.json");
  add_common(report);

  CLI11_PARSE(app, argc, argv);

  try {
    amulet::Pipeline pipeline(load_config(f));
    if (clean->parsed()) {
      auto names = pipeline.dataset_names(f.dataset);
      auto reports = pipeline.clean(f.dataset);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        std::cout << names[i] << ": " << reports[i].input << " records, " << reports[i].survivors << " kept\n";
      }
    } else if (judge->parsed()) {
      amulet::PromptKind kind;
      try {
        kind = amulet::parse_prompt_kind(*f.method);
      } catch (const std::exception&) {
        throw amulet::ConfigError({"--method: expected IO, WExpl, DA or Maxim"});
      }
      auto results = pipeline.judge(*f.dataset, kind);
      std::cout << *f.dataset << ": judged " << results.size() << " instances with " << *f.method << "\n";
    } else if (jury->parsed()) {
      print_accounting(pipeline.jury(f.dataset, f.cascade));
    } else if (analyze->parsed()) {
      for (const auto& name : pipeline.dataset_names(f.dataset)) {
        auto r = pipeline.analyze(name);
        std::cout << name << ": analyzed " << r.with_da << " instances with DA, " << r.with_maxim
                  << " with maxim sheets\n";
      }
    } else if (report->parsed()) {
      pipeline.report();
    }
  } catch (const amulet::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const amulet::ReplayMiss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const amulet::DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
