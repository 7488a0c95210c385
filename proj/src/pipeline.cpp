#include "amulet/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "amulet/digest.hpp"
#include "amulet/text.hpp"

namespace amulet {

using nlohmann::json;
namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed on " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

namespace {

std::string safe_name(std::string s) {
  for (auto& c : s) {
    if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
  }
  return s;
}

std::string num(double v) { return text::fixed(v, 6); }

std::vector<fs::path> sorted_entries(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

json accounting_json(const std::string& dataset, const std::string& cascade, const Accounting& a) {
  return {{"dataset", dataset},          {"cascade", cascade},          {"n", a.total},
          {"wins", a.wins},              {"ties", a.ties},              {"losses", a.losses},
          {"accuracy", a.accuracy()},    {"win_pct", a.win_pct()},      {"tie_pct", a.tie_pct()},
          {"loss_pct", a.loss_pct()}};
}

}  // namespace

Pipeline::Pipeline(RunConfig cfg, ChatBackend* live) : cfg_(std::move(cfg)), live_override_(live) {}

Pipeline::~Pipeline() = default;

fs::path Pipeline::out(const fs::path& rel) const { return cfg_.resolve(cfg_.out) / rel; }

ChatBackend& Pipeline::backend() {
  if (cached_) return *cached_;
  store_ = std::make_unique<TranscriptStore>(cfg_.resolve(cfg_.transcripts));
  ChatBackend* live = nullptr;
  if (cfg_.mode == BackendMode::Live) {
    if (live_override_) {
      live = live_override_;
    } else {
      HttpBackendConfig hc;
      hc.base_url = cfg_.backend.base_url;
      if (!cfg_.backend.auth_env.empty()) {
        const char* token = std::getenv(cfg_.backend.auth_env.c_str());
        if (!token) throw ConfigError({"backend.auth_env: environment variable " + cfg_.backend.auth_env + " is not set"});
        hc.api_key = token;
      }
      hc.timeout = std::chrono::milliseconds(cfg_.backend.timeout_ms);
      hc.transport_retries = cfg_.backend.transport_retries;
      hc.backoff = std::chrono::milliseconds(cfg_.backend.backoff_ms);
      http_ = std::make_unique<HttpChatBackend>(hc);
      live = http_.get();
    }
  }
  cached_ = std::make_unique<CachedBackend>(*store_, cfg_.mode, live);
  return *cached_;
}

std::map<std::string, Scorer*> Pipeline::scorers() {
  if (score_log_) return scorers_;
  score_log_ = std::make_unique<AppendLog>(cfg_.resolve(cfg_.scores));
  for (const auto& [id, sc] : cfg_.scorers) {
    if (sc.type == ScorerConfig::Type::Mock) {
      scorer_impls_.push_back(std::make_unique<MockScorer>());
      scorers_[id] = scorer_impls_.back().get();
      continue;
    }
    Scorer* inner = nullptr;
    if (cfg_.mode == BackendMode::Live) {
      scorer_impls_.push_back(
          std::make_unique<HttpScorer>(HttpScorerConfig{sc.base_url, id, std::chrono::milliseconds(sc.timeout_ms)}));
      inner = scorer_impls_.back().get();
    }
    scorer_impls_.push_back(std::make_unique<CachedScorer>(*score_log_, id, cfg_.mode, inner));
    scorers_[id] = scorer_impls_.back().get();
  }
  return scorers_;
}

std::vector<std::string> Pipeline::dataset_names(const std::optional<std::string>& only) const {
  if (only) return {cfg_.dataset(*only).name};
  std::vector<std::string> out;
  for (const auto& d : cfg_.datasets) out.push_back(d.name);
  return out;
}

PreparedDataset Pipeline::prepare(const DatasetConfig& d) const {
  PreparedDataset p;
  p.config = &d;
  const fs::path path = cfg_.resolve(d.path);
  p.sha256 = sha256_hex(read_file(path));
  auto records = load_dataset(path);
  std::vector<RawRecord> reference;
  CleaningPolicy policy;
  policy.min_human_turns = d.min_human_turns;
  policy.max_words_per_turn = d.max_words_per_turn;
  policy.record_cap = d.record_cap;
  policy.dataset_tag = d.name;
  if (d.reference) {
    reference = load_dataset(cfg_.resolve(*d.reference));
    policy.reference = &reference;
  }
  p.cleaned = amulet::clean(records, policy);
  return p;
}

void Pipeline::write_manifest() const {
  json templates = json::array();
  for (const auto* t : TemplateRegistry::builtin().all()) {
    templates.push_back({{"kind", to_string(t->kind)},
                         {"dialect", to_string(t->dialect)},
                         {"version", t->version},
                         {"sha256", t->hash}});
  }
  json datasets = json::object();
  for (const auto& d : cfg_.datasets) {
    json entry{{"path", d.path.string()}};
    const fs::path path = cfg_.resolve(d.path);
    entry["sha256"] = fs::exists(path) ? json(sha256_hex(read_file(path))) : json();
    if (d.reference) {
      const fs::path ref = cfg_.resolve(*d.reference);
      entry["reference"] = d.reference->string();
      entry["reference_sha256"] = fs::exists(ref) ? json(sha256_hex(read_file(ref))) : json();
    }
    datasets[d.name] = entry;
  }
  json m{{"config", cfg_.raw},
         {"mode", to_string(cfg_.mode)},
         {"templates", templates},
         {"datasets", datasets},
         {"transcripts", cfg_.transcripts.string()},
         {"scores", cfg_.scores.string()}};
  write_file(out("manifest.json"), m.dump(2) + "\n");
}

std::vector<CleaningReport> Pipeline::clean(const std::optional<std::string>& dataset) {
  std::vector<CleaningReport> reports;
  for (const auto& name : dataset_names(dataset)) {
    PreparedDataset p = prepare(cfg_.dataset(name));
    write_dataset(out("datasets") / (safe_name(name) + ".jsonl"), p.cleaned.survivor_records);
    std::string csv = csv_row({"reason", "count"});
    json rows = json::object();
    for (const auto& [k, v] : p.cleaned.report.rows()) {
      csv += csv_row({k, std::to_string(v)});
      rows[k] = v;
    }
    write_file(out("cleaning") / (safe_name(name) + ".csv"), csv);
    json summary{{"dataset", name}, {"input_sha256", p.sha256}, {"counts", rows}};
    write_file(out("cleaning") / (safe_name(name) + ".json"), summary.dump(2) + "\n");
    reports.push_back(p.cleaned.report);
  }
  write_manifest();
  return reports;
}

std::vector<MethodResult> Pipeline::judge(const std::string& dataset, PromptKind kind) {
  PreparedDataset p = prepare(cfg_.dataset(dataset));
  const auto& items = p.cleaned.survivors;
  ChatBackend& be = backend();
  const JudgeConfig jc = cfg_.judge();
  std::vector<MethodResult> results(items.size());
  parallel_for(items.size(), cfg_.concurrency, [&](std::size_t i) { results[i] = run_method(kind, items[i], jc, be); });

  std::string lines;
  ParseStats stats;
  std::size_t agreed = 0, ties = 0, failed = 0;
  std::map<std::size_t, std::size_t> attempts;
  for (const auto& r : results) {
    lines += to_json(r).dump() + "\n";
    switch (resolve_stage(r).kind) {
      case StageDecision::Kind::Agreed: ++agreed; break;
      case StageDecision::Kind::TieForward: ++ties; break;
      case StageDecision::Kind::Failed: ++failed; break;
    }
    for (const auto* v : {&r.vote_original, &r.vote_swapped}) {
      if (const auto* vote = std::get_if<Vote>(v)) ++attempts[vote->provenance.attempt];
      else ++attempts[0];
    }
    if (const auto* da = std::get_if<DaAnnotations>(&r.annotations); da && da->original) stats.add(*da->original);
  }
  const fs::path dir = out("methods") / safe_name(dataset);
  write_file(dir / (std::string(to_string(kind)) + ".jsonl"), lines);
  json attempts_json = json::object();
  for (const auto& [k, v] : attempts) attempts_json[k == 0 ? "failed" : std::to_string(k)] = v;
  json summary{{"dataset", dataset},   {"kind", to_string(kind)}, {"instances", results.size()},
               {"agreed", agreed},     {"ties", ties},            {"failed", failed},
               {"attempts_per_vote", attempts_json}};
  if (kind == PromptKind::DA) {
    summary["first_vote_parse"] = {{"turns", stats.turns},
                                   {"pct_valid_dimensions", num(stats.pct_valid_dimensions())},
                                   {"pct_valid_functions", num(stats.pct_valid_functions())},
                                   {"raw_units", stats.raw_units},
                                   {"accepted_units", stats.accepted_units},
                                   {"echo_drift_turns", stats.echo_drift_turns},
                                   {"echo_tolerance", cfg_.echo_tolerance},
                                   {"hallucinated", stats.hallucinated}};
  }
  write_file(dir / (std::string(to_string(kind)) + "_summary.json"), summary.dump(2) + "\n");
  write_manifest();
  return results;
}

std::vector<CascadeRun> Pipeline::jury(const std::optional<std::string>& dataset,
                                       const std::optional<std::string>& cascade) {
  std::vector<const Cascade*> cascades;
  if (cascade) {
    cascades.push_back(&cfg_.cascade(*cascade));
  } else {
    for (const auto& c : cfg_.cascades) cascades.push_back(&c);
  }
  if (cascades.empty()) throw ConfigError({"cascades: no cascades defined"});

  ChatBackend& be = backend();
  auto sc = scorers();
  CascadeOptions opts{cfg_.forward_failures};
  std::vector<CascadeRun> runs;
  for (const auto& name : dataset_names(dataset)) {
    PreparedDataset p = prepare(cfg_.dataset(name));
    const auto& items = p.cleaned.survivors;
    if (items.empty()) throw std::runtime_error("dataset '" + name + "' has no instances after cleaning");
    BackendExecutor exec(be, cfg_.judge(), sc);
    std::vector<std::vector<CascadeResult>> results(items.size());
    parallel_for(items.size(), cfg_.concurrency, [&](std::size_t i) {
      for (const auto* c : cascades) results[i].push_back(run_cascade(*c, items[i], exec, opts));
    });

    for (std::size_t ci = 0; ci < cascades.size(); ++ci) {
      CascadeRun run{name, cascades[ci]->name, {}, {}};
      std::string lines;
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& r = results[i][ci];
        Outcome o = outcome_of(r, items[i].chosen);
        run.outcomes.push_back(o);
        json rec = to_json(r, *cascades[ci]);
        rec["instance_id"] = items[i].id;
        rec["dataset"] = name;
        rec["chosen"] = to_string(items[i].chosen);
        rec["outcome"] = to_string(o.kind);
        lines += rec.dump() + "\n";
      }
      run.accounting = account(run.outcomes);
      write_file(out("outcomes") / safe_name(name) / (safe_name(run.cascade) + ".jsonl"), lines);
      write_file(out("jury") / safe_name(name) / (safe_name(run.cascade) + ".json"),
                 accounting_json(name, run.cascade, run.accounting).dump(2) + "\n");
      runs.push_back(std::move(run));
    }
  }

  std::string csv = csv_row({"dataset", "cascade", "n", "accuracy", "win", "tie", "loss"});
  for (const auto& dir : sorted_entries(out("jury"))) {
    for (const auto& file : sorted_entries(dir)) {
      if (file.extension() != ".json") continue;
      json a = json::parse(read_file(file));
      csv += csv_row({a["dataset"], a["cascade"], std::to_string(a["n"].get<std::size_t>()), a["accuracy"],
                      a["win_pct"], a["tie_pct"], a["loss_pct"]});
    }
  }
  write_file(out("accuracy.csv"), csv);
  write_manifest();
  return runs;
}

AnalysisReport Pipeline::analyze(const std::string& dataset) {
  PreparedDataset p = prepare(cfg_.dataset(dataset));
  const auto& items = p.cleaned.survivors;
  ChatBackend& be = backend();
  const JudgeConfig jc = cfg_.judge();
  std::vector<MethodResult> da(items.size()), mx(items.size());
  parallel_for(items.size(), cfg_.concurrency, [&](std::size_t i) {
    da[i] = run_method(PromptKind::DA, items[i], jc, be);
    mx[i] = run_method(PromptKind::Maxim, items[i], jc, be);
  });

  std::vector<AnnotatedInstance> annotated;
  ParseStats stats;
  std::size_t valid_da = 0, valid_maxim = 0, valid_both = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    AnnotatedInstance a = annotate(items[i], &da[i], &mx[i]);
    const auto& dann = std::get<DaAnnotations>(da[i].annotations);
    if (dann.original) stats.add(*dann.original);
    valid_da += a.has_da() ? 1 : 0;
    valid_maxim += a.maxim ? 1 : 0;
    valid_both += a.has_da() && a.maxim ? 1 : 0;
    annotated.push_back(std::move(a));
  }
  AnalysisReport report = amulet::analyze(annotated);

  const fs::path dir = out("analysis") / safe_name(dataset);
  std::string freq = csv_row({"role", "type", "name", "count"});
  for (const auto& [role, f] : report.frequency) {
    for (const auto& [k, v] : f.dimensions) freq += csv_row({std::string(to_string(role)), "dimension", k, std::to_string(v)});
    for (const auto& [k, v] : f.functions) freq += csv_row({std::string(to_string(role)), "function", k, std::to_string(v)});
  }
  write_file(dir / "da_frequency.csv", freq);

  std::string cdf = csv_row({"x", "conversations"});
  for (const auto& [x, n] : report.cdf) cdf += csv_row({std::to_string(x), std::to_string(n)});
  write_file(dir / "da_count_cdf.csv", cdf);

  std::string shift = csv_row({"level", "role", "granularity", "num", "den", "rate"});
  for (const auto& [k, r] : report.turn_shift) {
    shift += csv_row({"turn", std::string(to_string(k.first)), std::string(to_string(k.second)), std::to_string(r.num),
                      std::to_string(r.den), num(r.value())});
  }
  for (const auto& [k, r] : report.conv_shift) {
    shift += csv_row({"conversation", std::string(to_string(k.first)), std::string(to_string(k.second)),
                      std::to_string(r.num), std::to_string(r.den), num(r.value())});
  }
  if (report.conditional) {
    const auto& c = *report.conditional;
    shift += csv_row({"conditional_assistant", "assistant", "full", std::to_string(c.ratio.num),
                      std::to_string(c.ratio.den), num(c.ratio.value())});
  }
  write_file(dir / "shift_rates.csv", shift);

  std::string pref = csv_row({"granularity", "num", "den", "rate"});
  for (const auto& [g, r] : report.preference_diff) {
    pref += csv_row({std::string(to_string(g)), std::to_string(r.num), std::to_string(r.den), num(r.value())});
  }
  write_file(dir / "preference_da_diff.csv", pref);

  std::string cross = csv_row({"balance", "same_da", "different_da"});
  for (auto b : {MaximBalance::ChosenMore, MaximBalance::RejectedMore, MaximBalance::Equal}) {
    cross += csv_row({std::string(to_string(b)), num(report.cross.proportion(b, false)),
                      num(report.cross.proportion(b, true))});
  }
  write_file(dir / "maxim_cross_table.csv", cross);

  std::string imp = csv_row({"maxim", "chosen", "rejected", "both", "neither"});
  for (MaximId m : all_maxims()) {
    imp += csv_row({std::string(name(m)), num(report.importance.proportion(m, 0)),
                    num(report.importance.proportion(m, 1)), num(report.importance.proportion(m, 2)),
                    num(report.importance.proportion(m, 3))});
  }
  write_file(dir / "maxim_importance.csv", imp);

  json summary = to_json(report);
  summary["dataset"] = dataset;
  summary["validity"] = {{"instances", items.size()},
                         {"first_vote_valid_da", valid_da},
                         {"first_vote_valid_maxim", valid_maxim},
                         {"first_vote_valid_both", valid_both},
                         {"excluded_da", items.size() - valid_da},
                         {"excluded_maxim", items.size() - valid_maxim},
                         {"pct_valid_dimensions", num(stats.pct_valid_dimensions())},
                         {"pct_valid_functions", num(stats.pct_valid_functions())},
                         {"echo_drift_turns", stats.echo_drift_turns},
                         {"echo_tolerance", cfg_.echo_tolerance},
                         {"hallucinated", stats.hallucinated}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_manifest();
  return report;
}

void Pipeline::report() {
  json summary = json::object();
  std::ostringstream md;
  md << "# Run report\n\n";
  md << "Mode: " << to_string(cfg_.mode) << ". Judge model: " << cfg_.model << ".\n\n";

  json cleaning = json::object();
  std::vector<json> cleaning_rows;
  for (const auto& file : sorted_entries(out("cleaning"))) {
    if (file.extension() != ".json") continue;
    json c = json::parse(read_file(file));
    cleaning[c["dataset"].get<std::string>()] = c["counts"];
    cleaning_rows.push_back(c);
  }
  summary["cleaning"] = cleaning;
  if (!cleaning_rows.empty()) {
    md << "## Cleaning\n\n| Dataset | Input | Rejected | Survivors |\n|---|---:|---:|---:|\n";
    for (const auto& c : cleaning_rows) {
      std::size_t input = c["counts"]["input"], survivors = c["counts"]["survivors"];
      md << "| " << c["dataset"].get<std::string>() << " | " << input << " | " << input - survivors << " | "
         << survivors << " |\n";
    }
    md << "\n";
  }

  json accuracy = json::array();
  for (const auto& dir : sorted_entries(out("jury"))) {
    for (const auto& file : sorted_entries(dir)) {
      if (file.extension() == ".json") accuracy.push_back(json::parse(read_file(file)));
    }
  }
  summary["accuracy"] = accuracy;
  if (!accuracy.empty()) {
    md << "## Accuracy\n\n| Dataset | Cascade | N | Accuracy | Win | Tie | Loss |\n|---|---|---:|---:|---:|---:|---:|\n";
    for (const auto& a : accuracy) {
      md << "| " << a["dataset"].get<std::string>() << " | " << a["cascade"].get<std::string>() << " | "
         << a["n"].get<std::size_t>() << " | " << a["accuracy"].get<std::string>() << " | "
         << a["win_pct"].get<std::string>() << " | " << a["tie_pct"].get<std::string>() << " | "
         << a["loss_pct"].get<std::string>() << " |\n";
    }
    md << "\n";
  }

  json analysis = json::object();
  for (const auto& dir : sorted_entries(out("analysis"))) {
    const fs::path file = dir / "summary.json";
    if (!fs::exists(file)) continue;
    json a = json::parse(read_file(file));
    const std::string ds = a["dataset"];
    analysis[ds] = a;
    md << "## Analysis: " << ds << "\n\n";
    md << "Instances with first-vote DA: " << a["instances_with_da"].get<std::size_t>()
       << "; with maxim sheet: " << a["instances_with_maxim"].get<std::size_t>() << ".\n\n";
    if (!a["maxim_gap"].is_null()) md << "Maxim gap: " << text::fixed(a["maxim_gap"].get<double>(), 2) << "\n\n";
    md << "| Level | Shift | Rate |\n|---|---|---:|\n";
    for (const char* level : {"turn_shift", "conv_shift"}) {
      for (const auto& [k, v] : a[level].items()) {
        md << "| " << (std::string(level) == "turn_shift" ? "turn" : "conversation") << " | " << k << " | "
           << text::fixed(v["value"].get<double>(), 3) << " |\n";
      }
    }
    if (!a["conditional_assistant_shift"].is_null()) {
      md << "| turn | assistant_conditional | "
         << text::fixed(a["conditional_assistant_shift"]["value"].get<double>(), 3) << " |\n";
    }
    md << "\n";
  }
  summary["analysis"] = analysis;

  write_file(out("report.md"), md.str());
  write_file(out("summary.json"), summary.dump(2) + "\n");
  write_manifest();
}

}  // namespace amulet
