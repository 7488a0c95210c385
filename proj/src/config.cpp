#include "amulet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace amulet {

using nlohmann::json;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid config:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

// Typed field access that records problems instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  void unknown_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [k, _] : obj.items()) {
      if (!allowed.count(k)) problems_.push_back(where + k + ": unknown field");
    }
  }

  template <typename T>
  std::optional<T> get(const json& obj, const std::string& key, const std::string& field) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw std::runtime_error("expected a string");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::runtime_error("expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
          throw std::runtime_error("expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::runtime_error("expected a number");
      }
      return it->get<T>();
    } catch (const std::exception& e) {
      problems_.push_back(field + ": " + e.what());
      return std::nullopt;
    }
  }

  void problem(std::string p) { problems_.push_back(std::move(p)); }

 private:
  std::vector<std::string>& problems_;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  std::vector<std::string> problems;
  Reader rd(problems);
  RunConfig c;
  c.base_dir = base_dir;
  c.raw = j;
  if (!j.is_object()) throw ConfigError({"config: expected an object"});

  rd.unknown_keys(j, "", {"datasets", "judge", "backend", "scorers", "cascades", "mode", "out", "transcripts",
                          "scores", "concurrency", "seed", "forward_failures"});

  if (auto ds = j.find("datasets"); ds == j.end() || !ds->is_object() || ds->empty()) {
    rd.problem("datasets: expected a non-empty object of named datasets");
  } else {
    for (const auto& [name, d] : ds->items()) {
      const std::string f = "datasets." + name;
      if (!d.is_object()) {
        rd.problem(f + ": expected an object");
        continue;
      }
      rd.unknown_keys(d, f + ".", {"path", "reference", "min_human_turns", "max_words_per_turn", "record_cap"});
      DatasetConfig dc;
      dc.name = name;
      if (auto p = rd.get<std::string>(d, "path", f + ".path")) {
        dc.path = *p;
      } else {
        rd.problem(f + ".path: required");
      }
      if (auto p = rd.get<std::string>(d, "reference", f + ".reference")) dc.reference = *p;
      if (auto v = rd.get<std::size_t>(d, "min_human_turns", f + ".min_human_turns")) dc.min_human_turns = *v;
      dc.max_words_per_turn = rd.get<std::size_t>(d, "max_words_per_turn", f + ".max_words_per_turn");
      dc.record_cap = rd.get<std::size_t>(d, "record_cap", f + ".record_cap");
      c.datasets.push_back(std::move(dc));
    }
  }

  const json judge = j.value("judge", json::object());
  if (!judge.is_object()) {
    rd.problem("judge: expected an object");
  } else {
    rd.unknown_keys(judge, "judge.", {"model", "dialect", "template_version", "max_attempts", "echo_tolerance"});
    if (auto v = rd.get<std::string>(judge, "model", "judge.model")) c.model = *v;
    if (c.model.empty()) rd.problem("judge.model: required");
    if (auto v = rd.get<std::string>(judge, "dialect", "judge.dialect")) {
      try {
        c.dialect = parse_prompt_dialect(*v);
      } catch (const std::exception&) {
        rd.problem("judge.dialect: expected \"default\" or \"claude-da\"");
      }
    }
    if (auto v = rd.get<std::string>(judge, "template_version", "judge.template_version")) c.template_version = *v;
    if (auto v = rd.get<std::size_t>(judge, "max_attempts", "judge.max_attempts")) {
      if (*v < 1 || *v > kMaxAttempts) {
        rd.problem("judge.max_attempts: must be between 1 and " + std::to_string(kMaxAttempts));
      } else {
        c.max_attempts = *v;
      }
    }
    if (auto v = rd.get<double>(judge, "echo_tolerance", "judge.echo_tolerance")) {
      if (*v < 0.0 || *v >= 1.0) {
        rd.problem("judge.echo_tolerance: must be in [0, 1)");
      } else {
        c.echo_tolerance = *v;
      }
    }
  }

  const json backend = j.value("backend", json::object());
  if (!backend.is_object()) {
    rd.problem("backend: expected an object");
  } else {
    rd.unknown_keys(backend, "backend.", {"base_url", "auth_env", "timeout_ms", "transport_retries", "backoff_ms"});
    if (auto v = rd.get<std::string>(backend, "base_url", "backend.base_url")) c.backend.base_url = *v;
    if (auto v = rd.get<std::string>(backend, "auth_env", "backend.auth_env")) c.backend.auth_env = *v;
    if (auto v = rd.get<std::size_t>(backend, "timeout_ms", "backend.timeout_ms")) c.backend.timeout_ms = *v;
    if (auto v = rd.get<std::size_t>(backend, "transport_retries", "backend.transport_retries")) {
      c.backend.transport_retries = *v;
    }
    if (auto v = rd.get<std::size_t>(backend, "backoff_ms", "backend.backoff_ms")) c.backend.backoff_ms = *v;
  }

  const json scorers = j.value("scorers", json::object());
  if (!scorers.is_object()) {
    rd.problem("scorers: expected an object");
  } else {
    for (const auto& [id, s] : scorers.items()) {
      const std::string f = "scorers." + id;
      if (!s.is_object()) {
        rd.problem(f + ": expected an object");
        continue;
      }
      rd.unknown_keys(s, f + ".", {"type", "base_url", "timeout_ms"});
      ScorerConfig sc;
      sc.id = id;
      auto type = rd.get<std::string>(s, "type", f + ".type").value_or("");
      if (type == "mock") {
        sc.type = ScorerConfig::Type::Mock;
      } else if (type == "http") {
        sc.type = ScorerConfig::Type::Http;
        sc.base_url = rd.get<std::string>(s, "base_url", f + ".base_url").value_or("");
        if (sc.base_url.empty()) rd.problem(f + ".base_url: required for http scorers");
      } else {
        rd.problem(f + ".type: expected \"mock\" or \"http\"");
      }
      if (auto v = rd.get<std::size_t>(s, "timeout_ms", f + ".timeout_ms")) sc.timeout_ms = *v;
      c.scorers.emplace(id, std::move(sc));
    }
  }

  const json cascades = j.value("cascades", json::object());
  if (!cascades.is_object()) {
    rd.problem("cascades: expected an object of named stage lists");
  } else {
    for (const auto& [name, stages] : cascades.items()) {
      const std::string f = "cascades." + name;
      if (!stages.is_array() || !std::all_of(stages.begin(), stages.end(), [](const json& s) { return s.is_string(); })) {
        rd.problem(f + ": expected a list of stage names");
        continue;
      }
      try {
        Cascade cas = make_cascade(name, stages.get<std::vector<std::string>>());
        for (const auto& st : cas.stages) {
          if (st.type == Stage::Type::RM && !c.scorers.count(st.scorer_id)) {
            rd.problem(f + ": stage " + st.label() + " references an undefined scorer");
          }
        }
        c.cascades.push_back(std::move(cas));
      } catch (const std::invalid_argument& e) {
        rd.problem(f + ": " + e.what());
      }
    }
  }

  if (auto v = rd.get<std::string>(j, "mode", "mode")) {
    if (*v == "live") {
      c.mode = BackendMode::Live;
    } else if (*v == "replay") {
      c.mode = BackendMode::Replay;
    } else {
      rd.problem("mode: expected \"live\" or \"replay\"");
    }
  }
  if (auto v = rd.get<std::string>(j, "out", "out")) c.out = *v;
  if (auto v = rd.get<std::string>(j, "transcripts", "transcripts")) c.transcripts = *v;
  if (auto v = rd.get<std::string>(j, "scores", "scores")) c.scores = *v;
  if (auto v = rd.get<std::size_t>(j, "concurrency", "concurrency")) {
    if (*v == 0) {
      rd.problem("concurrency: must be at least 1");
    } else {
      c.concurrency = *v;
    }
  }
  if (auto v = rd.get<std::uint64_t>(j, "seed", "seed")) c.seed = *v;
  if (auto v = rd.get<bool>(j, "forward_failures", "forward_failures")) c.forward_failures = *v;

  if (c.mode == BackendMode::Live && c.backend.base_url.empty()) {
    rd.problem("backend.base_url: required in live mode");
  }

  if (!problems.empty()) throw ConfigError(std::move(problems));
  if (c.transcripts.empty()) c.transcripts = c.out / "transcripts.jsonl";
  if (c.scores.empty()) c.scores = c.out / "scores.jsonl";
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::ostringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return from_json(j, base);
}

const DatasetConfig& RunConfig::dataset(const std::string& name) const {
  for (const auto& d : datasets) {
    if (d.name == name) return d;
  }
  throw ConfigError({"--dataset: no dataset named '" + name + "'"});
}

const Cascade& RunConfig::cascade(const std::string& name) const {
  for (const auto& c : cascades) {
    if (c.name == name) return c;
  }
  throw ConfigError({"--cascade: no cascade named '" + name + "'"});
}

JudgeConfig RunConfig::judge() const {
  JudgeConfig j;
  j.model = model;
  j.dialect = dialect;
  j.template_version = template_version;
  j.max_attempts = max_attempts;
  j.parse_options.echo_tolerance = echo_tolerance;
  return j;
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

}  // namespace amulet
