#include "amulet/jury.hpp"

#include <stdexcept>

namespace amulet {

using nlohmann::json;

namespace {

struct ParsedVote {
  std::string answer;
  std::optional<DaJudgment> da;
  std::optional<MaximJudgment> maxim;
  std::optional<std::string> explanation;
};

ParsedVote parse_for(PromptKind kind, const std::string& text, const RenderedPrompt& prompt, const JudgeConfig& cfg) {
  ParsedVote v;
  switch (kind) {
    case PromptKind::DA:
      v.da = parse_da(text, prompt.manifest, prompt.dialect, cfg.parse_options);
      v.answer = v.da->answer;
      break;
    case PromptKind::Maxim:
      v.maxim = parse_maxim(text);
      v.answer = v.maxim->answer;
      break;
    case PromptKind::IO:
    case PromptKind::WExpl: {
      auto a = parse_answer(text, kind);
      v.answer = a.answer;
      v.explanation = a.explanation;
      break;
    }
  }
  return v;
}

json da_json(const DaJudgment& j) {
  json turns = json::array();
  for (const auto& t : j.turns) {
    json acts = json::array();
    for (const auto& a : t.acts) acts.push_back({std::string(name(a.dimension)), std::string(name(a.function))});
    turns.push_back({{"acts", acts},
                     {"hallucinated", t.hallucinated},
                     {"dimensions_valid", t.dimensions_valid},
                     {"functions_valid", t.functions_valid},
                     {"echo_distance", t.echo_distance}});
  }
  return {{"turns", turns}, {"answer", j.answer}, {"explanation", j.explanation}};
}

json maxim_json(const MaximJudgment& j) {
  json sheet = json::object();
  for (MaximId m : all_maxims()) sheet[std::string(name(m))] = std::string(to_string(j.sheet.verdict(m)));
  return {{"sheet", sheet}, {"answer", j.answer}, {"explanation", j.explanation}};
}

json vote_json(const VoteResult& v) {
  if (const auto* vote = std::get_if<Vote>(&v)) {
    return {{"choice", to_string(vote->choice)}, {"attempts", vote->provenance.attempt},
            {"key", vote->provenance.to_json()}};
  }
  const auto& f = std::get<InstanceFailure>(v);
  return {{"failure", true}, {"attempts", f.raw_texts.size()}, {"errors", f.errors}};
}

}  // namespace

MethodResult run_method(PromptKind kind, const PreferenceInstance& e, const JudgeConfig& cfg, ChatBackend& backend) {
  const TemplateRegistry& registry = cfg.registry ? *cfg.registry : TemplateRegistry::builtin();
  const PromptDialect dialect = kind == PromptKind::DA ? cfg.dialect : PromptDialect::Default;

  MethodResult result;
  result.kind = kind;
  result.instance_id = e.id;
  if (kind == PromptKind::DA) result.annotations = DaAnnotations{};
  if (kind == PromptKind::Maxim) result.annotations = MaximAnnotations{};

  for (ResponseOrder order : {ResponseOrder::Original, ResponseOrder::Swapped}) {
    RenderedPrompt prompt = render(kind, e, order, dialect, registry, cfg.template_version);
    ChatRequest req;
    req.prompt = prompt.text;
    req.model = cfg.model;
    req.temperature = 0.0;
    req.key = TranscriptKey{e.id, kind, order, cfg.model, prompt.template_hash, 1};

    Validator validator = [&](const std::string& text) -> std::optional<std::string> {
      try {
        parse_for(kind, text, prompt, cfg);
        return std::nullopt;
      } catch (const FormatError& err) {
        return std::string(err.what());
      }
    };

    auto outcome = complete_with_format_retries(backend, req, validator, cfg.max_attempts);
    VoteResult vote_result;
    if (auto* acc = std::get_if<Accepted>(&outcome)) {
      ParsedVote parsed = parse_for(kind, acc->response.text, prompt, cfg);
      TranscriptKey provenance = req.key;
      provenance.attempt = acc->attempts;
      vote_result = Vote{map_answer(order, parsed.answer), order, kind, provenance};
      const bool orig = order == ResponseOrder::Original;
      if (auto* da = std::get_if<DaAnnotations>(&result.annotations)) {
        (orig ? da->original : da->swapped) = std::move(parsed.da);
      } else if (auto* mx = std::get_if<MaximAnnotations>(&result.annotations)) {
        (orig ? mx->original : mx->swapped) = std::move(parsed.maxim);
      }
      if (kind == PromptKind::WExpl) (orig ? result.explanation_original : result.explanation_swapped) = parsed.explanation;
    } else {
      vote_result = std::get<InstanceFailure>(std::move(outcome));
    }
    (order == ResponseOrder::Original ? result.vote_original : result.vote_swapped) = std::move(vote_result);
  }
  return result;
}

std::string_view to_string(StageDecision::Kind k) {
  switch (k) {
    case StageDecision::Kind::Agreed: return "agreed";
    case StageDecision::Kind::TieForward: return "tie";
    case StageDecision::Kind::Failed: return "failed";
  }
  return "?";
}

StageDecision resolve_stage(const MethodResult& r) {
  const auto* a = std::get_if<Vote>(&r.vote_original);
  const auto* b = std::get_if<Vote>(&r.vote_swapped);
  if (!a || !b) return StageDecision::failed();
  if (a->choice == b->choice) return StageDecision::agreed(a->choice);
  return StageDecision::tie_forward();
}

RmResult score_with_rm(Scorer& scorer, const PreferenceInstance& e) {
  RmResult r;
  try {
    r.score_a = scorer.score(ScoreRequest::from(e, Choice::A));
    r.score_b = scorer.score(ScoreRequest::from(e, Choice::B));
  } catch (const ScorerFailed& err) {
    r.error = err.what();
    return r;
  }
  if (*r.score_a == *r.score_b) {
    r.error = "equal scores";
  } else {
    r.decision = *r.score_a > *r.score_b ? Choice::A : Choice::B;
  }
  return r;
}

std::string Stage::label() const {
  if (type == Type::RM) return "RM:" + scorer_id;
  return std::string(to_string(kind));
}

void validate_cascade(const Cascade& c) {
  if (c.stages.empty()) throw std::invalid_argument("cascade '" + c.name + "' has no stages");
  for (std::size_t i = 0; i + 1 < c.stages.size(); ++i) {
    if (c.stages[i].type == Stage::Type::RM) {
      throw std::invalid_argument("cascade '" + c.name + "': RM stage must be last");
    }
  }
}

Cascade make_cascade(std::string name, const std::vector<std::string>& labels) {
  Cascade c{std::move(name), {}};
  for (const auto& label : labels) {
    if (label.rfind("RM:", 0) == 0 && label.size() > 3) {
      c.stages.push_back(Stage::rm(label.substr(3)));
      continue;
    }
    try {
      c.stages.push_back(Stage::method(parse_prompt_kind(label)));
    } catch (const std::exception&) {
      throw std::invalid_argument("cascade '" + c.name + "': unknown stage '" + label + "'");
    }
  }
  validate_cascade(c);
  return c;
}

CascadeResult run_cascade(const Cascade& c, const PreferenceInstance& e, StageExecutor& exec,
                          const CascadeOptions& options) {
  validate_cascade(c);
  CascadeResult out;
  bool saw_failure = false;
  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    const Stage& stage = c.stages[i];
    StageTrace trace{stage, StageDecision::failed(), std::nullopt, std::nullopt};
    if (stage.type == Stage::Type::RM) {
      trace.rm = exec.rm(stage.scorer_id, e);
      trace.decision = trace.rm->decision ? StageDecision::agreed(*trace.rm->decision) : StageDecision::failed();
    } else {
      trace.method = exec.method(stage.kind, e);
      trace.decision = resolve_stage(*trace.method);
    }
    const StageDecision d = trace.decision;
    out.trace.push_back(std::move(trace));

    if (d.kind == StageDecision::Kind::Agreed) {
      out.final = CascadeResult::Final::Decided;
      out.decision = d.choice;
      out.deciding_stage = i;
      return out;
    }
    if (d.kind == StageDecision::Kind::Failed) {
      if (!options.forward_failures || stage.type == Stage::Type::RM) {
        out.final = CascadeResult::Final::Failed;
        out.deciding_stage = i;
        return out;
      }
      saw_failure = true;
    }
  }
  out.final = saw_failure ? CascadeResult::Final::Failed : CascadeResult::Final::Tie;
  return out;
}

std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Win: return "win";
    case OutcomeKind::Tie: return "tie";
    case OutcomeKind::Loss: return "loss";
  }
  return "?";
}

Outcome outcome_of(const CascadeResult& r, Choice chosen) {
  switch (r.final) {
    case CascadeResult::Final::Decided:
      return {*r.decision == chosen ? OutcomeKind::Win : OutcomeKind::Loss, r.deciding_stage};
    case CascadeResult::Final::Tie:
      return {OutcomeKind::Tie, std::nullopt};
    case CascadeResult::Final::Failed:
      return {OutcomeKind::Loss, r.deciding_stage};
  }
  return {OutcomeKind::Loss, std::nullopt};
}

std::string percent_tenths(std::size_t count, std::size_t total) {
  if (total == 0) throw std::invalid_argument("percent_tenths: total is zero");
  const unsigned long long tenths = (2ULL * 1000ULL * count + total) / (2ULL * total);
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

std::string Accounting::win_pct() const { return percent_tenths(wins, total); }
std::string Accounting::tie_pct() const { return percent_tenths(ties, total); }
std::string Accounting::loss_pct() const { return percent_tenths(losses, total); }

Accounting account(const std::vector<Outcome>& outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("account: no outcomes");
  Accounting a;
  a.total = outcomes.size();
  for (const auto& o : outcomes) {
    switch (o.kind) {
      case OutcomeKind::Win: ++a.wins; break;
      case OutcomeKind::Tie: ++a.ties; break;
      case OutcomeKind::Loss: ++a.losses; break;
    }
  }
  return a;
}

BackendExecutor::BackendExecutor(ChatBackend& backend, JudgeConfig cfg, std::map<std::string, Scorer*> scorers)
    : backend_(backend), cfg_(std::move(cfg)), scorers_(std::move(scorers)) {}

MethodResult BackendExecutor::method(PromptKind kind, const PreferenceInstance& e) {
  auto key = std::make_pair(kind, e.id);
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  MethodResult r = run_method(kind, e, cfg_, backend_);
  std::lock_guard lock(mu_);
  return memo_.emplace(key, std::move(r)).first->second;
}

RmResult BackendExecutor::rm(const std::string& scorer_id, const PreferenceInstance& e) {
  auto it = scorers_.find(scorer_id);
  if (it == scorers_.end()) throw std::invalid_argument("unknown scorer '" + scorer_id + "'");
  return score_with_rm(*it->second, e);
}

json to_json(const MethodResult& r) {
  json j{{"instance_id", r.instance_id},
         {"kind", to_string(r.kind)},
         {"vote_original", vote_json(r.vote_original)},
         {"vote_swapped", vote_json(r.vote_swapped)},
         {"decision", to_string(resolve_stage(r).kind)}};
  if (auto d = resolve_stage(r); d.choice) j["choice"] = to_string(*d.choice);
  if (const auto* da = std::get_if<DaAnnotations>(&r.annotations)) {
    j["da_original"] = da->original ? da_json(*da->original) : json();
    j["da_swapped"] = da->swapped ? da_json(*da->swapped) : json();
  } else if (const auto* mx = std::get_if<MaximAnnotations>(&r.annotations)) {
    j["maxim_original"] = mx->original ? maxim_json(*mx->original) : json();
    j["maxim_swapped"] = mx->swapped ? maxim_json(*mx->swapped) : json();
  }
  if (r.explanation_original) j["explanation_original"] = *r.explanation_original;
  if (r.explanation_swapped) j["explanation_swapped"] = *r.explanation_swapped;
  return j;
}

json to_json(const RmResult& r) {
  json j{{"score_a", r.score_a ? json(*r.score_a) : json()}, {"score_b", r.score_b ? json(*r.score_b) : json()}};
  if (r.decision) j["choice"] = to_string(*r.decision);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

json to_json(const CascadeResult& r, const Cascade& c) {
  json stages = json::array();
  for (const auto& t : r.trace) {
    json s{{"stage", t.stage.label()}, {"decision", to_string(t.decision.kind)}};
    if (t.decision.choice) s["choice"] = to_string(*t.decision.choice);
    if (t.method) {
      s["vote_original"] = vote_json(t.method->vote_original);
      s["vote_swapped"] = vote_json(t.method->vote_swapped);
    }
    if (t.rm) s["rm"] = to_json(*t.rm);
    stages.push_back(std::move(s));
  }
  const char* final = r.final == CascadeResult::Final::Decided ? "decided"
                      : r.final == CascadeResult::Final::Tie   ? "tie"
                                                               : "failed";
  json j{{"cascade", c.name}, {"stages", stages}, {"final", final}};
  j["decision"] = r.decision ? json(to_string(*r.decision)) : json();
  j["deciding_stage"] = r.deciding_stage ? json(*r.deciding_stage) : json();
  return j;
}

}  // namespace amulet
