#include "amulet/analysis.hpp"

#include <algorithm>
#include <set>

namespace amulet {

using nlohmann::json;

AnnotatedInstance annotate(const PreferenceInstance& e, const DaJudgment* da, const MaximJudgment* maxim) {
  AnnotatedInstance item;
  item.id = e.id;
  for (const auto& t : e.context.turns()) item.context_roles.push_back(t.role);
  const bool chosen_first = e.chosen == Choice::A;
  if (da) {
    const std::size_t n = e.context.size();
    if (da->turns.size() != n + 2) throw std::invalid_argument("annotate: DA judgment does not match instance " + e.id);
    std::vector<DialogActSet> ctx;
    ctx.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ctx.push_back(da->turns[i].acts);
    item.context_acts = std::move(ctx);
    item.chosen_acts = da->turns[chosen_first ? n : n + 1].acts;
    item.rejected_acts = da->turns[chosen_first ? n + 1 : n].acts;
  }
  if (maxim) item.maxim = chosen_first ? maxim->sheet : maxim->sheet.swapped();
  return item;
}

AnnotatedInstance annotate(const PreferenceInstance& e, const MethodResult* da, const MethodResult* maxim) {
  const DaJudgment* dj = nullptr;
  const MaximJudgment* mj = nullptr;
  if (da) {
    if (const auto* a = std::get_if<DaAnnotations>(&da->annotations); a && a->original) dj = &*a->original;
  }
  if (maxim) {
    if (const auto* a = std::get_if<MaximAnnotations>(&maxim->annotations); a && a->original) mj = &*a->original;
  }
  return annotate(e, dj, mj);
}

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::Full: return "full";
    case Granularity::Function: return "function";
    case Granularity::Dimension: return "dimension";
  }
  return "?";
}

bool differs(const DialogActSet& x, const DialogActSet& y, Granularity g) {
  switch (g) {
    case Granularity::Full: return !da_set_equal(x, y);
    case Granularity::Function: return x.functions() != y.functions();
    case Granularity::Dimension: return x.dimensions() != y.dimensions();
  }
  return false;
}

namespace {

constexpr Granularity kGranularities[] = {Granularity::Full, Granularity::Function, Granularity::Dimension};
constexpr Role kRoles[] = {Role::Human, Role::Assistant};

// Calls f(prev, next, prev_index, next_index) for consecutive context turns of
// one role.
template <typename F>
void for_role_pairs(const AnnotatedInstance& item, Role role, F&& f) {
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < item.context_roles.size(); ++i) {
    if (item.context_roles[i] != role) continue;
    if (prev) f((*item.context_acts)[*prev], (*item.context_acts)[i], *prev, i);
    prev = i;
  }
}

std::vector<std::pair<std::string, std::size_t>> sorted_counts(const std::map<std::string, std::size_t>& m) {
  std::vector<std::pair<std::string, std::size_t>> v(m.begin(), m.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return v;
}

}  // namespace

std::map<Role, RoleFrequency> da_frequency(const std::vector<AnnotatedInstance>& items) {
  std::map<Role, std::map<std::string, std::size_t>> dims, funcs;
  for (const auto& item : items) {
    if (!item.has_da()) continue;
    for (std::size_t i = 0; i < item.context_roles.size(); ++i) {
      const auto& acts = (*item.context_acts)[i];
      for (Dimension d : acts.dimensions()) ++dims[item.context_roles[i]][std::string(name(d))];
      for (CommFunction f : acts.functions()) ++funcs[item.context_roles[i]][std::string(name(f))];
    }
  }
  std::map<Role, RoleFrequency> out;
  for (Role r : kRoles) out[r] = RoleFrequency{sorted_counts(dims[r]), sorted_counts(funcs[r])};
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> da_count_cdf(const std::vector<AnnotatedInstance>& items) {
  std::vector<std::size_t> distinct;
  for (const auto& item : items) {
    if (!item.has_da()) continue;
    std::set<DialogActSet> sets;
    for (std::size_t i = 0; i < item.context_roles.size(); ++i) {
      if (item.context_roles[i] == Role::Human) sets.insert((*item.context_acts)[i]);
    }
    distinct.push_back(sets.size());
  }
  std::size_t max = distinct.empty() ? 0 : *std::max_element(distinct.begin(), distinct.end());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t x = 1; x <= max; ++x) {
    out.emplace_back(x, static_cast<std::size_t>(std::count_if(distinct.begin(), distinct.end(),
                                                               [x](std::size_t d) { return d >= x; })));
  }
  return out;
}

Ratio turn_shift_rate(const std::vector<AnnotatedInstance>& items, Role role, Granularity g) {
  Ratio r;
  for (const auto& item : items) {
    if (!item.has_da()) continue;
    for_role_pairs(item, role, [&](const DialogActSet& a, const DialogActSet& b, std::size_t, std::size_t) {
      ++r.den;
      r.num += differs(a, b, g) ? 1 : 0;
    });
  }
  if (r.den == 0) throw AnalysisError("no consecutive pairs");
  return r;
}

ConditionalShift conditional_assistant_shift(const std::vector<AnnotatedInstance>& items) {
  ConditionalShift out;
  for (const auto& item : items) {
    if (!item.has_da()) continue;
    const auto& acts = *item.context_acts;
    for_role_pairs(item, Role::Human, [&](const DialogActSet& a, const DialogActSet& b, std::size_t i, std::size_t j) {
      if (!differs(a, b, Granularity::Full)) return;
      const std::size_t ai = i + 1, aj = j + 1;
      if (aj >= acts.size()) {
        ++out.excluded;
        return;
      }
      if (item.context_roles[ai] != Role::Assistant || item.context_roles[aj] != Role::Assistant) return;
      ++out.ratio.den;
      out.ratio.num += differs(acts[ai], acts[aj], Granularity::Full) ? 1 : 0;
    });
  }
  if (out.ratio.den == 0) throw AnalysisError("no qualifying human pairs");
  return out;
}

Ratio conv_shift_rate(const std::vector<AnnotatedInstance>& items, Role role, Granularity g) {
  Ratio r;
  for (const auto& item : items) {
    if (!item.has_da()) continue;
    ++r.den;
    bool changed = false;
    for_role_pairs(item, role, [&](const DialogActSet& a, const DialogActSet& b, std::size_t, std::size_t) {
      changed = changed || differs(a, b, g);
    });
    r.num += changed ? 1 : 0;
  }
  return r;
}

Ratio preference_da_diff(const std::vector<AnnotatedInstance>& items, Granularity g) {
  Ratio r;
  for (const auto& item : items) {
    if (!item.chosen_acts || !item.rejected_acts) continue;
    ++r.den;
    r.num += differs(*item.chosen_acts, *item.rejected_acts, g) ? 1 : 0;
  }
  return r;
}

std::string_view to_string(MaximBalance b) {
  switch (b) {
    case MaximBalance::ChosenMore: return "chosen_more";
    case MaximBalance::RejectedMore: return "rejected_more";
    case MaximBalance::Equal: return "equal";
  }
  return "?";
}

double CrossTable::proportion(MaximBalance b, bool different_da) const {
  if (total == 0) return 0.0;
  return static_cast<double>(counts[static_cast<std::size_t>(b)][different_da ? 1 : 0]) / static_cast<double>(total);
}

CrossTable maxim_cross_table(const std::vector<AnnotatedInstance>& items) {
  CrossTable t;
  for (const auto& item : items) {
    if (!item.maxim || !item.chosen_acts || !item.rejected_acts) continue;
    std::size_t c = item.maxim->satisfied_by(ResponseSlot::Resp1).count();
    std::size_t r = item.maxim->satisfied_by(ResponseSlot::Resp2).count();
    MaximBalance b = c > r ? MaximBalance::ChosenMore : c < r ? MaximBalance::RejectedMore : MaximBalance::Equal;
    bool diff = differs(*item.chosen_acts, *item.rejected_acts, Granularity::Full);
    ++t.counts[static_cast<std::size_t>(b)][diff ? 1 : 0];
    ++t.total;
  }
  return t;
}

double MaximImportance::proportion(MaximId m, std::size_t column) const {
  if (total == 0) return 0.0;
  return static_cast<double>(counts[static_cast<std::size_t>(m)][column]) / static_cast<double>(total);
}

MaximImportance maxim_importance(const std::vector<AnnotatedInstance>& items) {
  MaximImportance out;
  for (const auto& item : items) {
    if (!item.maxim) continue;
    ++out.total;
    for (MaximId m : all_maxims()) {
      std::size_t col = 0;
      switch (item.maxim->verdict(m)) {
        case MaximVerdict::Resp1: col = 0; break;
        case MaximVerdict::Resp2: col = 1; break;
        case MaximVerdict::Both: col = 2; break;
        case MaximVerdict::Neither: col = 3; break;
      }
      ++out.counts[static_cast<std::size_t>(m)][col];
    }
  }
  return out;
}

std::size_t maxim_gap_of(const MaximSheet& s) {
  std::size_t n = 0;
  for (MaximId m : all_maxims()) {
    auto v = s.verdict(m);
    n += (v == MaximVerdict::Resp1 || v == MaximVerdict::Resp2) ? 1 : 0;
  }
  return n;
}

double maxim_gap(const std::vector<AnnotatedInstance>& items) {
  std::size_t sum = 0, n = 0;
  for (const auto& item : items) {
    if (!item.maxim) continue;
    sum += maxim_gap_of(*item.maxim);
    ++n;
  }
  if (n == 0) throw AnalysisError("no maxim sheets");
  return static_cast<double>(sum) / static_cast<double>(n);
}

AnalysisReport analyze(const std::vector<AnnotatedInstance>& items) {
  AnalysisReport r;
  r.instances = items.size();
  for (const auto& item : items) {
    r.with_da += item.has_da() ? 1 : 0;
    r.with_maxim += item.maxim ? 1 : 0;
  }
  r.frequency = da_frequency(items);
  r.cdf = da_count_cdf(items);
  for (Role role : kRoles) {
    for (Granularity g : kGranularities) {
      try {
        r.turn_shift[{role, g}] = turn_shift_rate(items, role, g);
      } catch (const AnalysisError&) {
      }
      if (r.with_da > 0) r.conv_shift[{role, g}] = conv_shift_rate(items, role, g);
    }
  }
  try {
    r.conditional = conditional_assistant_shift(items);
  } catch (const AnalysisError&) {
  }
  if (r.with_da > 0) {
    for (Granularity g : kGranularities) r.preference_diff[g] = preference_da_diff(items, g);
  }
  r.cross = maxim_cross_table(items);
  r.importance = maxim_importance(items);
  if (r.with_maxim > 0) r.gap = maxim_gap(items);
  return r;
}

namespace {

json ratio_json(const Ratio& r) { return {{"num", r.num}, {"den", r.den}, {"value", r.value()}}; }

json counts_json(const std::vector<std::pair<std::string, std::size_t>>& v) {
  json a = json::array();
  for (const auto& [k, c] : v) a.push_back({{"name", k}, {"count", c}});
  return a;
}

}  // namespace

json to_json(const AnalysisReport& r) {
  json j;
  j["instances"] = r.instances;
  j["instances_with_da"] = r.with_da;
  j["instances_with_maxim"] = r.with_maxim;
  json freq = json::object();
  for (const auto& [role, f] : r.frequency) {
    freq[std::string(to_string(role))] = {{"dimensions", counts_json(f.dimensions)},
                                          {"functions", counts_json(f.functions)}};
  }
  j["frequency"] = freq;
  json cdf = json::array();
  for (const auto& [x, n] : r.cdf) cdf.push_back({{"x", x}, {"conversations", n}});
  j["da_count_cdf"] = cdf;
  json ts = json::object(), cs = json::object();
  for (const auto& [k, v] : r.turn_shift) ts[std::string(to_string(k.first)) + "_" + std::string(to_string(k.second))] = ratio_json(v);
  for (const auto& [k, v] : r.conv_shift) cs[std::string(to_string(k.first)) + "_" + std::string(to_string(k.second))] = ratio_json(v);
  j["turn_shift"] = ts;
  j["conv_shift"] = cs;
  if (r.conditional) {
    j["conditional_assistant_shift"] = ratio_json(r.conditional->ratio);
    j["conditional_assistant_shift"]["excluded_final_pairs"] = r.conditional->excluded;
  } else {
    j["conditional_assistant_shift"] = nullptr;
  }
  json pd = json::object();
  for (const auto& [g, v] : r.preference_diff) pd[std::string(to_string(g))] = ratio_json(v);
  j["preference_da_diff"] = pd;
  json cross = json::object();
  for (auto b : {MaximBalance::ChosenMore, MaximBalance::RejectedMore, MaximBalance::Equal}) {
    auto bi = static_cast<std::size_t>(b);
    cross[std::string(to_string(b))] = {{"same_da", r.cross.counts[bi][0]}, {"different_da", r.cross.counts[bi][1]}};
  }
  cross["total"] = r.cross.total;
  j["maxim_cross_table"] = cross;
  json imp = json::object();
  for (MaximId m : all_maxims()) {
    const auto& c = r.importance.counts[static_cast<std::size_t>(m)];
    imp[std::string(name(m))] = {{"chosen", c[0]}, {"rejected", c[1]}, {"both", c[2]}, {"neither", c[3]}};
  }
  imp["total"] = r.importance.total;
  j["maxim_importance"] = imp;
  j["maxim_gap"] = r.gap ? json(*r.gap) : json();
  return j;
}

}  // namespace amulet
