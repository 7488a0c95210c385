#include "oracles.hpp"

#include <algorithm>
#include <iterator>
#include <set>

namespace amulet::testing::oracle {

namespace {

using StrSet = std::set<std::string>;

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

StrSet view(const std::string& encoded, Gran g) {
  StrSet out;
  for (const auto& act : split_on(encoded, '+')) {
    const auto colon = act.find(':');
    if (g == Gran::Full) out.insert(act);
    if (g == Gran::Dimension) out.insert(act.substr(0, colon));
    if (g == Gran::Function) out.insert(act.substr(colon + 1));
  }
  return out;
}

bool changed(const std::string& x, const std::string& y, Gran g) { return view(x, g) != view(y, g); }

// Turn indices of one role; turn 0 is human and roles alternate.
std::vector<std::size_t> indices(const FixtureConversation& c, int role) {
  std::vector<std::size_t> out;
  for (std::size_t i = static_cast<std::size_t>(role); i < c.turns.size(); i += 2) out.push_back(i);
  return out;
}

int satisfied_count(const std::string& maxim, char who) {
  int n = 0;
  for (char v : maxim) n += (v == who || v == 'b') ? 1 : 0;
  return n;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> cdf(const std::vector<FixtureConversation>& cs) {
  std::vector<std::size_t> distinct;
  for (const auto& c : cs) {
    std::set<StrSet> seen;
    for (auto i : indices(c, 0)) seen.insert(view(c.turns[i], Gran::Full));
    distinct.push_back(seen.size());
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t x = 1;; ++x) {
    std::size_t n = 0;
    for (auto d : distinct) n += d >= x ? 1 : 0;
    if (n == 0) break;
    out.emplace_back(x, n);
  }
  return out;
}

std::optional<Frac> turn_shift(const std::vector<FixtureConversation>& cs, int role, Gran g) {
  Frac f;
  for (const auto& c : cs) {
    auto idx = indices(c, role);
    for (std::size_t k = 1; k < idx.size(); ++k) {
      ++f.den;
      f.num += changed(c.turns[idx[k - 1]], c.turns[idx[k]], g) ? 1 : 0;
    }
  }
  if (f.den == 0) return std::nullopt;
  return f;
}

std::pair<std::optional<Frac>, std::size_t> conditional_shift(const std::vector<FixtureConversation>& cs) {
  Frac f;
  std::size_t excluded = 0;
  for (const auto& c : cs) {
    auto humans = indices(c, 0);
    for (std::size_t k = 1; k < humans.size(); ++k) {
      const std::size_t hi = humans[k - 1], hj = humans[k];
      if (!changed(c.turns[hi], c.turns[hj], Gran::Full)) continue;
      if (k + 1 == humans.size()) {
        ++excluded;
        continue;
      }
      ++f.den;
      f.num += changed(c.turns[hi + 1], c.turns[hj + 1], Gran::Full) ? 1 : 0;
    }
  }
  if (f.den == 0) return {std::nullopt, excluded};
  return {f, excluded};
}

Frac conv_shift(const std::vector<FixtureConversation>& cs, int role, Gran g) {
  Frac f;
  for (const auto& c : cs) {
    ++f.den;
    auto idx = indices(c, role);
    for (std::size_t k = 1; k < idx.size(); ++k) {
      if (changed(c.turns[idx[k - 1]], c.turns[idx[k]], g)) {
        ++f.num;
        break;
      }
    }
  }
  return f;
}

Frac preference_diff(const std::vector<FixtureConversation>& cs, Gran g) {
  Frac f;
  for (const auto& c : cs) {
    ++f.den;
    f.num += changed(c.chosen, c.rejected, g) ? 1 : 0;
  }
  return f;
}

std::array<std::array<std::size_t, 2>, 3> cross_table(const std::vector<FixtureConversation>& cs) {
  std::array<std::array<std::size_t, 2>, 3> t{};
  for (const auto& c : cs) {
    const int chosen = satisfied_count(c.maxim, 'c');
    const int rejected = satisfied_count(c.maxim, 'r');
    const std::size_t row = chosen > rejected ? 0 : chosen < rejected ? 1 : 2;
    ++t[row][changed(c.chosen, c.rejected, Gran::Full) ? 1 : 0];
  }
  return t;
}

std::array<std::array<std::size_t, 4>, 12> importance(const std::vector<FixtureConversation>& cs) {
  std::array<std::array<std::size_t, 4>, 12> t{};
  const std::string columns = "crbn";
  for (const auto& c : cs) {
    for (std::size_t m = 0; m < 12; ++m) ++t[m][columns.find(c.maxim[m])];
  }
  return t;
}

std::size_t gap(const std::string& maxim) {
  std::set<std::size_t> chosen, rejected;
  for (std::size_t m = 0; m < maxim.size(); ++m) {
    if (maxim[m] == 'c' || maxim[m] == 'b') chosen.insert(m);
    if (maxim[m] == 'r' || maxim[m] == 'b') rejected.insert(m);
  }
  std::vector<std::size_t> diff;
  std::set_symmetric_difference(chosen.begin(), chosen.end(), rejected.begin(), rejected.end(),
                                std::back_inserter(diff));
  return diff.size();
}

CascadeExpect cascade(const CascadeCase& c) {
  // Per-stage decision letters: A/B agreed, T tie, F failed.
  std::vector<char> d;
  for (auto [o, s] : c.method_votes) {
    if (o == 'F' || s == 'F') {
      d.push_back('F');
    } else {
      d.push_back(o == s ? o : 'T');
    }
  }
  if (c.rm) d.push_back(*c.rm);
  const std::size_t method_count = c.method_votes.size();

  CascadeExpect e{'T', std::nullopt, d.size(), 'T'};
  bool any_failure = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool is_rm = i >= method_count;
    if (d[i] == 'A' || d[i] == 'B') {
      e = {d[i], i, i + 1, 'T'};
      break;
    }
    if (d[i] == 'F') {
      if (!c.forward_failures || is_rm) {
        e = {'F', i, i + 1, 'T'};
        break;
      }
      any_failure = true;
    }
    if (i + 1 == d.size()) e = {any_failure ? 'F' : 'T', std::nullopt, d.size(), 'T'};
  }
  e.outcome_if_chosen_a = e.final == 'A' ? 'W' : e.final == 'T' ? 'T' : 'L';
  return e;
}

}  // namespace amulet::testing::oracle
