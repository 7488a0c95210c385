#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"

// Brute-force recounts over the compact fixture encoding. They never touch
// DialogActSet or MaximSheet, so they share no code with the analysis module.
namespace amulet::testing::oracle {

enum class Gran { Full, Function, Dimension };

struct Frac {
  std::size_t num = 0;
  std::size_t den = 0;
};

std::vector<std::pair<std::size_t, std::size_t>> cdf(const std::vector<FixtureConversation>& cs);
/// role 0 = human, 1 = assistant. nullopt when there are no pairs.
std::optional<Frac> turn_shift(const std::vector<FixtureConversation>& cs, int role, Gran g);
/// {ratio, excluded}; ratio nullopt when no pair qualifies.
std::pair<std::optional<Frac>, std::size_t> conditional_shift(const std::vector<FixtureConversation>& cs);
Frac conv_shift(const std::vector<FixtureConversation>& cs, int role, Gran g);
Frac preference_diff(const std::vector<FixtureConversation>& cs, Gran g);
/// [chosen more, rejected more, equal][same DA, different DA]
std::array<std::array<std::size_t, 2>, 3> cross_table(const std::vector<FixtureConversation>& cs);
/// [maxim][chosen better, rejected better, both, neither]
std::array<std::array<std::size_t, 4>, 12> importance(const std::vector<FixtureConversation>& cs);

/// Symmetric difference of explicitly built satisfied sets.
std::size_t gap(const std::string& maxim);

// Cascade reference. A vote is 'A', 'B' or 'F' (failure); an RM result is
// 'A', 'B' or 'F'.
struct CascadeCase {
  std::vector<std::pair<char, char>> method_votes;  // one per method stage
  std::optional<char> rm;                           // present iff RM tail
  bool forward_failures = false;
};

struct CascadeExpect {
  char final;  // 'A', 'B', 'T' (tie) or 'F' (failed)
  std::optional<std::size_t> deciding_stage;
  std::size_t stages_run;
  char outcome_if_chosen_a;  // 'W', 'T', 'L'
};

CascadeExpect cascade(const CascadeCase& c);

}  // namespace amulet::testing::oracle
