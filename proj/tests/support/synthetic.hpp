#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "amulet/backend.hpp"
#include "amulet/prompting.hpp"

namespace amulet::testing {

/// Turns after the final "Dialog -" header of a rendered prompt.
std::vector<ManifestTurn> dialog_of(const std::string& prompt);

/// How the synthetic judge treats one response pair for one kind. Derived
/// from an order-independent digest of the pair.
enum class JudgeBehavior : std::uint8_t {
  Consistent,      // prefers the same text in both orders
  PositionBiased,  // always answers "1"
  Flaky,           // some malformed attempts, then consistent
  BrokenOneOrder,  // never produces usable output in one of the two orders
  Refuses,         // refuses on the first attempts, then consistent
};

JudgeBehavior behavior_for(PromptKind kind, const std::string& r1, const std::string& r2);

/// Deterministic stand-in for an API judge. Every completion is a pure
/// function of (prompt text, kind, attempt), so a transcript store it fills is
/// symmetric under swapping an instance's responses.
class SyntheticJudge : public ChatBackend {
 public:
  explicit SyntheticJudge(PromptDialect dialect = PromptDialect::Default) : dialect_(dialect) {}
  ChatResponse complete(const ChatRequest& req) override;
  std::size_t calls() const { return calls_; }

 private:
  PromptDialect dialect_;
  std::atomic<std::size_t> calls_{0};
};

/// Stable digest helper for synthetic choices.
std::uint64_t h64(const std::string& s);

}  // namespace amulet::testing
