#pragma once

#include <cstdint>
#include <vector>

namespace llmdet {

using TokenId = std::uint32_t;

struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// One stored continuation of a context: token and its conditional probability.
struct ProbEntry {
  TokenId token = 0;
  double prob = 0.0;
  friend bool operator==(const ProbEntry&, const ProbEntry&) = default;
};

// Canonical ordering for next-token lists: probability descending, then token id ascending.
inline bool entry_order(const ProbEntry& a, const ProbEntry& b) noexcept {
  if (a.prob != b.prob) return a.prob > b.prob;
  return a.token < b.token;
}

}  // namespace llmdet
