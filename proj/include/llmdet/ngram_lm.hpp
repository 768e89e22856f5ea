#pragma once

#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "llmdet/dictionary.hpp"
#include "llmdet/provider.hpp"
#include "llmdet/tokenizer.hpp"

namespace llmdet {

// Add-alpha smoothed n-gram language model; the built-in stand-in for a
// generative model.
//
//   p(w | ctx) = (count(ctx, w) + alpha) / (count(ctx) + alpha * |V|)
//
// Counts are kept for every context length 0..order-1, so shorter contexts
// (sequence starts, 2-gram dictionary levels) get their own estimate rather
// than a padded one. Training pads sequence starts with a begin-of-sequence
// sentinel that is never part of the vocabulary.
class NgramLM final : public ProbabilityProvider {
 public:
  static constexpr TokenId kBos = std::numeric_limits<TokenId>::max();

  NgramLM(std::string name, int order, double alpha, std::size_t vocab_size,
          std::uint64_t vocab_hash);

  // Accumulate counts; call finalize() before querying.
  void add(const TokenSequence& seq);
  void finalize();

  int order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }

  // Context longer than order-1 is truncated to its last order-1 tokens.
  double prob(std::span<const TokenId> context, TokenId next) const;

  // Full conditional distribution, indexed by token id.
  std::vector<double> distribution(std::span<const TokenId> context) const;

  // Mean of -ln p(x_i | preceding tokens) over positions 1..t-1, each
  // conditioned on at most order-1 real preceding tokens. 0 for t < 2.
  double average_nll(const TokenSequence& seq) const;

  const std::string& name() const override { return name_; }
  std::uint64_t vocab_hash() const override { return vocab_hash_; }
  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<ProbEntry> next_token_distribution(std::span<const TokenId> context,
                                                 std::size_t top_k) const override;
  TokenSequence generate(const TokenSequence& prompt, std::size_t max_len, double temperature,
                         std::uint64_t seed) const override;

 private:
  struct ContextStats {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint64_t>> counts;  // count desc, id asc once finalized
  };

  const ContextStats* stats_for(std::span<const TokenId> context) const;
  std::span<const TokenId> effective_context(std::span<const TokenId> context) const;

  std::string name_;
  int order_;
  double alpha_;
  std::size_t vocab_size_;
  std::uint64_t vocab_hash_;
  ContextStats unigram_;
  std::vector<std::uint64_t> unigram_dense_;
  std::unordered_map<NgramKey, ContextStats, NgramKeyHash> contexts_;
  bool finalized_ = true;

  friend NgramLM train_ngram_lm(std::span<const TokenSequence>, int, double, const Vocabulary&,
                                std::string);
};

// Throws Error("empty corpus") when no tokens are supplied.
NgramLM train_ngram_lm(std::span<const TokenSequence> corpus, int order, double alpha,
                       const Vocabulary& vocab, std::string name = "ngram");

}  // namespace llmdet
