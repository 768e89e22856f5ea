#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "llmdet/types.hpp"

namespace llmdet {

// Source of next-token distributions over the shared vocabulary.
class ProbabilityProvider {
 public:
  virtual ~ProbabilityProvider() = default;

  virtual const std::string& name() const = 0;
  virtual std::uint64_t vocab_hash() const = 0;
  virtual std::size_t vocab_size() const = 0;

  // Top-k continuations, probability descending with token-id tie-break.
  // Probabilities are the untruncated conditionals (not renormalized).
  virtual std::vector<ProbEntry> next_token_distribution(std::span<const TokenId> context,
                                                         std::size_t top_k) const = 0;

  virtual TokenSequence generate(const TokenSequence& prompt, std::size_t max_len,
                                 double temperature, std::uint64_t seed) const = 0;

  // True when const methods may be called from several threads at once.
  virtual bool concurrent() const { return true; }
};

// Same distribution for every context. Mostly useful as a fixture.
class UniformProvider final : public ProbabilityProvider {
 public:
  UniformProvider(std::string name, std::size_t vocab_size, std::uint64_t vocab_hash)
      : name_(std::move(name)), vocab_size_(vocab_size), vocab_hash_(vocab_hash) {}

  const std::string& name() const override { return name_; }
  std::uint64_t vocab_hash() const override { return vocab_hash_; }
  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<ProbEntry> next_token_distribution(std::span<const TokenId> context,
                                                 std::size_t top_k) const override;
  TokenSequence generate(const TokenSequence& prompt, std::size_t max_len, double temperature,
                         std::uint64_t seed) const override;

 private:
  std::string name_;
  std::size_t vocab_size_;
  std::uint64_t vocab_hash_;
};

// Draws one index from probs reweighted as p^(1/T) / sum p^(1/T). Zero
// probabilities are never drawn.
std::size_t sample_with_temperature(std::span<const double> probs, double temperature,
                                    double uniform01);

}  // namespace llmdet
