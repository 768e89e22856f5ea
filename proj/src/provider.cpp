#include "llmdet/provider.hpp"

#include <algorithm>
#include <cmath>

#include "llmdet/error.hpp"
#include "llmdet/rng.hpp"

namespace llmdet {

std::vector<ProbEntry> UniformProvider::next_token_distribution(std::span<const TokenId>,
                                                                std::size_t top_k) const {
  if (top_k == 0) throw ProviderError("top_k must be at least 1");
  const std::size_t k = std::min(top_k, vocab_size_);
  const double p = 1.0 / static_cast<double>(vocab_size_);
  std::vector<ProbEntry> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = {static_cast<TokenId>(i), p};
  return out;
}

TokenSequence UniformProvider::generate(const TokenSequence& prompt, std::size_t max_len,
                                        double temperature, std::uint64_t seed) const {
  if (!(temperature > 0)) throw ProviderError("temperature must be positive");
  Rng rng(seed);
  TokenSequence out = prompt;
  while (out.size() < max_len) out.ids.push_back(static_cast<TokenId>(rng.below(vocab_size_)));
  return out;
}

std::size_t sample_with_temperature(std::span<const double> probs, double temperature,
                                    double uniform01) {
  if (probs.empty()) throw Error("cannot sample from an empty distribution");
  if (!(temperature > 0)) throw Error("temperature must be positive");
  // Work relative to the largest log-probability so tiny temperatures stay finite.
  double max_log = -INFINITY;
  for (double p : probs) {
    if (p > 0) max_log = std::max(max_log, std::log(p));
  }
  if (max_log == -INFINITY) throw Error("distribution has no positive mass");

  std::vector<double> weights(probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    weights[i] = probs[i] > 0 ? std::exp((std::log(probs[i]) - max_log) / temperature) : 0.0;
    total += weights[i];
  }
  double target = uniform01 * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0) continue;
    last_positive = i;
    if (target < weights[i]) return i;
    target -= weights[i];
  }
  return last_positive;
}

}  // namespace llmdet
