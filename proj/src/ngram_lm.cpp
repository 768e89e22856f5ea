#include "llmdet/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "llmdet/error.hpp"
#include "llmdet/rng.hpp"

namespace llmdet {

NgramLM::NgramLM(std::string name, int order, double alpha, std::size_t vocab_size,
                 std::uint64_t vocab_hash)
    : name_(std::move(name)),
      order_(order),
      alpha_(alpha),
      vocab_size_(vocab_size),
      vocab_hash_(vocab_hash) {
  if (order < kMinOrder || order > kMaxOrder) throw Error("language model order must be in [2, 4]");
  if (!(alpha > 0)) throw Error("smoothing alpha must be positive");
  if (vocab_size == 0) throw Error("empty vocabulary");
}

namespace {
void bump(std::vector<std::pair<TokenId, std::uint64_t>>& counts, TokenId w) {
  for (auto& [id, c] : counts) {
    if (id == w) {
      ++c;
      return;
    }
  }
  counts.emplace_back(w, 1);
}
}  // namespace

void NgramLM::add(const TokenSequence& seq) {
  std::array<TokenId, kMaxContext> ctx{};
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const TokenId w = seq.ids[i];
    if (w >= vocab_size_) throw Error("token id outside vocabulary");
    ++unigram_.total;
    if (unigram_dense_.size() < vocab_size_) unigram_dense_.resize(vocab_size_, 0);
    ++unigram_dense_[w];
    for (int m = 1; m < order_; ++m) {
      for (int j = 0; j < m; ++j) {
        const auto pos = static_cast<std::ptrdiff_t>(i) - m + j;
        ctx[static_cast<std::size_t>(j)] = pos < 0 ? kBos : seq.ids[static_cast<std::size_t>(pos)];
      }
      auto& stats = contexts_[NgramKey(std::span<const TokenId>(ctx.data(), static_cast<std::size_t>(m)))];
      ++stats.total;
      bump(stats.counts, w);
    }
  }
  finalized_ = false;
}

void NgramLM::finalize() {
  unigram_.counts.clear();
  for (std::size_t id = 0; id < unigram_dense_.size(); ++id) {
    if (unigram_dense_[id]) unigram_.counts.emplace_back(static_cast<TokenId>(id), unigram_dense_[id]);
  }
  auto order_counts = [](ContextStats& s) {
    std::sort(s.counts.begin(), s.counts.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
  };
  order_counts(unigram_);
  for (auto& [_, s] : contexts_) order_counts(s);
  finalized_ = true;
}

std::span<const TokenId> NgramLM::effective_context(std::span<const TokenId> context) const {
  const auto max_len = static_cast<std::size_t>(order_ - 1);
  return context.size() > max_len ? context.last(max_len) : context;
}

const NgramLM::ContextStats* NgramLM::stats_for(std::span<const TokenId> context) const {
  if (!finalized_) throw Error("language model used before training finished");
  auto ctx = effective_context(context);
  if (ctx.empty()) return &unigram_;
  auto it = contexts_.find(NgramKey(ctx));
  return it == contexts_.end() ? nullptr : &it->second;
}

double NgramLM::prob(std::span<const TokenId> context, TokenId next) const {
  const ContextStats* s = stats_for(context);
  const double denom = (s ? static_cast<double>(s->total) : 0.0) + alpha_ * static_cast<double>(vocab_size_);
  std::uint64_t c = 0;
  if (s) {
    for (const auto& [id, n] : s->counts) {
      if (id == next) {
        c = n;
        break;
      }
    }
  }
  return (static_cast<double>(c) + alpha_) / denom;
}

std::vector<double> NgramLM::distribution(std::span<const TokenId> context) const {
  const ContextStats* s = stats_for(context);
  const double denom = (s ? static_cast<double>(s->total) : 0.0) + alpha_ * static_cast<double>(vocab_size_);
  std::vector<double> probs(vocab_size_, alpha_ / denom);
  if (s) {
    for (const auto& [id, n] : s->counts) probs[id] = (static_cast<double>(n) + alpha_) / denom;
  }
  return probs;
}

double NgramLM::average_nll(const TokenSequence& seq) const {
  if (seq.size() < 2) return 0.0;
  const auto max_ctx = static_cast<std::size_t>(order_ - 1);
  double sum = 0.0;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const std::size_t len = std::min(i, max_ctx);
    sum -= std::log(prob(std::span<const TokenId>(seq.ids).subspan(i - len, len), seq.ids[i]));
  }
  return sum / static_cast<double>(seq.size() - 1);
}

std::vector<ProbEntry> NgramLM::next_token_distribution(std::span<const TokenId> context,
                                                        std::size_t top_k) const {
  if (top_k == 0) throw ProviderError("top_k must be at least 1");
  for (TokenId id : context) {
    if (id >= vocab_size_) throw ProviderError("context token id outside vocabulary");
  }
  const ContextStats* s = stats_for(context);
  const double denom = (s ? static_cast<double>(s->total) : 0.0) + alpha_ * static_cast<double>(vocab_size_);
  const std::size_t k = std::min(top_k, vocab_size_);
  std::vector<ProbEntry> out;
  out.reserve(k);

  // Every observed continuation outranks every unobserved one.
  std::vector<bool> seen(vocab_size_, false);
  if (s) {
    for (const auto& [id, n] : s->counts) {
      seen[id] = true;
      if (out.size() < k) out.push_back({id, (static_cast<double>(n) + alpha_) / denom});
    }
  }
  const double unseen = alpha_ / denom;
  for (TokenId id = 0; out.size() < k && id < vocab_size_; ++id) {
    if (!seen[id]) out.push_back({id, unseen});
  }
  return out;
}

TokenSequence NgramLM::generate(const TokenSequence& prompt, std::size_t max_len,
                                double temperature, std::uint64_t seed) const {
  if (!(temperature > 0)) throw ProviderError("temperature must be positive");
  if (!finalized_) throw Error("language model used before training finished");
  Rng rng(seed);
  TokenSequence out = prompt;
  std::vector<TokenId> history(static_cast<std::size_t>(order_ - 1), kBos);
  history.insert(history.end(), prompt.ids.begin(), prompt.ids.end());
  while (out.size() < max_len) {
    auto ctx = std::span<const TokenId>(history).last(static_cast<std::size_t>(order_ - 1));
    // Sequence-start contexts keep their sentinel padding, matching training.
    const ContextStats* s = nullptr;
    if (auto it = contexts_.find(NgramKey(ctx)); it != contexts_.end()) s = &it->second;
    const double denom = (s ? static_cast<double>(s->total) : 0.0) + alpha_ * static_cast<double>(vocab_size_);
    std::vector<double> probs(vocab_size_, alpha_ / denom);
    if (s) {
      for (const auto& [id, n] : s->counts) probs[id] = (static_cast<double>(n) + alpha_) / denom;
    }
    const auto next = static_cast<TokenId>(sample_with_temperature(probs, temperature, rng.uniform()));
    out.ids.push_back(next);
    history.push_back(next);
  }
  return out;
}

NgramLM train_ngram_lm(std::span<const TokenSequence> corpus, int order, double alpha,
                       const Vocabulary& vocab, std::string name) {
  NgramLM lm(std::move(name), order, alpha, vocab.size(), vocab.hash());
  for (const auto& seq : corpus) lm.add(seq);
  if (lm.unigram_.total == 0) throw Error("empty corpus");
  lm.finalize();
  return lm;
}

}  // namespace llmdet
