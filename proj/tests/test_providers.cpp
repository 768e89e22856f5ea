#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "llmdet/corpus.hpp"
#include "llmdet/error.hpp"
#include "llmdet/ngram_lm.hpp"
#include "llmdet/provider.hpp"
#include "llmdet/rng.hpp"
#include "test_util.hpp"

using namespace llmdet;
using llmdet::testing::seq;
using llmdet::testing::vocab_of;

namespace {

struct Fixture {
  Vocabulary vocab;
  NgramLM lm;
};

Fixture topical_lm(const std::string& topic, int order = 3, double alpha = 0.1) {
  const auto docs = builtin_corpus(topic, 300, 1);
  auto vocab = build_vocabulary(docs, 500);
  std::vector<TokenSequence> seqs;
  for (const auto& d : docs) seqs.push_back(tokenize(d, vocab));
  auto lm = train_ngram_lm(seqs, order, alpha, vocab, topic);
  return {std::move(vocab), std::move(lm)};
}

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(NgramLM, HandArithmetic) {
  const auto v = vocab_of({"a", "b"});
  const std::vector<TokenSequence> corpus{seq({1, 2})};
  const auto lm = train_ngram_lm(corpus, 2, 1.0, v);
  EXPECT_DOUBLE_EQ(lm.prob(std::vector<TokenId>{1}, 2), 0.5);
  EXPECT_DOUBLE_EQ(lm.prob(std::vector<TokenId>{1}, 1), 0.25);
}

TEST(NgramLM, UnseenContextIsUniform) {
  const auto v = vocab_of({"a", "b", "c"});
  const std::vector<TokenSequence> corpus{seq({1, 2, 1, 2})};
  const auto lm = train_ngram_lm(corpus, 3, 0.1, v);
  for (double p : lm.distribution(std::vector<TokenId>{3, 3})) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(NgramLM, DistributionsNormalize) {
  const auto f = topical_lm("science");
  std::mt19937_64 gen(4);
  for (int i = 0; i < 300; ++i) {
    std::vector<TokenId> ctx(gen() % 4);
    for (auto& t : ctx) t = static_cast<TokenId>(gen() % f.vocab.size());
    const auto d = f.lm.distribution(ctx);
    EXPECT_NEAR(sum_of(d), 1.0, 1e-9);
    for (double p : d) EXPECT_GT(p, 0.0);
  }
}

TEST(NgramLM, ContextTruncatedToOrder) {
  const auto f = topical_lm("sports");
  const std::vector<TokenId> long_ctx{5, 6, 7, 8}, short_ctx{7, 8};
  EXPECT_EQ(f.lm.distribution(long_ctx), f.lm.distribution(short_ctx));
}

TEST(NgramLM, TrainErrors) {
  const auto v = vocab_of({"a"});
  const std::vector<TokenSequence> none;
  EXPECT_THROW(train_ngram_lm(none, 2, 1.0, v), Error);
  const std::vector<TokenSequence> empties{TokenSequence{}, TokenSequence{}};
  EXPECT_THROW(train_ngram_lm(empties, 2, 1.0, v), Error);
  const std::vector<TokenSequence> one{seq({1})};
  EXPECT_THROW(train_ngram_lm(one, 1, 1.0, v), Error);
  EXPECT_THROW(train_ngram_lm(one, 2, 0.0, v), Error);
  EXPECT_THROW(train_ngram_lm(std::vector<TokenSequence>{seq({7})}, 2, 1.0, v), Error);
}

TEST(NgramLM, AverageNllMatchesDefinition) {
  const auto f = topical_lm("cooking");
  const auto t = tokenize("the chef stirred the soup .", f.vocab);
  double sum = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const std::size_t len = std::min<std::size_t>(i, 2);
    sum -= std::log(f.lm.prob(std::span<const TokenId>(t.ids).subspan(i - len, len), t.ids[i]));
  }
  EXPECT_DOUBLE_EQ(f.lm.average_nll(t), sum / static_cast<double>(t.size() - 1));
  EXPECT_EQ(f.lm.average_nll(seq({1})), 0.0);
}

TEST(NextToken, UniformProvider) {
  const UniformProvider p("u", 4, 0);
  const auto e = p.next_token_distribution(std::vector<TokenId>{1}, 2);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_DOUBLE_EQ(e[0].prob, 0.25);
  EXPECT_DOUBLE_EQ(e[1].prob, 0.25);
  EXPECT_LT(e[0].token, e[1].token);
  EXPECT_THROW(p.next_token_distribution({}, 0), ProviderError);
}

TEST(NextToken, NgramHandArithmetic) {
  const auto v = vocab_of({"a", "b"});
  const std::vector<TokenSequence> corpus{tokenize("a b a b", v)};
  const double alpha = 0.1;
  const auto lm = train_ngram_lm(corpus, 2, alpha, v);
  const auto e = lm.next_token_distribution(std::vector<TokenId>{1}, 1);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].token, 2u);
  EXPECT_DOUBLE_EQ(e[0].prob, (2 + alpha) / (2 + 3 * alpha));
}

TEST(NextToken, FullDistributionSumsToOneAndIsOrdered) {
  const auto f = topical_lm("travel");
  std::mt19937_64 gen(12);
  for (int i = 0; i < 100; ++i) {
    std::vector<TokenId> ctx(1 + gen() % 2);
    for (auto& t : ctx) t = static_cast<TokenId>(gen() % f.vocab.size());
    const auto e = f.lm.next_token_distribution(ctx, f.vocab.size());
    ASSERT_EQ(e.size(), f.vocab.size());
    double s = 0;
    for (std::size_t j = 0; j < e.size(); ++j) {
      s += e[j].prob;
      if (j) EXPECT_TRUE(entry_order(e[j - 1], e[j]));
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
    const auto full = f.lm.distribution(ctx);
    for (const auto& x : e) EXPECT_EQ(x.prob, full[x.token]);
    // Truncation keeps the untruncated values.
    const auto top3 = f.lm.next_token_distribution(ctx, 3);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(top3[j].prob, e[j].prob);
  }
}

TEST(NextToken, RejectsOutOfRangeContext) {
  const auto f = topical_lm("science");
  EXPECT_THROW(f.lm.next_token_distribution(std::vector<TokenId>{static_cast<TokenId>(f.vocab.size())}, 1),
               ProviderError);
}

TEST(Generate, DeterministicGivenSeed) {
  const auto f = topical_lm("science");
  const auto prompt = tokenize("the cell", f.vocab);
  const auto a = f.lm.generate(prompt, 30, 1.0, 77);
  const auto b = f.lm.generate(prompt, 30, 1.0, 77);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 30u);
  EXPECT_TRUE(std::equal(prompt.ids.begin(), prompt.ids.end(), a.ids.begin()));
  EXPECT_NE(a, f.lm.generate(prompt, 30, 1.0, 78));
  EXPECT_THROW(f.lm.generate(prompt, 30, 0.0, 1), ProviderError);
}

TEST(Generate, NearZeroTemperatureIsGreedy) {
  const auto f = topical_lm("sports", 3, 0.1);
  const auto prompt = tokenize("the team", f.vocab);
  const auto out = f.lm.generate(prompt, 20, 1e-6, 5);
  std::vector<TokenId> hist = prompt.ids;
  for (std::size_t i = prompt.size(); i < out.size(); ++i) {
    const auto d = f.lm.distribution(std::span<const TokenId>(hist).last(2));
    const auto best = std::max_element(d.begin(), d.end());
    ASSERT_EQ(std::count(d.begin(), d.end(), *best), 1);
    EXPECT_EQ(out.ids[i], static_cast<TokenId>(best - d.begin()));
    hist.push_back(out.ids[i]);
  }
}

TEST(Sampling, TemperatureOneIsIdentity) {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  // Cumulative boundaries 0.1, 0.3, 0.6, 1.0.
  EXPECT_EQ(sample_with_temperature(p, 1.0, 0.05), 0u);
  EXPECT_EQ(sample_with_temperature(p, 1.0, 0.15), 1u);
  EXPECT_EQ(sample_with_temperature(p, 1.0, 0.59), 2u);
  EXPECT_EQ(sample_with_temperature(p, 1.0, 0.61), 3u);
  Rng rng(3);
  std::vector<int> hits(4);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hits[sample_with_temperature(p, 1.0, rng.uniform())];
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(hits[i] / double(n), p[i], 0.005);
}

TEST(Sampling, TemperatureReweighting) {
  const std::vector<double> p{0.2, 0.8};
  // T = 0.5: weights 0.04, 0.64 -> 1/17, 16/17.
  EXPECT_EQ(sample_with_temperature(p, 0.5, 1.0 / 17 - 1e-9), 0u);
  EXPECT_EQ(sample_with_temperature(p, 0.5, 1.0 / 17 + 1e-9), 1u);
  EXPECT_EQ(sample_with_temperature(std::vector<double>{0.0, 1.0}, 1.0, 0.0), 1u);
  EXPECT_THROW(sample_with_temperature(std::vector<double>{}, 1.0, 0.5), Error);
  EXPECT_THROW(sample_with_temperature(std::vector<double>{0.0}, 1.0, 0.5), Error);
}

TEST(Sampling, ArgmaxMassMonotoneInTemperature) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(2 + gen() % 6);
    for (auto& x : p) x = std::uniform_real_distribution<double>(0.01, 1.0)(gen);
    const double s = sum_of(p);
    for (auto& x : p) x /= s;
    const auto arg = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    auto mass = [&](double T) {
      double num = 0, den = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double w = std::pow(p[i], 1 / T);
        den += w;
        if (i == arg) num = w;
      }
      return num / den;
    };
    // Probability of drawing the argmax equals the length of its interval.
    auto drawn = [&](double T) {
      double lo = -1, hi = -1;
      for (int k = 0; k <= 4000; ++k) {
        const double u = k / 4000.0 * (1 - 1e-12);
        if (sample_with_temperature(p, T, u) == arg) {
          if (lo < 0) lo = u;
          hi = u;
        }
      }
      return hi - lo;
    };
    double prev = 0;
    for (double T : {2.0, 1.0, 0.7, 0.4, 0.1}) {
      const double m = mass(T);
      EXPECT_GT(m, prev);
      EXPECT_NEAR(drawn(T), m, 2e-3);
      prev = m;
    }
  }
}

TEST(Uniform, GenerateAndErrors) {
  const UniformProvider p("u", 5, 0);
  const auto out = p.generate(seq({1, 2}), 10, 1.0, 4);
  EXPECT_EQ(out.size(), 10u);
  for (auto id : out.ids) EXPECT_LT(id, 5u);
  EXPECT_EQ(out, p.generate(seq({1, 2}), 10, 1.0, 4));
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(9, 9), derive_seed(9, 9));
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.below(7), b.below(7));
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
