#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "llmdet/error.hpp"
#include "llmdet/metrics.hpp"

using namespace llmdet;

namespace {

const std::vector<double> kLlmdetF1{98.77, 77.09, 76.39, 91.27, 96.44, 97.98, 87.21, 83.87, 84.18};
const std::vector<double> kTruePplF1{98.48, 97.22, 96.96, 80.60, 98.85, 99.34, 89.10, 94.35, 97.35};

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("s" + std::to_string(i));
  return out;
}

}  // namespace

TEST(F1, EqualRates) {
  for (double x : {0.0, 0.1, 0.5, 1.0}) EXPECT_DOUBLE_EQ(f1(x, x), x);
}

TEST(F1, PublishedFixtures) {
  EXPECT_NEAR(100 * f1(0.9854, 0.9900), 98.77, 0.005);
}

TEST(F1, HarmonicMeanOracle) {
  EXPECT_NEAR(f1(0.7609, 0.7813), 2 * 0.7609 * 0.7813 / (0.7609 + 0.7813), 1e-15);
  EXPECT_NEAR(100 * f1(0.7609, 0.7813), 77.0965, 5e-5);
}

TEST(F1, ZeroDenominator) { EXPECT_EQ(f1(0.0, 0.0), 0.0); }

TEST(F1, BoundedByArithmeticMean) {
  std::mt19937_64 gen(1);
  for (int i = 0; i < 10000; ++i) {
    const double p = std::uniform_real_distribution<double>(0, 1)(gen);
    const double r = std::uniform_real_distribution<double>(0, 1)(gen);
    EXPECT_LE(f1(p, r), (p + r) / 2 + 1e-15);
    if (std::fabs(p - r) > 1e-6) EXPECT_LT(f1(p, r), (p + r) / 2);
  }
}

TEST(F1Macro, Means) {
  EXPECT_DOUBLE_EQ(f1_macro(std::vector<double>{0.3, 0.3, 0.3}), 0.3);
  EXPECT_NEAR(f1_macro(kLlmdetF1), 88.14, 0.05);
  EXPECT_NEAR(f1_macro(kTruePplF1), 94.65, 0.05);
  EXPECT_THROW(f1_macro(std::vector<double>{}), Error);
}

TEST(F1Macro, OrderInvariant) {
  auto v = kLlmdetF1;
  const double m = f1_macro(v);
  std::mt19937_64 gen(2);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(v.begin(), v.end(), gen);
    EXPECT_NEAR(f1_macro(v), m, 1e-12);
  }
}

TEST(RecallAtK, Examples) {
  const std::vector<std::vector<std::size_t>> r{{0, 1, 2}, {1, 0, 2}, {2, 1, 0}, {0, 2, 1}};
  const std::vector<std::size_t> labels{0, 0, 1, 2};
  EXPECT_DOUBLE_EQ(recall_at_k(r, labels, 1), 0.25);
  EXPECT_DOUBLE_EQ(recall_at_k(r, labels, 2), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_k(r, labels, 3), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_k(r, labels, 10), 1.0);

  const std::vector<std::vector<std::size_t>> half{{0, 1}, {1, 0}, {0, 1}, {1, 0}};
  const std::vector<std::size_t> hl{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(recall_at_k(half, hl, 1), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(half, hl, 2), 1.0);

  EXPECT_THROW(recall_at_k(half, std::vector<std::size_t>{0}, 1), Error);
  EXPECT_THROW(recall_at_k(half, hl, 0), Error);
}

TEST(EfficiencyRatio, PublishedFixtures) {
  EXPECT_NEAR(efficiency_ratio(88.14, 94.65, 8678.76, 46410.15), 4.97, 0.02);
  EXPECT_NEAR(efficiency_ratio(86.56, 94.87, 2376.87, 1199.11), 0.46, 0.01);
  EXPECT_NEAR(efficiency_ratio(92.67, 94.87, 14354.61, 1199.11), 0.08, 0.01);
  EXPECT_NEAR(efficiency_ratio(88.19, 94.87, 224.53, 1199.11), 4.96, 0.02);
  EXPECT_DOUBLE_EQ(efficiency_ratio(0.7, 0.7, 3.0, 3.0), 1.0);
}

TEST(EfficiencyRatio, RejectsNonPositive) {
  EXPECT_THROW(efficiency_ratio(0, 1, 1, 1), Error);
  EXPECT_THROW(efficiency_ratio(1, 1, -1, 1), Error);
  EXPECT_THROW(efficiency_ratio(1, 0, 1, 1), Error);
  EXPECT_THROW(efficiency_ratio(1, 1, 1, 0), Error);
}

TEST(Evaluate, PerfectPredictions) {
  std::vector<std::vector<std::size_t>> r;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 12; ++i) {
    const std::size_t l = i % 3;
    std::vector<std::size_t> rank{l};
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != l) rank.push_back(j);
    }
    r.push_back(rank);
    labels.push_back(l);
  }
  const auto rep = evaluate(r, labels, names(3), 1.5);
  EXPECT_DOUBLE_EQ(rep.f1_macro, 1.0);
  for (const auto& c : rep.per_class) {
    EXPECT_DOUBLE_EQ(c.precision, 1.0);
    EXPECT_DOUBLE_EQ(c.recall, 1.0);
  }
  for (auto k : {1u, 2u, 3u}) EXPECT_DOUBLE_EQ(rep.r_at.at(k), 1.0);
  EXPECT_EQ(rep.confusion.trace(), rep.confusion.total());
  EXPECT_EQ(rep.wall_time_s, 1.5);
}

TEST(Evaluate, AllPredictClassZero) {
  std::vector<std::vector<std::size_t>> r(6, std::vector<std::size_t>{0, 1, 2});
  const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2};
  const auto rep = evaluate(r, labels, names(3));
  EXPECT_NEAR(rep.per_class[0].precision, 1.0 / 3, 1e-15);
  EXPECT_DOUBLE_EQ(rep.per_class[0].recall, 1.0);
  for (std::size_t c = 1; c < 3; ++c) {
    EXPECT_EQ(rep.per_class[c].precision, 0.0);
    EXPECT_EQ(rep.per_class[c].recall, 0.0);
    EXPECT_EQ(rep.per_class[c].f1, 0.0);
  }
  EXPECT_NEAR(rep.f1_macro, 0.5 / 3, 1e-15);
  EXPECT_EQ(rep.confusion.at(1, 0), 2u);
  EXPECT_EQ(rep.confusion.col_sum(0), 6u);
}

TEST(Evaluate, InvariantsOnRandomRankings) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + gen() % 5;
    const std::size_t n = 1 + gen() % 60;
    std::vector<std::vector<std::size_t>> r;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> label_counts(c);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> rank(c);
      std::iota(rank.begin(), rank.end(), 0);
      std::shuffle(rank.begin(), rank.end(), gen);
      r.push_back(rank);
      labels.push_back(gen() % c);
      ++label_counts[labels.back()];
    }
    const auto rep = evaluate(r, labels, names(c));
    EXPECT_LE(rep.r_at.at(1), rep.r_at.at(2));
    EXPECT_LE(rep.r_at.at(2), rep.r_at.at(3));
    EXPECT_LE(rep.r_at.at(3), 1.0);
    EXPECT_DOUBLE_EQ(rep.r_at.at(1), static_cast<double>(rep.confusion.trace()) / rep.confusion.total());
    EXPECT_EQ(rep.confusion.total(), n);
    for (std::size_t k = 0; k < c; ++k) {
      EXPECT_EQ(rep.confusion.row_sum(k), label_counts[k]);
      for (double v : {rep.per_class[k].precision, rep.per_class[k].recall, rep.per_class[k].f1}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(Evaluate, Errors) {
  std::vector<std::vector<std::size_t>> r{{0, 1}};
  EXPECT_THROW(evaluate(r, std::vector<std::size_t>{0, 1}, names(2)), Error);
  EXPECT_THROW(evaluate(std::vector<std::vector<std::size_t>>{}, std::vector<std::size_t>{}, names(2)), Error);
  EXPECT_THROW(evaluate(r, std::vector<std::size_t>{5}, names(2)), Error);
}

TEST(ConfusionMatrix, CsvLayout) {
  ConfusionMatrix m(2);
  m.add(0, 0);
  m.add(0, 1);
  m.add(1, 1);
  const std::vector<std::string> n{"human", "gpt"};
  EXPECT_EQ(m.to_csv(n), "truth\\predicted,human,gpt\nhuman,1,1\ngpt,0,1\n");
}

TEST(EvalReport, JsonHasAllFields) {
  std::vector<std::vector<std::size_t>> r{{0, 1}, {1, 0}};
  const auto j = evaluate(r, std::vector<std::size_t>{0, 0}, names(2), 0.25).to_json();
  for (const char* key : {"per_class", "f1_macro", "R@1", "R@2", "R@3", "wall_time_s", "confusion"}) {
    EXPECT_NE(j.find(key), std::string::npos) << key;
  }
}
