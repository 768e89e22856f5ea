#include <gtest/gtest.h>

#include <map>
#include <random>

#include "llmdet/error.hpp"
#include "llmdet/tokenizer.hpp"
#include "test_util.hpp"

using namespace llmdet;
using llmdet::testing::vocab_of;

TEST(Tokenize, EmptyInput) {
  const auto v = vocab_of({"a"});
  EXPECT_TRUE(tokenize("", v).empty());
  EXPECT_TRUE(tokenize("  \t\n", v).empty());
}

TEST(Tokenize, AllKnownWords) {
  const auto v = vocab_of({"the", "cat", "sat"});
  const auto s = tokenize("the cat sat", v);
  EXPECT_EQ(s.ids, (std::vector<TokenId>{v.id_of("the"), v.id_of("cat"), v.id_of("sat")}));
}

TEST(Tokenize, UnknownWordMapsToUnk) {
  const std::vector<std::string> corpus{"the cat sat", "the dog sat on the mat"};
  const auto v = build_vocabulary(corpus, 100);
  ASSERT_FALSE(v.contains("zyzzyva"));
  const auto s = tokenize("the zyzzyva sat", v);
  EXPECT_EQ(s.ids, (std::vector<TokenId>{v.id_of("the"), v.unk_id(), v.id_of("sat")}));
}

TEST(SplitTokens, PunctuationAndCase) {
  EXPECT_EQ(split_tokens("Hello, World!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
  EXPECT_EQ(split_tokens("don't"), (std::vector<std::string>{"don", "'", "t"}));
  EXPECT_EQ(split_tokens("abc123 x"), (std::vector<std::string>{"abc123", "x"}));
  EXPECT_EQ(split_tokens("a...b"), (std::vector<std::string>{"a", ".", ".", ".", "b"}));
}

TEST(SplitTokens, NfcNormalization) {
  // "e" + combining acute vs precomposed U+00E9
  EXPECT_EQ(split_tokens("caf\x65\xcc\x81"), split_tokens("caf\xc3\xa9"));
  EXPECT_EQ(split_tokens("caf\xc3\xa9"), (std::vector<std::string>{"caf\xc3\xa9"}));
  EXPECT_EQ(split_tokens("\xc3\x89T\xc3\x89"), (std::vector<std::string>{"\xc3\xa9t\xc3\xa9"}));
}

TEST(SplitTokens, UnkStringIsNotProducible) {
  const auto toks = split_tokens("<unk> <UNK>");
  for (const auto& t : toks) EXPECT_NE(t, "<unk>");
}

TEST(Tokenize, ConcatenationAcrossWhitespace) {
  const std::vector<std::string> corpus{"alpha beta gamma, delta. alpha!"};
  const auto v = build_vocabulary(corpus, 100);
  const std::string a = "alpha beta,", b = "gamma delta";
  auto joined = tokenize(a, v).ids;
  const auto tb = tokenize(b, v).ids;
  joined.insert(joined.end(), tb.begin(), tb.end());
  EXPECT_EQ(tokenize(a + " " + b, v).ids, joined);
}

TEST(Tokenize, Deterministic) {
  const std::vector<std::string> corpus{"one two three two one", "Four five! six"};
  const auto v = build_vocabulary(corpus, 100);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(tokenize("five two Seven one", v), tokenize("five two Seven one", v));
}

TEST(BuildVocabulary, FrequencyOrder) {
  const std::vector<std::string> corpus{"a a b"};
  const auto v = build_vocabulary(corpus, 3);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<unk>", "a", "b"}));
}

TEST(BuildVocabulary, SingleToken) {
  const std::vector<std::string> corpus{"x"};
  EXPECT_EQ(build_vocabulary(corpus, 2).tokens(), (std::vector<std::string>{"<unk>", "x"}));
}

TEST(BuildVocabulary, EmptyCorpus) {
  const std::vector<std::string> none;
  EXPECT_THROW(
      {
        try {
          build_vocabulary(none, 10);
        } catch (const Error& e) {
          EXPECT_STREQ(e.what(), "empty corpus");
          throw;
        }
      },
      Error);
  const std::vector<std::string> blank{"", "   "};
  EXPECT_THROW(build_vocabulary(blank, 10), Error);
}

TEST(BuildVocabulary, MaxSizeBelowTwo) {
  const std::vector<std::string> corpus{"x"};
  EXPECT_THROW(build_vocabulary(corpus, 1), Error);
}

TEST(BuildVocabulary, LexicographicTieBreakAndTruncation) {
  const std::vector<std::string> corpus{"d c b a d c b a e"};
  const auto v = build_vocabulary(corpus, 4);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<unk>", "a", "b", "c"}));
}

TEST(BuildVocabulary, FrequencyRankProperty) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> corpus;
    for (int d = 0; d < 20; ++d) {
      std::string doc;
      for (int w = 0; w < 30; ++w) doc += "w" + std::to_string(gen() % (1 + gen() % 40)) + " ";
      corpus.push_back(doc);
    }
    std::map<std::string, int> counts;
    for (const auto& d : corpus) {
      for (const auto& t : split_tokens(d)) ++counts[t];
    }
    const auto v = build_vocabulary(corpus, 1000);
    ASSERT_EQ(v.size(), counts.size() + 1);
    for (const auto& [u, cu] : counts) {
      for (const auto& [w, cw] : counts) {
        if (cu > cw) EXPECT_LT(v.id_of(u), v.id_of(w));
      }
    }
  }
}

TEST(Vocabulary, DenseIds) {
  const std::vector<std::string> corpus{"p q r s p q p"};
  const auto v = build_vocabulary(corpus, 10);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.id_of(v.token(static_cast<TokenId>(i))), i);
  EXPECT_EQ(v.unk_id(), 0u);
  EXPECT_EQ(v.token(v.unk_id()), "<unk>");
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  llmdet::testing::TempDir dir;
  const std::vector<std::string> corpus{"Straße über naïve 東京 , ; x y z x"};
  const auto v = build_vocabulary(corpus, 100);
  v.save(dir.file("v.txt"));
  const auto w = Vocabulary::load(dir.file("v.txt"));
  EXPECT_EQ(w.tokens(), v.tokens());
  EXPECT_EQ(w.serialize(), v.serialize());
  EXPECT_EQ(llmdet::testing::slurp(dir.file("v.txt")), v.serialize());
  EXPECT_EQ(w.hash(), v.hash());
  EXPECT_EQ(v.hash(), fnv1a64(v.serialize()));
}

TEST(Vocabulary, ParseRejectsMalformed) {
  EXPECT_THROW(Vocabulary::parse(""), FormatError);
  EXPECT_THROW(Vocabulary::parse("a\nb\n"), FormatError);
  EXPECT_THROW(Vocabulary::parse("<unk>\n\nb\n"), FormatError);
  EXPECT_THROW(Vocabulary::parse("<unk>\na\na\n"), Error);
  EXPECT_NO_THROW(Vocabulary::parse("<unk>\na\n"));
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Detokenize, JoinsWithSpaces) {
  const auto v = vocab_of({"a", "b"});
  EXPECT_EQ(detokenize(llmdet::testing::seq({1, 2, 0}), v), "a b <unk>");
  EXPECT_EQ(detokenize(TokenSequence{}, v), "");
}
