#include <gtest/gtest.h>

#include <cctype>
#include <random>

#include "mlmd/core.hpp"
#include "mlmd/error.hpp"
#include "test_support.hpp"

namespace mlmd {
namespace {

// Character-offset scanner kept separate from tokenize().
std::vector<CharSpan> scan_spans(const std::string& raw) {
  std::vector<CharSpan> spans;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
    if (i == raw.size()) break;
    std::size_t j = i;
    while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
    spans.push_back({i, j});
    i = j;
  }
  return spans;
}

TEST(Tokenize, SplitsOnWhitespace) {
  auto t = tokenize("the cat sat");
  EXPECT_EQ(t.words(), (std::vector<std::string>{"the", "cat", "sat"}));
  EXPECT_EQ(t.size(), 3u);
}

TEST(Tokenize, DoubleSpaceRoundTrips) {
  auto t = tokenize("dog  ran");
  EXPECT_EQ(t.words(), (std::vector<std::string>{"dog", "ran"}));
  EXPECT_EQ(t.char_spans()[1].begin, 5u);
  EXPECT_EQ(detokenize(t), "dog  ran");
}

TEST(Tokenize, LongSentenceSpansMatchScanner) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> pool = {"a", "bb", "ccc", "movie,", "great!", "x"};
  std::uniform_int_distribution<int> gap(1, 3);
  std::string raw;
  for (int i = 0; i < 200; ++i) {
    if (i > 0) raw += std::string(static_cast<std::size_t>(gap(rng)), i % 7 == 0 ? '\t' : ' ');
    raw += pool[rng() % pool.size()];
  }
  auto t = tokenize(raw);
  EXPECT_EQ(t.size(), 200u);
  EXPECT_EQ(t.char_spans(), scan_spans(raw));
  for (std::size_t p = 1; p <= t.size(); ++p) {
    const auto& s = t.char_spans()[p - 1];
    EXPECT_EQ(raw.substr(s.begin, s.end - s.begin), t.word(p));
  }
  EXPECT_EQ(detokenize(t), raw);
}

TEST(Tokenize, EmptyInputThrows) {
  try {
    tokenize("   \n ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(TokenizedText, WordIsOneBased) {
  auto t = tokenize("a b c");
  EXPECT_EQ(t.word(1), "a");
  EXPECT_EQ(t.word(3), "c");
  EXPECT_THROW(t.word(0), Error);
  EXPECT_THROW(t.word(4), Error);
}

TEST(TokenizedText, WithWordKeepsSpacing) {
  auto t = tokenize("  the  cat sat ");
  auto u = t.with_word(2, "kitten");
  EXPECT_EQ(u.raw(), "  the  kitten sat ");
  EXPECT_EQ(u.char_spans(), scan_spans(u.raw()));
  EXPECT_EQ(tokenize(u.raw()), u);
  EXPECT_THROW(t.with_word(2, "two words"), Error);
}

TEST(TokenizedText, FromWordsJoinsWithSingleSpaces) {
  std::vector<std::string> w = {"x", "y"};
  EXPECT_EQ(from_words(w).raw(), "x y");
}

TEST(ConfidenceVector, ArgmaxAndTieBreak) {
  EXPECT_EQ(ConfidenceVector({0.9, 0.1}).argmax().value, 1);
  EXPECT_EQ(ConfidenceVector({0.5, 0.5}).argmax().value, 1);
  EXPECT_EQ(ConfidenceVector({0.2, 0.4, 0.4}).argmax().value, 2);
}

TEST(ConfidenceVector, RejectsOffSimplex) {
  EXPECT_THROW(ConfidenceVector({0.6, 0.6}), Error);
  EXPECT_THROW(ConfidenceVector({1.2, -0.2}), Error);
  EXPECT_THROW(ConfidenceVector({1.0}), Error);
}

TEST(ConfidenceVector, KeepsValuesExactly) {
  const double a = 0.1234567890123456789;
  ConfidenceVector v({a, 1.0 - a});
  EXPECT_EQ(v.probs()[0], a);
  EXPECT_EQ(v.probs()[1], 1.0 - a);
}

TEST(Predict, ToyVictimMatchesIndependentForwardPass) {
  const std::vector<std::string> vocab = {"the", "cat", "sat", "dog"};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto victim = testing::random_victim(vocab, 4, 3, seed);
    const std::vector<std::string> words = {"the", "cat", "sat"};
    auto pred = predict(victim, tokenize("the cat sat"));
    const auto ref = testing::reference_probs(victim, words);
    EXPECT_EQ(pred.label.index(), testing::reference_argmax(ref));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(pred.confidence.probs()[c], ref[c], 1e-12);
  }
}

TEST(Predict, BatchKeepsOrder) {
  auto victim = testing::random_victim({"a", "b", "c"}, 3, 2, 5);
  std::vector<TokenizedText> xs = {tokenize("a"), tokenize("b c"), tokenize("c a b")};
  auto preds = predict_batch(victim, xs);
  ASSERT_EQ(preds.size(), 3u);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(preds[i].confidence, predict(victim, xs[i]).confidence);
  }
}

TEST(LabeledPair, ValidityFollowsPredictions) {
  ToyVictimModel::Parameters p;
  p.dim = 1;
  p.classes = 2;
  p.embeddings = {{0.0}, {1.0}, {0.0}};
  p.head = {{1.0}, {0.0}};
  p.bias = {0.0, 0.1};
  ToyVictimModel victim({{"good", 1}, {"meh", 2}}, p);
  EXPECT_TRUE(is_valid_pair(victim, {tokenize("good"), tokenize("meh"), "t"}));
  EXPECT_FALSE(is_valid_pair(victim, {tokenize("meh"), tokenize("meh meh"), "t"}));
}

TEST(ErrorCodes, BackendClassification) {
  EXPECT_TRUE(is_backend_error(ErrorCode::kTimeout));
  EXPECT_TRUE(is_backend_error(ErrorCode::kSchemaViolation));
  EXPECT_FALSE(is_backend_error(ErrorCode::kInvalidArgument));
  Error e(ErrorCode::kEmptyInput, "x");
  EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  EXPECT_NE(std::string(e.what()).find("x"), std::string::npos);
}

}  // namespace
}  // namespace mlmd
