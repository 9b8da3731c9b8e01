#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mlmd/backends.hpp"
#include "mlmd/detection.hpp"
#include "mlmd/error.hpp"
#include "mlmd/toy_mlm.hpp"
#include "test_support.hpp"

namespace mlmd {
namespace {

using testing::threshold_victim;

// Hides the gradient interface of a victim.
class PlainVictim : public VictimModel {
 public:
  explicit PlainVictim(const VictimModel& inner) : inner_(inner) {}
  std::vector<ConfidenceVector> classify(std::span<const TokenizedText> t) const override {
    return inner_.classify(t);
  }
  std::size_t class_count() const override { return inner_.class_count(); }

 private:
  const VictimModel& inner_;
};

TEST(Score, ZeroWhenEveryCandidateAgrees) {
  auto victim = testing::random_victim({"a", "b", "c"}, 3, 2, 4);
  auto x = tokenize("a b c b");
  RestoringMaskedLM stub({x});
  auto trace = run_detection(x, DetectorConfig::mlmd(), victim, stub);
  EXPECT_EQ(trace.score.flips, 0u);
  EXPECT_EQ(trace.score.denominator, 12u);
  EXPECT_EQ(trace.score.value(), 0.0);
}

TEST(Score, OneWhenEveryCandidateFlips) {
  auto victim = threshold_victim({{"good", 1.0}}, 0.6);
  auto x = tokenize("good good");
  FixedMaskedLM mlm({{"bad", -1.0}, {"meh", -2.0}, {"ugh", -3.0}});
  auto trace = run_detection(x, DetectorConfig::mlmd(), victim, mlm);
  EXPECT_EQ(trace.score, (DistinguishableScore{6, 6, 6}));
  EXPECT_EQ(trace.score.value(), 1.0);
}

// Counts disagreeing candidates by hand for one-by-one masking.
std::size_t enumerate_flips(const ToyVictimModel& victim, const ToyMaskedLM& lm,
                            const std::vector<std::string>& words, std::size_t k) {
  const auto ref = testing::reference_argmax(testing::reference_probs(victim, words));
  std::size_t flips = 0;
  for (std::size_t p = 0; p < words.size(); ++p) {
    auto rendered = words;
    rendered[p] = "[MASK]";
    for (const auto& c : lm.fill(rendered, p + 1, k)) {
      auto cand = words;
      cand[p] = c.word;
      flips += testing::reference_argmax(testing::reference_probs(victim, cand)) != ref;
    }
  }
  return flips;
}

TEST(Score, FiveOfTwelveEnumeration) {
  const std::vector<std::string> vocab = {"the", "cat", "sat", "dog", "ran", "a", "mat", "on"};
  std::vector<TokenizedText> corpus = {tokenize("the cat sat on a mat"), tokenize("a dog ran"),
                                       tokenize("the dog sat on the mat"), tokenize("a cat ran on")};
  auto lm = ToyMaskedLM::fit(corpus, 0.1);
  std::mt19937_64 rng(99);
  bool found = false;
  for (std::uint64_t seed = 1; seed < 2000 && !found; ++seed) {
    auto victim = testing::random_victim(vocab, 3, 2, seed);
    auto words = testing::random_words(vocab, 4, rng);
    const auto expected = enumerate_flips(victim, lm, words, 3);
    auto trace = run_detection(from_words(words), DetectorConfig::mlmd(), victim, lm);
    ASSERT_EQ(trace.score.flips, expected);
    ASSERT_EQ(trace.score.denominator, 12u);
    if (expected == 5) {
      found = true;
      EXPECT_DOUBLE_EQ(trace.score.value(), 5.0 / 12.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(Score, DenominatorStaysNkUnlessRenormalized) {
  auto victim = threshold_victim({{"good", 1.0}}, 0.5);
  auto x = tokenize("good good good x x");
  FixedMaskedLM mlm({{"zz", 0.0}});
  auto cfg = DetectorConfig::grad_mlmd();
  cfg.k = 1;
  cfg.rate = 0.4;
  auto trace = run_detection(x, cfg, victim, mlm);
  EXPECT_EQ(trace.score.terms, 2u);
  EXPECT_EQ(trace.score.denominator, 5u);
  cfg.renormalize = true;
  trace = run_detection(x, cfg, victim, mlm);
  EXPECT_EQ(trace.score.denominator, 2u);
}

TEST(Score, MismatchedReconstruction) {
  auto victim = testing::random_victim({"a", "b"}, 2, 2, 1);
  RestoringMaskedLM stub({tokenize("a b")});
  auto recon = reconstruct_all(stub, mask_one_by_one(tokenize("a b")), 1);
  try {
    distinguishable_score(tokenize("b a"), recon, victim);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMismatchedReconstruction);
  }
}

TEST(Detect, RestoringStubIsNormal) {
  auto victim = testing::random_victim({"a", "b", "c"}, 3, 2, 8);
  auto x = tokenize("c a b");
  RestoringMaskedLM stub({x});
  auto cfg = DetectorConfig::mlmd();
  cfg.tau = 0.0;
  EXPECT_EQ(detect(x, cfg, victim, stub).decision, 0);
}

TEST(Detect, ScoreAboveThresholdIsAdversarial) {
  auto victim = threshold_victim({{"good", 1.0}}, 0.5);
  auto x = tokenize("good good good x x");
  FixedMaskedLM mlm({{"zz", 0.0}});
  auto cfg = DetectorConfig::mlmd();
  cfg.k = 1;
  cfg.tau = 0.3;
  auto v = detect(x, cfg, victim, mlm);
  EXPECT_DOUBLE_EQ(v.score.value(), 0.6);
  EXPECT_EQ(v.decision, 1);
  cfg.tau = 0.6;
  EXPECT_EQ(detect(x, cfg, victim, mlm).decision, 0);
}

TEST(Detect, RequiresThreshold) {
  auto victim = testing::random_victim({"a"}, 2, 2, 1);
  RestoringMaskedLM stub({tokenize("a")});
  try {
    detect(tokenize("a"), DetectorConfig::mlmd(), victim, stub);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUncalibratedDetector);
  }
}

TEST(Detect, GradientFallbacks) {
  auto victim = threshold_victim({{"good", 1.0}}, 0.5);
  FixedMaskedLM mlm({{"zz", 0.0}});
  auto cfg = DetectorConfig::grad_mlmd();
  cfg.k = 1;
  PlainVictim plain(victim);
  auto trace = run_detection(tokenize("good good good x x"), cfg, plain, mlm);
  EXPECT_EQ(trace.effective_strategy, MaskingStrategy::kOneByOne);
  EXPECT_EQ(trace.recon.mask_count(), 5u);
  EXPECT_FALSE(trace.warnings.empty());

  // Every word embeds to zero, so all gradients vanish.
  trace = run_detection(tokenize("x y z"), cfg, victim, mlm);
  EXPECT_EQ(trace.effective_strategy, MaskingStrategy::kOneByOne);
  EXPECT_FALSE(trace.warnings.empty());

  trace = run_detection(tokenize("good good good x x"), cfg, victim, mlm);
  EXPECT_EQ(trace.effective_strategy, MaskingStrategy::kGradientGuided);
  // The three "good" tie; the stable order keeps the first one a non-keyword.
  EXPECT_EQ(trace.recon.plan.masked_positions(), (std::vector<std::size_t>{2, 3}));
}

TEST(DetectorConfig, Validation) {
  auto c = DetectorConfig::mlmd();
  EXPECT_NO_THROW(c.validate());
  c.k = 0;
  EXPECT_THROW(c.validate(), Error);
  c = DetectorConfig::mlmd();
  c.gamma = 4;
  EXPECT_THROW(c.validate(), Error);
  c = DetectorConfig::mlmd();
  c.tau = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = DetectorConfig::mlmd();
  c.mask_token = "a b";
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(DetectorConfig::grad_mlmd().rate, 0.3);
  EXPECT_EQ(DetectorConfig::mlmd().k, 3u);
}

TEST(Confusion, Metrics) {
  std::vector<double> s = {0.0, 0.2, 0.5, 0.9};
  std::vector<int> l = {0, 1, 0, 1};
  auto c = confusion_at(s, l, 0.3);
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.tn, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_DOUBLE_EQ(c.accuracy(), 0.5);
  EXPECT_DOUBLE_EQ(c.f1(), 0.5);
  Confusion none{0, 0, 3, 0};
  EXPECT_FALSE(none.f1_defined());
  EXPECT_EQ(none.f1(), 0.0);
}

TEST(Calibrate, SeparableCasePicksMidpoint) {
  std::vector<double> s = {0.0, 0.0, 0.0, 0.8, 0.8};
  std::vector<int> l = {0, 0, 0, 1, 1};
  auto r = calibrate_threshold(s, l);
  EXPECT_DOUBLE_EQ(r.tau, 0.4);
  EXPECT_DOUBLE_EQ(r.f1, 1.0);
  EXPECT_FALSE(r.degenerate);
}

TEST(Calibrate, DegenerateWhenAllEqual) {
  std::vector<double> s = {0.5, 0.5};
  std::vector<int> l = {1, 0};
  auto r = calibrate_threshold(s, l);
  EXPECT_TRUE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.tau, 0.5);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Calibrate, RejectsBadInput) {
  std::vector<double> s = {0.1};
  std::vector<int> l = {1, 0};
  EXPECT_THROW(calibrate_threshold(s, l), Error);
  EXPECT_THROW(calibrate_threshold({}, {}), Error);
}

// Every midpoint and both endpoints, F1 computed by a plain loop.
double best_f1_by_scan(const std::vector<double>& s, const std::vector<int>& l) {
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> taus = {0.0, 1.0};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) taus.push_back((sorted[i] + sorted[i + 1]) / 2);
  double best = 0.0;
  for (double t : taus) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool pos = s[i] > t;
      tp += pos && l[i] == 1;
      fp += pos && l[i] == 0;
      fn += !pos && l[i] == 1;
    }
    const double f1 = tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    best = std::max(best, f1);
  }
  return best;
}

TEST(Calibrate, InterleavedMatchesExhaustiveScan) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng() % 40;
    std::vector<double> s(m);
    std::vector<int> l(m);
    for (std::size_t i = 0; i < m; ++i) {
      s[i] = static_cast<double>(rng() % 13) / 12.0;
      l[i] = static_cast<int>(rng() % 2);
    }
    l[0] = 1;
    l[1] = 0;
    auto r = calibrate_threshold(s, l);
    if (r.degenerate) continue;
    const double want = best_f1_by_scan(s, l);
    EXPECT_NEAR(r.f1, want, 1e-12);
    EXPECT_NEAR(confusion_at(s, l, r.tau).f1(), want, 1e-12);
  }
}

ReconstructionSet two_word_set() {
  RestoringMaskedLM stub({tokenize("a b")});
  return reconstruct_all(stub, mask_one_by_one(tokenize("a b")), 3);
}

TEST(Features, MarginsAndPadding) {
  auto recon = two_word_set();
  ScoredReconstruction scored{{ClassLabel{1}, ConfidenceVector({0.9, 0.1})}, {}};
  const std::vector<std::vector<double>> probs = {{0.7, 0.3}, {0.2, 0.8}, {0.5, 0.5},
                                                  {1.0, 0.0}, {0.9, 0.1}, {0.6, 0.4}};
  for (const auto& p : probs) {
    ConfidenceVector cv(p);
    scored.candidates.push_back({cv.argmax(), cv});
  }
  auto fv = feature_from(recon, scored, 10);
  ASSERT_EQ(fv.values.size(), 10u);
  EXPECT_NEAR(fv.values[0], 0.4, 1e-15);
  EXPECT_NEAR(fv.values[1], -0.6, 1e-15);
  EXPECT_EQ(fv.values[2], 0.0);
  for (std::size_t i = 6; i < 10; ++i) EXPECT_EQ(fv.values[i], 1.0);
  EXPECT_FALSE(fv.sorted);

  auto cut = feature_from(recon, scored, 3);
  EXPECT_EQ(cut.values.size(), 3u);
}

TEST(Features, SortAscending) {
  FeatureVector fv{{0.4, -0.6, 1.0}, false, 1};
  auto s = sort_features(fv);
  EXPECT_EQ(s.values, (std::vector<double>{-0.6, 0.4, 1.0}));
  EXPECT_TRUE(s.sorted);
  EXPECT_EQ(s.label, 1);
  auto again = sort_features(s);
  EXPECT_EQ(again.values, s.values);
  EXPECT_TRUE(again.sorted);
}

TEST(Features, SortPreservesMultiset) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    FeatureVector fv;
    for (int i = 0; i < 32; ++i) fv.values.push_back(std::round(u(rng) * 4) / 4);
    auto s = sort_features(fv);
    EXPECT_TRUE(std::is_permutation(s.values.begin(), s.values.end(), fv.values.begin()));
    EXPECT_TRUE(std::is_sorted(s.values.begin(), s.values.end()));
  }
}

std::vector<FeatureVector> separable_dataset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.3, 1.0);
  std::vector<FeatureVector> data;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2;
    FeatureVector fv;
    for (int d = 0; d < 8; ++d) fv.values.push_back(label == 1 ? -u(rng) : u(rng));
    fv.label = label;
    data.push_back(fv);
  }
  return data;
}

TEST(LogisticRegression, FitsSeparableData) {
  auto data = separable_dataset(3);
  LogisticRegression lr;
  train_feature_classifier(data, lr, 42);
  std::size_t correct = 0;
  for (const auto& fv : data) correct += (lr.predict_prob(fv) > 0.5) == (*fv.label == 1);
  EXPECT_EQ(correct, data.size());
}

TEST(LogisticRegression, SeededFitIsDeterministic) {
  auto data = separable_dataset(4);
  LogisticRegression a, b;
  train_feature_classifier(data, a, 7);
  train_feature_classifier(data, b, 7);
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_EQ(a.bias(), b.bias());
}

TEST(LogisticRegression, RejectsBadDatasets) {
  LogisticRegression lr;
  auto data = separable_dataset(5);
  for (auto& fv : data) fv.label = 0;
  try {
    train_feature_classifier(data, lr, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClassCorpus);
  }
  data = separable_dataset(5);
  data[3].values.pop_back();
  try {
    train_feature_classifier(data, lr, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

}  // namespace
}  // namespace mlmd
