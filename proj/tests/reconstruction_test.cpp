#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mlmd/backends.hpp"
#include "mlmd/error.hpp"
#include "mlmd/reconstruction.hpp"
#include "mlmd/toy_mlm.hpp"

namespace mlmd {
namespace {

const std::vector<std::string> kCorpus = {"the cat sat",  "the dog sat", "a cat ran",
                                          "the cat ran",  "the bird sat", "a dog sat down",
                                          "the cat sat down"};

std::vector<TokenizedText> corpus() {
  std::vector<TokenizedText> out;
  for (const auto& s : kCorpus) out.push_back(tokenize(s));
  return out;
}

// Exhaustive scorer built straight from raw counts.
struct BigramOracle {
  double alpha;
  std::map<std::string, double> uni, left;
  std::map<std::pair<std::string, std::string>, double> bi;
  double tokens = 0;

  explicit BigramOracle(double a) : alpha(a) {
    for (const auto& s : kCorpus) {
      auto w = tokenize(s).words();
      w.insert(w.begin(), "<s>");
      w.push_back("</s>");
      for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        bi[{w[i], w[i + 1]}] += 1;
        left[w[i]] += 1;
      }
      for (std::size_t i = 1; i + 1 < w.size(); ++i) {
        uni[w[i]] += 1;
        tokens += 1;
      }
    }
  }

  double get(const std::map<std::string, double>& m, const std::string& k) const {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  }

  double score(const std::string& l, const std::string& w, const std::string& r) const {
    const double outcomes = static_cast<double>(uni.size() + 1);
    auto b = [&](const std::string& x, const std::string& y) {
      auto it = bi.find({x, y});
      return it == bi.end() ? 0.0 : it->second;
    };
    return std::log((b(l, w) + alpha) / (get(left, l) + alpha * outcomes)) +
           std::log((b(w, r) + alpha) / (get(left, w) + alpha * outcomes)) +
           std::log((get(uni, w) + alpha) / (tokens + alpha * outcomes));
  }

  std::vector<std::pair<double, std::string>> ranked(const std::string& l, const std::string& r) const {
    std::vector<std::pair<double, std::string>> all;
    for (const auto& [w, c] : uni) all.push_back({-score(l, w, r), w});
    std::sort(all.begin(), all.end());
    return all;
  }
};

TEST(ToyMaskedLM, TopThreeMatchesExhaustiveScoring) {
  auto lm = ToyMaskedLM::fit(corpus(), 0.1);
  BigramOracle oracle(0.1);
  std::vector<std::string> rendered = {"the", "[MASK]", "sat"};
  auto got = lm.fill(rendered, 2, 3);
  auto want = oracle.ranked("the", "sat");
  ASSERT_EQ(got.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(got[i].word, want[i].second);
    EXPECT_NEAR(got[i].score, -want[i].first, 1e-12);
  }
  EXPECT_EQ(got[0].word, "cat");
}

TEST(ToyMaskedLM, BoundaryContextsMatchOracle) {
  auto lm = ToyMaskedLM::fit(corpus(), 0.5);
  BigramOracle oracle(0.5);
  std::vector<std::string> first = {"[MASK]", "cat", "ran"};
  auto got = lm.fill(first, 1, 2);
  auto want = oracle.ranked("<s>", "cat");
  EXPECT_EQ(got[0].word, want[0].second);
  EXPECT_EQ(got[1].word, want[1].second);
  std::vector<std::string> last = {"the", "cat", "[MASK]"};
  got = lm.fill(last, 3, 1);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].word, oracle.ranked("cat", "</s>")[0].second);
}

TEST(ToyMaskedLM, JsonRoundTripPreservesScores) {
  auto lm = ToyMaskedLM::fit(corpus(), 0.1);
  auto back = ToyMaskedLM::from_json(lm.to_json());
  EXPECT_EQ(back.vocabulary(), lm.vocabulary());
  for (const auto& w : lm.vocabulary()) {
    EXPECT_EQ(back.score("the", w, "sat"), lm.score("the", w, "sat"));
  }
}

TEST(ToyMaskedLM, RejectsBadArguments) {
  EXPECT_THROW(ToyMaskedLM::fit(corpus(), 0.0), Error);
  EXPECT_THROW(ToyMaskedLM::fit({}, 0.1), Error);
  auto lm = ToyMaskedLM::fit(corpus(), 0.1);
  std::vector<std::string> r = {"a", "[MASK]"};
  EXPECT_THROW(lm.fill(r, 3, 1), Error);
  EXPECT_THROW(lm.fill(r, 2, 0), Error);
}

TEST(FillMask, RestoringStubPutsWordBack) {
  auto x = tokenize("the cat sat");
  RestoringMaskedLM stub({x});
  auto c = fill_mask(stub, x, make_variant(x, 2), 3);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].text, x);
  EXPECT_EQ(c[0].rank, 1u);
  EXPECT_EQ(c[0].position, 2u);
}

TEST(FillMask, BeamWidthOne) {
  auto lm = ToyMaskedLM::fit(corpus(), 0.1);
  auto x = tokenize("the cat sat");
  EXPECT_EQ(fill_mask(lm, x, make_variant(x, 1), 1).size(), 1u);
}

TEST(FillMask, BackendContractViolations) {
  auto x = tokenize("a b");
  auto v = make_variant(x, 1);
  auto code_of = [&](const MaskedLanguageModel& m, std::size_t k) {
    try {
      fill_mask(m, x, v, k);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidArgument;
  };
  EXPECT_EQ(code_of(FixedMaskedLM({}), 2), ErrorCode::kShortBeam);
  EXPECT_EQ(code_of(FixedMaskedLM({{"x", -2.0}, {"y", -1.0}}), 2), ErrorCode::kBackendFailure);
  EXPECT_EQ(code_of(FixedMaskedLM({{"two words", -1.0}}), 1), ErrorCode::kBackendFailure);
}

class OverfullMLM : public MaskedLanguageModel {
 public:
  std::vector<FillCandidate> fill(std::span<const std::string>, std::size_t, std::size_t k) const override {
    return std::vector<FillCandidate>(k + 1, {"w", 0.0});
  }
};

TEST(FillMask, TooManyCandidates) {
  auto x = tokenize("a b");
  try {
    fill_mask(OverfullMLM{}, x, make_variant(x, 1), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBackendFailure);
  }
}

TEST(ReconstructAll, CountsForOneByOne) {
  auto lm = ToyMaskedLM::fit(corpus(), 0.1);
  CountingMaskedLM counted(lm);
  auto x = tokenize("the cat sat down now");
  auto set = reconstruct_all(counted, mask_one_by_one(x), 3);
  EXPECT_EQ(set.candidates.size(), 15u);
  EXPECT_EQ(counted.fill_calls(), 5u);
  EXPECT_TRUE(set.short_groups.empty());
}

TEST(ReconstructAll, CountsForGradientGuided) {
  auto lm = ToyMaskedLM::fit(corpus(), 0.1);
  CountingMaskedLM counted(lm);
  auto x = tokenize("the cat sat and the dog sat down a bird");
  std::vector<double> imp = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto sel = select_keywords(x, imp, 0.3);
  auto set = reconstruct_all(counted, mask_selected(x, sel, 0.3), 3);
  EXPECT_EQ(set.candidates.size(), 9u);
  EXPECT_EQ(counted.fill_calls(), 3u);
  EXPECT_EQ(set.mask_count(), 3u);
}

TEST(ReconstructAll, EqualsDirectEnumeration) {
  auto lm = ToyMaskedLM::fit(corpus(), 0.1);
  auto x = tokenize("a cat sat down");
  auto set = reconstruct_all(lm, mask_one_by_one(x), 3);
  std::set<std::string> direct;
  for (std::size_t p = 1; p <= x.size(); ++p) {
    auto rendered = x.words();
    rendered[p - 1] = "[MASK]";
    for (const auto& c : lm.fill(rendered, p, 3)) direct.insert(x.with_word(p, c.word).raw());
  }
  std::set<std::string> got;
  for (const auto& c : set.candidates) got.insert(c.text.raw());
  EXPECT_EQ(got, direct);
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    EXPECT_EQ(set.candidates[i].group, i / 3 + 1);
    EXPECT_EQ(set.candidates[i].rank, i % 3 + 1);
  }
}

class ShortParallelMLM : public MaskedLanguageModel {
 public:
  std::vector<FillCandidate> fill(std::span<const std::string>, std::size_t pos,
                                  std::size_t k) const override {
    std::vector<FillCandidate> out;
    const std::size_t count = pos % 2 == 0 ? 1 : k;
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back({"p" + std::to_string(pos) + "r" + std::to_string(i), -static_cast<double>(i)});
    }
    return out;
  }
  std::size_t max_in_flight() const override { return 4; }
};

TEST(ReconstructAll, ConcurrentMergeKeepsOrderAndRecordsShortGroups) {
  auto x = tokenize("a b c d e f g");
  auto set = reconstruct_all(ShortParallelMLM{}, mask_one_by_one(x), 3);
  EXPECT_EQ(set.short_groups, (std::vector<std::size_t>{2, 4, 6}));
  std::size_t last_group = 0;
  for (const auto& c : set.candidates) {
    EXPECT_GE(c.group, last_group);
    last_group = c.group;
    EXPECT_EQ(c.text.word(c.position), "p" + std::to_string(c.position) + "r" + std::to_string(c.rank - 1));
  }
  EXPECT_EQ(set.candidates.size(), 4u * 3u + 3u);
}

}  // namespace
}  // namespace mlmd
