#include <algorithm>
#include <random>

#include "mlmd/harness.hpp"

namespace mlmd {

namespace {

// Class 1 = positive, class 2 = negative.
const std::vector<std::string> kPositive = {"great", "wonderful", "brilliant", "superb", "delightful"};
const std::vector<std::string> kNegative = {"awful", "terrible", "dreadful", "boring", "tedious"};
// Weak words seen mostly with the opposite class; they double as the attack's
// "synonyms".
const std::vector<std::string> kWeakNegative = {"fine", "okay", "decent"};
const std::vector<std::string> kWeakPositive = {"passable", "tolerable", "watchable"};
const std::vector<std::string> kPositiveIntensifiers = {"truly", "so"};
const std::vector<std::string> kNegativeIntensifiers = {"rather", "too"};
const std::vector<std::string> kNouns = {"movie", "plot", "acting", "ending"};

template <typename Rng>
const std::string& zipf_pick(const std::vector<std::string>& pool, Rng& rng) {
  std::vector<double> weights;
  for (std::size_t i = 0; i < pool.size(); ++i) weights.push_back(1.0 / static_cast<double>(i + 1));
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return pool[dist(rng)];
}

template <typename Rng>
bool coin(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

template <typename Rng>
std::vector<std::string> clause(bool positive, Rng& rng) {
  const auto& own_int = positive ? kPositiveIntensifiers : kNegativeIntensifiers;
  const auto& other_int = positive ? kNegativeIntensifiers : kPositiveIntensifiers;
  const std::string intensifier = zipf_pick(coin(rng, 0.8) ? own_int : other_int, rng);
  const auto& strong = positive ? kPositive : kNegative;
  const auto& weak = positive ? kWeakPositive : kWeakNegative;
  const std::string adjective = zipf_pick(coin(rng, 0.85) ? strong : weak, rng);
  const std::string noun = zipf_pick(kNouns, rng);

  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0: return {"the", noun, "was", intensifier, adjective};
    case 1: return {"i", "found", "it", intensifier, adjective};
    case 2: return {"a", intensifier, adjective, noun};
    default: return {"the", noun, "felt", intensifier, adjective, "overall"};
  }
}

}  // namespace

std::vector<LabeledText> SyntheticWorld::generate(std::size_t count, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<LabeledText> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const bool positive = (i % 2) == 0;
    const int clauses = std::uniform_int_distribution<int>(2, 4)(rng);
    std::vector<std::string> words;
    for (int c = 0; c < clauses; ++c) {
      if (c > 0) words.push_back(coin(rng, 0.5) ? "and" : ",");
      for (auto& w : clause(positive, rng)) words.push_back(std::move(w));
    }
    out.push_back({from_words(words), ClassLabel{positive ? 1 : 2}});
  }
  return out;
}

SynonymTable SyntheticWorld::synonyms() const {
  SynonymTable table;
  for (const auto& w : kPositive) table[w] = kWeakNegative;
  for (const auto& w : kNegative) table[w] = kWeakPositive;
  for (const auto& w : kWeakPositive) table[w] = kWeakNegative;
  for (const auto& w : kWeakNegative) table[w] = kWeakPositive;
  return table;
}

ToySuite build_toy_suite(const ToySuiteOptions& options) {
  SyntheticWorld world;
  auto train = world.generate(options.train_sentences, options.seed);
  auto victim = toy_victim_train(train, options.victim);
  std::vector<TokenizedText> texts;
  for (const auto& ex : train) texts.push_back(ex.text);
  auto mlm = ToyMaskedLM::fit(texts, options.mlm_alpha);
  ToySuite suite{std::move(train), std::move(victim), std::move(mlm), world.synonyms(), {}, 0};

  AttackConfig config;
  config.synonyms = suite.synonyms;
  config.max_perturb_fraction = options.max_perturb_fraction;
  config.seed = options.seed;

  const std::size_t target = options.pairs_per_attack;
  const std::size_t max_attempts = std::max<std::size_t>(64, 40 * target);
  std::size_t synonym_hits = 0, char_hits = 0;
  // Fresh sentences from a different stream than the training corpus.
  const auto pool = world.generate(max_attempts, options.seed ^ 0x5DEECE66DULL);
  for (const auto& ex : pool) {
    if (synonym_hits >= target && char_hits >= target) break;
    if (predict(suite.victim, ex.text).label != ex.label) continue;
    const bool want_synonym = synonym_hits < target && (synonym_hits <= char_hits || char_hits >= target);
    config.kind = want_synonym ? AttackKind::kSynonymSwap : AttackKind::kCharPerturb;
    ++suite.attempted;
    auto result = want_synonym ? synonym_attack(suite.victim, ex.text, config)
                               : char_attack(suite.victim, ex.text, config);
    if (!result.success()) continue;
    suite.pairs.push_back(std::move(*result.pair));
    ++(want_synonym ? synonym_hits : char_hits);
  }
  if (synonym_hits < target || char_hits < target) {
    throw Error(ErrorCode::kInvalidArgument,
                "toy suite produced only " + std::to_string(synonym_hits) + " synonym and " +
                    std::to_string(char_hits) + " char pairs");
  }
  return suite;
}

}  // namespace mlmd
