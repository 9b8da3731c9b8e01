#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mlmd/core.hpp"
#include "mlmd/detection.hpp"
#include "mlmd/importance.hpp"
#include "mlmd/reconstruction.hpp"
#include "mlmd/toy_mlm.hpp"
#include "mlmd/toy_victim.hpp"

namespace mlmd {

using SynonymTable = std::map<std::string, std::vector<std::string>>;

enum class AttackKind { kSynonymSwap, kCharPerturb };

std::string_view attack_name(AttackKind kind);
AttackKind parse_attack(std::string_view name);

enum class CharOp { kSwap, kDelete, kSubstitute };

struct AttackConfig {
  AttackKind kind = AttackKind::kSynonymSwap;
  double max_perturb_fraction = 0.4;
  SynonymTable synonyms;
  std::vector<CharOp> char_ops{CharOp::kSwap, CharOp::kDelete, CharOp::kSubstitute};
  std::size_t budget = 8;  // maximum number of edited words
  std::uint64_t seed = 1;
  // Step rate of a gradient-based word update; the greedy attacks here do not
  // use it and only carry it along with the generated pairs.
  double epsilon = 0.0;

  void validate() const;
};

struct AttackResult {
  std::optional<LabeledPair> pair;  // empty on failure
  std::set<std::size_t> perturbed_positions;
  std::size_t queries = 0;  // texts sent to the victim

  bool success() const { return pair.has_value(); }
};

// Greedy word substitution: visits words by descending gradient importance
// and swaps each for the synonym that most lowers the original class
// probability, stopping at the first label flip.
AttackResult synonym_attack(const VictimModel& victim, const TokenizedText& x,
                            const AttackConfig& config);

// Greedy typo attack: visits words by descending importance and applies one
// seeded character edit per word, keeping edits that lower the original class
// probability, until the label flips.
AttackResult char_attack(const VictimModel& victim, const TokenizedText& x,
                         const AttackConfig& config);

// Single-edit perturbation of `word`; `draw` picks the character position and
// replacement letter. Returns the word unchanged when no op applies.
std::string perturb_word(const std::string& word, CharOp op, std::uint64_t draw);

// Synthetic two-class review corpus with redundant sentiment cues, plus a
// synonym table mapping each sentiment adjective to weak words of the
// opposite polarity.
struct SyntheticWorld {
  std::vector<LabeledText> generate(std::size_t count, std::uint64_t seed) const;
  SynonymTable synonyms() const;
};

struct ScoredExample {
  DistinguishableScore score;
  int label = 0;  // 1 = adversarial
};

std::vector<ScoredExample> score_pairs(std::span<const LabeledPair> pairs,
                                       const DetectorConfig& config, const VictimModel& victim,
                                       const MaskedLanguageModel& mlm);

struct CallCounters {
  std::size_t mlm_calls = 0;
  std::size_t victim_texts = 0;
  std::size_t victim_batches = 0;
  std::size_t gradient_calls = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  bool f1_defined = true;
  double auc = 0.0;
  Confusion confusion;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<int> decisions;
  double runtime_seconds = 0.0;
  CallCounters counters;
  DetectorConfig config;
  std::map<std::string, std::size_t> origin_counts;
  std::vector<std::string> warnings;
};

// Area under the ROC curve of raw scores (ties count one half).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Scores every normal (label 0) and adversarial (label 1) text of `pairs` and
// thresholds with config.tau. Throws kUncalibratedDetector without a tau.
EvalReport evaluate(const DetectorConfig& config, std::span<const LabeledPair> pairs,
                    const VictimModel& victim, const MaskedLanguageModel& mlm);

// Recomputes confusion, accuracy, F1 and AUC from the stored per-example data.
EvalReport recompute_metrics(const EvalReport& report);

// Seeded split of paired data, stratified by attack origin. Splitting whole
// pairs keeps normal and adversarial counts balanced in both halves. Returns
// the calibration indices in ascending order.
std::vector<std::size_t> calibration_split(std::span<const LabeledPair> pairs, double fraction,
                                           std::uint64_t seed);
std::vector<std::size_t> complement_indices(std::span<const std::size_t> chosen, std::size_t total);

struct ToySuiteOptions {
  std::size_t train_sentences = 600;
  std::size_t pairs_per_attack = 50;
  std::uint64_t seed = 2024;
  ToyVictimOptions victim;
  double mlm_alpha = 0.1;
  double max_perturb_fraction = 0.4;
};

struct ToySuite {
  std::vector<LabeledText> train;
  ToyVictimModel victim;
  ToyMaskedLM mlm;
  SynonymTable synonyms;
  std::vector<LabeledPair> pairs;  // synonym and char pairs interleaved
  std::size_t attempted = 0;
};

// Trains the toy victim and masked LM on a synthetic corpus and attacks fresh
// sentences until `pairs_per_attack` successes of each kind are collected.
ToySuite build_toy_suite(const ToySuiteOptions& options);

// ---- Files -----------------------------------------------------------------

std::vector<LabeledText> read_corpus_jsonl(const std::string& path);
void write_corpus_jsonl(const std::string& path, std::span<const LabeledText> corpus);
std::vector<LabeledPair> read_pairs_jsonl(const std::string& path);
void write_pairs_jsonl(const std::string& path, std::span<const LabeledPair> pairs);

nlohmann::json synonyms_to_json(const SynonymTable& table);
SynonymTable synonyms_from_json(const nlohmann::json& j);

nlohmann::json detector_config_to_json(const DetectorConfig& config);
DetectorConfig detector_config_from_json(const nlohmann::json& j);

nlohmann::json eval_report_to_json(const EvalReport& report);
nlohmann::json analysis_report_to_json(const AnalysisReport& report);

// Fixed-width histogram of scores in [0, 1].
nlohmann::json score_histogram(std::span<const double> scores, std::span<const int> labels,
                               std::size_t bins = 10);

std::string scores_csv(std::span<const double> scores, std::span<const int> labels);
std::string analysis_csv(const AnalysisReport& report);

// Stable 64-bit FNV-1a, used for seeding and file fingerprints.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace mlmd
