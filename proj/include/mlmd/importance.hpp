#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "mlmd/core.hpp"
#include "mlmd/detection.hpp"
#include "mlmd/reconstruction.hpp"

namespace mlmd {

struct WordGradients {
  double loss = 0.0;
  std::vector<double> norms;                 // one per word
  std::vector<std::vector<double>> vectors;  // empty when the backend reports norms only
};

// A victim that can backpropagate cross-entropy against `target` to each
// word's embedding in one backward pass.
class GradientCapableVictim : public VictimModel {
 public:
  virtual WordGradients word_gradients(const TokenizedText& x, ClassLabel target) const = 0;
};

struct ImportanceProfile {
  std::vector<double> scores;  // L2 norm of the loss gradient per word
  ClassLabel target;
  double loss = 0.0;

  bool all_zero() const;
};

// Loss is taken against the victim's own prediction z(x).
ImportanceProfile importance_scores(const VictimModel& victim, const TokenizedText& x);
ImportanceProfile importance_scores(const VictimModel& victim, const TokenizedText& x,
                                    ClassLabel target);

struct OracleSets {
  std::vector<std::size_t> non_keywords;  // positions with flip count <= gamma
  std::size_t gamma = 0;
  std::vector<std::size_t> flip_counts;   // per position, 1-based position p at [p-1]
};

OracleSets oracle_from_flips(std::span<const std::size_t> flip_counts, std::size_t gamma);

// Requires a full one-by-one reconstruction.
OracleSets oracle_nonkeywords(const TokenizedText& x, const ReconstructionSet& recon,
                              const VictimModel& victim, std::size_t gamma);

// Per-position flip counts of one text under one-by-one masking.
struct FlipProfile {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::size_t> flip_counts;
};

FlipProfile flip_profile(const TokenizedText& x, const VictimModel& victim,
                         const MaskedLanguageModel& mlm, std::size_t k,
                         std::string_view mask_token = kDefaultMaskToken);

struct PopulationRates {
  double normal = 0.0;
  double adversarial = 0.0;
  double min() const { return normal < adversarial ? normal : adversarial; }
};

PopulationRates proportion_from_profiles(std::span<const FlipProfile> normals,
                                         std::span<const FlipProfile> adversarials,
                                         std::size_t gamma);

PopulationRates nonkeyword_proportion(std::span<const LabeledPair> pairs, std::size_t gamma,
                                      const VictimModel& victim, const MaskedLanguageModel& mlm,
                                      std::size_t k = 3);

// Mean |O ∩ G| / |G| for each population. Throws kEmptyGradientSet when any
// G is empty.
PopulationRates overlap_rate(std::span<const std::vector<std::size_t>> oracle_normal,
                             std::span<const std::vector<std::size_t>> grad_normal,
                             std::span<const std::vector<std::size_t>> oracle_adversarial,
                             std::span<const std::vector<std::size_t>> grad_adversarial);

// Score left after removing oracle non-keywords; the numerator is the flip
// total over keyword positions.
DistinguishableScore oracle_filtered_score(const FlipProfile& profile, std::size_t gamma,
                                           bool renormalize = false);

struct GammaSlice {
  std::size_t gamma = 0;
  PopulationRates proportion;
  std::vector<double> normal_scores;
  std::vector<double> adversarial_scores;
  std::vector<double> normal_scores_renormalized;
  std::vector<double> adversarial_scores_renormalized;
};

struct AnalysisReport {
  std::size_t k = 0;
  double rate = 0.0;            // gradient-guided masking rate used for G
  std::size_t overlap_gamma = 1;
  std::vector<GammaSlice> slices;
  PopulationRates overlap;
  std::size_t pair_count = 0;
};

struct AnalysisOptions {
  std::size_t k = 3;
  double rate = 0.3;
  std::size_t overlap_gamma = 1;
  std::vector<std::size_t> gammas;  // empty: 0..k
  std::string mask_token = std::string(kDefaultMaskToken);
};

AnalysisReport analyze_oracle(std::span<const LabeledPair> pairs, const VictimModel& victim,
                              const MaskedLanguageModel& mlm, const AnalysisOptions& options);

}  // namespace mlmd
