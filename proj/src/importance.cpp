#include "mlmd/importance.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mlmd {

bool ImportanceProfile::all_zero() const {
  return std::all_of(scores.begin(), scores.end(), [](double s) { return s == 0.0; });
}

ImportanceProfile importance_scores(const VictimModel& victim, const TokenizedText& x) {
  return importance_scores(victim, x, predict(victim, x).label);
}

ImportanceProfile importance_scores(const VictimModel& victim, const TokenizedText& x,
                                    ClassLabel target) {
  const auto* capable = dynamic_cast<const GradientCapableVictim*>(&victim);
  if (capable == nullptr) {
    throw Error(ErrorCode::kGradientUnavailable, "victim does not expose gradients");
  }
  WordGradients grads = capable->word_gradients(x, target);
  if (grads.norms.empty() && !grads.vectors.empty()) {
    for (const auto& v : grads.vectors) {
      double sq = 0.0;
      for (double g : v) sq += g * g;
      grads.norms.push_back(std::sqrt(sq));
    }
  }
  if (grads.norms.size() != x.size()) {
    throw Error(ErrorCode::kBackendFailure,
                "gradient backend returned " + std::to_string(grads.norms.size()) +
                    " norms for " + std::to_string(x.size()) + " words");
  }
  for (double s : grads.norms) {
    if (!std::isfinite(s) || s < 0.0) {
      throw Error(ErrorCode::kBackendFailure, "gradient norm is negative or not finite");
    }
  }
  return {std::move(grads.norms), target, grads.loss};
}

OracleSets oracle_from_flips(std::span<const std::size_t> flip_counts, std::size_t gamma) {
  OracleSets sets;
  sets.gamma = gamma;
  sets.flip_counts.assign(flip_counts.begin(), flip_counts.end());
  for (std::size_t p = 0; p < flip_counts.size(); ++p) {
    if (flip_counts[p] <= gamma) sets.non_keywords.push_back(p + 1);
  }
  return sets;
}

namespace {

std::vector<std::size_t> position_flips(const ReconstructionSet& recon,
                                        const ScoredReconstruction& scored) {
  const auto groups = flips_per_group(recon, scored);
  std::vector<std::size_t> by_position(recon.plan.source.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    by_position[recon.plan.variants[g].masked_position - 1] = groups[g];
  }
  return by_position;
}

void require_full_plan(const ReconstructionSet& recon) {
  if (recon.plan.variants.size() != recon.plan.source.size()) {
    throw Error(ErrorCode::kRequiresFullPlan,
                "oracle analysis needs every position masked (rate 1)");
  }
}

}  // namespace

OracleSets oracle_nonkeywords(const TokenizedText& x, const ReconstructionSet& recon,
                              const VictimModel& victim, std::size_t gamma) {
  if (!(recon.plan.source == x)) {
    throw Error(ErrorCode::kMismatchedReconstruction, "reconstruction was built from another text");
  }
  require_full_plan(recon);
  if (gamma > recon.k) throw Error(ErrorCode::kInvalidArgument, "gamma must lie in [0, k]");
  const auto scored = evaluate_candidates(recon, victim);
  return oracle_from_flips(position_flips(recon, scored), gamma);
}

FlipProfile flip_profile(const TokenizedText& x, const VictimModel& victim,
                         const MaskedLanguageModel& mlm, std::size_t k,
                         std::string_view mask_token) {
  const auto recon = reconstruct_all(mlm, mask_one_by_one(x, mask_token), k);
  const auto scored = evaluate_candidates(recon, victim);
  return {x.size(), k, position_flips(recon, scored)};
}

namespace {

double mean_proportion(std::span<const FlipProfile> profiles, std::size_t gamma) {
  double total = 0.0;
  for (const auto& p : profiles) {
    const auto count = std::count_if(p.flip_counts.begin(), p.flip_counts.end(),
                                     [&](std::size_t f) { return f <= gamma; });
    total += static_cast<double>(count) / static_cast<double>(p.n);
  }
  return total / static_cast<double>(profiles.size());
}

}  // namespace

PopulationRates proportion_from_profiles(std::span<const FlipProfile> normals,
                                         std::span<const FlipProfile> adversarials,
                                         std::size_t gamma) {
  if (normals.empty() || adversarials.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "proportion needs at least one pair");
  }
  if (normals.size() != adversarials.size()) {
    throw Error(ErrorCode::kLengthMismatch, "normal and adversarial sets must be paired");
  }
  return {mean_proportion(normals, gamma), mean_proportion(adversarials, gamma)};
}

PopulationRates nonkeyword_proportion(std::span<const LabeledPair> pairs, std::size_t gamma,
                                      const VictimModel& victim, const MaskedLanguageModel& mlm,
                                      std::size_t k) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "no pairs");
  if (gamma > k) throw Error(ErrorCode::kInvalidArgument, "gamma must lie in [0, k]");
  std::vector<FlipProfile> normals, adversarials;
  for (const auto& pair : pairs) {
    normals.push_back(flip_profile(pair.normal, victim, mlm, k));
    adversarials.push_back(flip_profile(pair.adversarial, victim, mlm, k));
  }
  return proportion_from_profiles(normals, adversarials, gamma);
}

namespace {

double mean_overlap(std::span<const std::vector<std::size_t>> oracle,
                    std::span<const std::vector<std::size_t>> grad) {
  if (oracle.size() != grad.size()) {
    throw Error(ErrorCode::kLengthMismatch, "oracle and gradient sets are not aligned");
  }
  if (oracle.empty()) throw Error(ErrorCode::kEmptyDataset, "no examples");
  double total = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    if (grad[i].empty()) {
      throw Error(ErrorCode::kEmptyGradientSet,
                  "gradient non-keyword set of example " + std::to_string(i + 1) + " is empty");
    }
    const std::set<std::size_t> o(oracle[i].begin(), oracle[i].end());
    const auto hits = std::count_if(grad[i].begin(), grad[i].end(),
                                    [&](std::size_t p) { return o.contains(p); });
    total += static_cast<double>(hits) / static_cast<double>(grad[i].size());
  }
  return total / static_cast<double>(oracle.size());
}

}  // namespace

PopulationRates overlap_rate(std::span<const std::vector<std::size_t>> oracle_normal,
                             std::span<const std::vector<std::size_t>> grad_normal,
                             std::span<const std::vector<std::size_t>> oracle_adversarial,
                             std::span<const std::vector<std::size_t>> grad_adversarial) {
  if (oracle_normal.size() != oracle_adversarial.size()) {
    throw Error(ErrorCode::kLengthMismatch, "normal and adversarial sets must be paired");
  }
  return {mean_overlap(oracle_normal, grad_normal),
          mean_overlap(oracle_adversarial, grad_adversarial)};
}

DistinguishableScore oracle_filtered_score(const FlipProfile& profile, std::size_t gamma,
                                           bool renormalize) {
  DistinguishableScore s;
  std::size_t kept = 0;
  for (std::size_t f : profile.flip_counts) {
    if (f > gamma) {
      s.flips += f;
      ++kept;
    }
  }
  s.terms = kept * profile.k;
  s.denominator = renormalize ? std::max<std::size_t>(s.terms, 1) : profile.n * profile.k;
  return s;
}

AnalysisReport analyze_oracle(std::span<const LabeledPair> pairs, const VictimModel& victim,
                              const MaskedLanguageModel& mlm, const AnalysisOptions& options) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "no pairs");
  validate_rate(options.rate);
  if (options.overlap_gamma > options.k) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must lie in [0, k]");
  }
  std::vector<std::size_t> gammas = options.gammas;
  if (gammas.empty()) {
    for (std::size_t g = 0; g <= options.k; ++g) gammas.push_back(g);
  }

  std::vector<FlipProfile> normals, adversarials;
  std::vector<std::vector<std::size_t>> grad_normal, grad_adversarial;
  for (const auto& pair : pairs) {
    normals.push_back(flip_profile(pair.normal, victim, mlm, options.k, options.mask_token));
    adversarials.push_back(flip_profile(pair.adversarial, victim, mlm, options.k, options.mask_token));
    auto imp_n = importance_scores(victim, pair.normal);
    auto imp_a = importance_scores(victim, pair.adversarial);
    grad_normal.push_back(select_keywords(pair.normal, imp_n.scores, options.rate).non_keywords);
    grad_adversarial.push_back(
        select_keywords(pair.adversarial, imp_a.scores, options.rate).non_keywords);
  }

  AnalysisReport report;
  report.k = options.k;
  report.rate = options.rate;
  report.overlap_gamma = options.overlap_gamma;
  report.pair_count = pairs.size();
  for (std::size_t gamma : gammas) {
    if (gamma > options.k) throw Error(ErrorCode::kInvalidArgument, "gamma must lie in [0, k]");
    GammaSlice slice;
    slice.gamma = gamma;
    slice.proportion = proportion_from_profiles(normals, adversarials, gamma);
    for (const auto& p : normals) {
      slice.normal_scores.push_back(oracle_filtered_score(p, gamma).value());
      slice.normal_scores_renormalized.push_back(oracle_filtered_score(p, gamma, true).value());
    }
    for (const auto& p : adversarials) {
      slice.adversarial_scores.push_back(oracle_filtered_score(p, gamma).value());
      slice.adversarial_scores_renormalized.push_back(oracle_filtered_score(p, gamma, true).value());
    }
    report.slices.push_back(std::move(slice));
  }

  std::vector<std::vector<std::size_t>> oracle_normal, oracle_adversarial;
  for (const auto& p : normals) {
    oracle_normal.push_back(oracle_from_flips(p.flip_counts, options.overlap_gamma).non_keywords);
  }
  for (const auto& p : adversarials) {
    oracle_adversarial.push_back(oracle_from_flips(p.flip_counts, options.overlap_gamma).non_keywords);
  }
  report.overlap = overlap_rate(oracle_normal, grad_normal, oracle_adversarial, grad_adversarial);
  return report;
}

}  // namespace mlmd
