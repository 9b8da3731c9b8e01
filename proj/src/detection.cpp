#include "mlmd/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mlmd/importance.hpp"

namespace mlmd {

void DetectorConfig::validate() const {
  validate_rate(rate);
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  if (tau && !(*tau >= 0.0 && *tau <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tau must lie in [0, 1]");
  }
  if (gamma > k) throw Error(ErrorCode::kInvalidArgument, "gamma must lie in [0, k]");
  if (!is_single_word(mask_token)) {
    throw Error(ErrorCode::kInvalidArgument, "mask token must be a single word");
  }
  if (feature_dims < 1) throw Error(ErrorCode::kInvalidArgument, "feature_dims must be positive");
}

ScoredReconstruction evaluate_candidates(const ReconstructionSet& recon,
                                         const VictimModel& victim,
                                         const Prediction& reference) {
  std::vector<TokenizedText> texts;
  texts.reserve(recon.candidates.size());
  for (const auto& c : recon.candidates) texts.push_back(c.text);
  return {reference, predict_batch(victim, texts)};
}

ScoredReconstruction evaluate_candidates(const ReconstructionSet& recon,
                                         const VictimModel& victim) {
  return evaluate_candidates(recon, victim, predict(victim, recon.plan.source));
}

DistinguishableScore score_from(const ReconstructionSet& recon, const ScoredReconstruction& scored,
                                bool renormalize) {
  if (scored.candidates.size() != recon.candidates.size()) {
    throw Error(ErrorCode::kMismatchedReconstruction, "predictions not aligned with candidates");
  }
  DistinguishableScore s;
  for (const auto& p : scored.candidates) {
    if (p.label != scored.reference.label) ++s.flips;
  }
  s.terms = recon.mask_count() * recon.k;
  s.denominator = renormalize ? s.terms : recon.plan.source.size() * recon.k;
  return s;
}

DistinguishableScore distinguishable_score(const TokenizedText& x, const ReconstructionSet& recon,
                                           const VictimModel& victim, bool renormalize) {
  if (!(recon.plan.source == x)) {
    throw Error(ErrorCode::kMismatchedReconstruction, "reconstruction was built from another text");
  }
  return score_from(recon, evaluate_candidates(recon, victim), renormalize);
}

std::vector<std::size_t> flips_per_group(const ReconstructionSet& recon,
                                         const ScoredReconstruction& scored) {
  std::vector<std::size_t> out(recon.mask_count(), 0);
  for (std::size_t i = 0; i < recon.candidates.size(); ++i) {
    if (scored.candidates.at(i).label != scored.reference.label) {
      ++out.at(recon.candidates[i].group - 1);
    }
  }
  return out;
}

double Confusion::accuracy() const {
  const std::size_t total = tp + fp + tn + fn;
  return total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
}

double Confusion::f1() const {
  if (!f1_defined()) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels, double tau) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "scores and labels differ in length");
  }
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > tau;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

CalibrationResult calibrate_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "scores and labels differ in length");
  }
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const auto negatives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 0));
  if (positives + negatives != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  }
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kInvalidArgument, "calibration needs both normal and adversarial scores");
  }

  // Distinct values with the positive/negative tallies at each.
  struct Level {
    double value;
    std::size_t pos = 0, neg = 0;
  };
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<Level> levels;
  for (std::size_t i : order) {
    if (levels.empty() || levels.back().value != scores[i]) levels.push_back({scores[i]});
    (labels[i] == 1 ? levels.back().pos : levels.back().neg)++;
  }

  CalibrationResult result;
  if (levels.size() == 1) {
    result.tau = levels.front().value;
    result.degenerate = true;
    result.f1 = confusion_at(scores, labels, result.tau).f1();
    result.warnings.push_back("DegenerateCalibration: all scores equal " + std::to_string(result.tau));
    return result;
  }

  // A threshold t splits levels into "<= t" (normal) and "> t" (adversarial).
  // `below` counts levels on the normal side; suffix sums give the positive
  // and negative counts above it.
  std::vector<std::size_t> pos_above(levels.size() + 1, 0), neg_above(levels.size() + 1, 0);
  for (std::size_t l = levels.size(); l-- > 0;) {
    pos_above[l] = pos_above[l + 1] + levels[l].pos;
    neg_above[l] = neg_above[l + 1] + levels[l].neg;
  }
  auto f1_for_split = [&](std::size_t below) {
    const std::size_t tp = pos_above[below];
    const std::size_t fp = neg_above[below];
    const std::size_t fn = positives - tp;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  };

  struct Candidate {
    double tau;
    std::size_t below;
  };
  std::vector<Candidate> candidates;
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
    candidates.push_back({0.5 * (levels[l].value + levels[l + 1].value), l + 1});
  }
  auto split_of = [&](double t) {
    std::size_t below = 0;
    while (below < levels.size() && levels[below].value <= t) ++below;
    return below;
  };
  for (double endpoint : {0.0, 1.0}) {
    const std::size_t below = split_of(endpoint);
    const bool duplicate = std::any_of(candidates.begin(), candidates.end(),
                                       [&](const Candidate& c) { return c.below == below; });
    if (!duplicate) candidates.push_back({endpoint, below});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.tau < b.tau; });

  double best_f1 = -1.0;
  for (const auto& c : candidates) {
    const double f1 = f1_for_split(c.below);
    if (f1 > best_f1) {
      best_f1 = f1;
      result.tau = c.tau;
    }
  }
  result.f1 = best_f1;
  return result;
}

FeatureVector feature_from(const ReconstructionSet& recon, const ScoredReconstruction& scored,
                           std::size_t dims) {
  if (scored.candidates.size() != recon.candidates.size()) {
    throw Error(ErrorCode::kMismatchedReconstruction, "predictions not aligned with candidates");
  }
  const std::size_t y_star = scored.reference.label.index();
  std::vector<double> slots(recon.mask_count() * recon.k, 1.0);
  for (std::size_t i = 0; i < recon.candidates.size(); ++i) {
    const auto& probs = scored.candidates[i].confidence.probs();
    double rival = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < probs.size(); ++y) {
      if (y != y_star) rival = std::max(rival, probs[y]);
    }
    const auto& c = recon.candidates[i];
    slots[(c.group - 1) * recon.k + (c.rank - 1)] = probs[y_star] - rival;
  }
  FeatureVector fv;
  fv.values = std::move(slots);
  fv.values.resize(dims, 1.0);
  return fv;
}

FeatureVector feature_vector(const TokenizedText& x, const ReconstructionSet& recon,
                             const VictimModel& victim, const DetectorConfig& config) {
  if (!(recon.plan.source == x)) {
    throw Error(ErrorCode::kMismatchedReconstruction, "reconstruction was built from another text");
  }
  return feature_from(recon, evaluate_candidates(recon, victim), config.feature_dims);
}

FeatureVector sort_features(FeatureVector fv) {
  std::sort(fv.values.begin(), fv.values.end());
  fv.sorted = true;
  return fv;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void LogisticRegression::fit(std::span<const FeatureVector> dataset, std::uint64_t seed) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no training examples");
  const std::size_t dims = dataset.front().values.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, 0.01);
  weights_.assign(dims, 0.0);
  for (double& w : weights_) w = init(rng);
  bias_ = 0.0;

  const double inv_m = 1.0 / static_cast<double>(dataset.size());
  std::vector<double> grad(dims);
  for (std::size_t epoch = 0; epoch < options_.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    for (const auto& fv : dataset) {
      const double err = predict_prob(fv) - static_cast<double>(fv.label.value_or(0));
      for (std::size_t d = 0; d < dims; ++d) grad[d] += err * fv.values[d];
      grad_bias += err;
    }
    for (std::size_t d = 0; d < dims; ++d) {
      weights_[d] -= options_.learning_rate * (grad[d] * inv_m + options_.l2 * weights_[d]);
    }
    bias_ -= options_.learning_rate * grad_bias * inv_m;
  }
}

double LogisticRegression::predict_prob(const FeatureVector& fv) const {
  if (fv.values.size() != weights_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature length does not match the fitted model");
  }
  double z = bias_;
  for (std::size_t d = 0; d < weights_.size(); ++d) z += weights_[d] * fv.values[d];
  return sigmoid(z);
}

void train_feature_classifier(std::span<const FeatureVector> dataset,
                              BinaryFeatureClassifier& classifier, std::uint64_t seed) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no training examples");
  bool has_normal = false, has_adversarial = false;
  const std::size_t dims = dataset.front().values.size();
  for (const auto& fv : dataset) {
    if (fv.values.size() != dims) {
      throw Error(ErrorCode::kDimensionMismatch, "feature vectors differ in length");
    }
    if (!fv.label || (*fv.label != 0 && *fv.label != 1)) {
      throw Error(ErrorCode::kInvalidArgument, "every training vector needs a 0/1 label");
    }
    (*fv.label == 1 ? has_adversarial : has_normal) = true;
  }
  if (!has_normal || !has_adversarial) {
    throw Error(ErrorCode::kSingleClassCorpus, "training data needs both labels");
  }
  classifier.fit(dataset, seed);
}

DetectionTrace run_detection(const TokenizedText& x, const DetectorConfig& config,
                             const VictimModel& victim, const MaskedLanguageModel& mlm) {
  config.validate();
  std::vector<std::string> warnings;
  std::optional<std::vector<double>> importance;
  const Prediction reference = predict(victim, x);

  MaskingPlan plan;
  switch (config.strategy) {
    case MaskingStrategy::kOneByOne:
      if (config.rate != 1.0) {
        throw Error(ErrorCode::kInvalidArgument, "one-by-one masking requires rate 1");
      }
      plan = mask_one_by_one(x, config.mask_token);
      break;
    case MaskingStrategy::kGradientGuided: {
      std::optional<ImportanceProfile> profile;
      try {
        profile = importance_scores(victim, x, reference.label);
        importance = profile->scores;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kGradientUnavailable) throw;
        warnings.push_back(std::string("gradients unavailable, using one-by-one masking: ") + e.what());
      }
      if (profile && profile->all_zero()) {
        warnings.push_back("all importance scores are zero, using one-by-one masking");
        profile.reset();
      }
      plan = profile ? mask_selected(x, select_keywords(x, profile->scores, config.rate),
                                     config.rate, config.mask_token)
                     : mask_one_by_one(x, config.mask_token);
      break;
    }
    case MaskingStrategy::kOracleFiltered:
      throw Error(ErrorCode::kInvalidArgument,
                  "oracle-filtered masking needs posterior flip counts; use analyze_oracle");
  }
  const MaskingStrategy effective = plan.strategy;
  auto recon = reconstruct_all(mlm, plan, config.k);
  if (!recon.short_groups.empty()) {
    warnings.push_back(std::to_string(recon.short_groups.size()) +
                       " masked positions returned fewer than k candidates");
  }
  auto scored = evaluate_candidates(recon, victim, reference);
  const auto score = score_from(recon, scored, config.renormalize);
  return DetectionTrace{effective,         std::move(importance), std::move(recon),
                        std::move(scored), score,                 std::move(warnings)};
}

Verdict detect(const TokenizedText& x, const DetectorConfig& config, const VictimModel& victim,
               const MaskedLanguageModel& mlm) {
  if (!config.tau) throw Error(ErrorCode::kUncalibratedDetector, "detector has no threshold");
  auto trace = run_detection(x, config, victim, mlm);
  Verdict v;
  v.score = trace.score;
  v.decision = trace.score.value() > *config.tau ? 1 : 0;
  v.config = config;
  v.effective_strategy = trace.effective_strategy;
  v.warnings = std::move(trace.warnings);
  return v;
}

}  // namespace mlmd
