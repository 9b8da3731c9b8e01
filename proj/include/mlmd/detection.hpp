#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlmd/core.hpp"
#include "mlmd/masking.hpp"
#include "mlmd/reconstruction.hpp"

namespace mlmd {

// Fraction of reconstructed candidates whose victim prediction disagrees with
// the prediction on the original input. Kept as an exact ratio flips /
// denominator; value() is the only floating-point view.
struct DistinguishableScore {
  std::size_t flips = 0;
  std::size_t terms = 0;        // candidate slots: masked positions x k
  std::size_t denominator = 1;  // n x k, or terms when renormalized

  double value() const { return static_cast<double>(flips) / static_cast<double>(denominator); }
  bool operator==(const DistinguishableScore&) const = default;
};

struct DetectorConfig {
  double rate = 1.0;
  std::size_t k = 3;
  MaskingStrategy strategy = MaskingStrategy::kOneByOne;
  std::optional<double> tau;
  std::size_t gamma = 1;
  std::string mask_token = std::string(kDefaultMaskToken);
  std::size_t feature_dims = 384;
  // Divide by (masked positions x k) instead of n x k.
  bool renormalize = false;

  static DetectorConfig mlmd() { return {}; }
  static DetectorConfig grad_mlmd() {
    DetectorConfig c;
    c.rate = 0.3;
    c.strategy = MaskingStrategy::kGradientGuided;
    return c;
  }

  void validate() const;
  bool operator==(const DetectorConfig&) const = default;
};

// Victim predictions for an input and every candidate in its reconstruction
// set, aligned with ReconstructionSet::candidates.
struct ScoredReconstruction {
  Prediction reference;
  std::vector<Prediction> candidates;
};

ScoredReconstruction evaluate_candidates(const ReconstructionSet& recon,
                                         const VictimModel& victim,
                                         const Prediction& reference);
ScoredReconstruction evaluate_candidates(const ReconstructionSet& recon,
                                         const VictimModel& victim);

DistinguishableScore score_from(const ReconstructionSet& recon, const ScoredReconstruction& scored,
                                bool renormalize = false);

// Throws kMismatchedReconstruction when recon was not built from x.
DistinguishableScore distinguishable_score(const TokenizedText& x, const ReconstructionSet& recon,
                                           const VictimModel& victim, bool renormalize = false);

// Disagreement count per masked variant, in plan order.
std::vector<std::size_t> flips_per_group(const ReconstructionSet& recon,
                                         const ScoredReconstruction& scored);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  double accuracy() const;
  // 0 when undefined (no predicted and no actual positives).
  double f1() const;
  bool f1_defined() const { return tp + fp + fn > 0; }
};

// Decision rule: adversarial (1) iff score > tau.
Confusion confusion_at(std::span<const double> scores, std::span<const int> labels, double tau);

struct CalibrationResult {
  double tau = 0.0;
  double f1 = 0.0;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

// Picks tau maximizing F1 for the adversarial class. Candidates are the
// midpoints between consecutive distinct scores plus 0 and 1; an endpoint is
// dropped when a midpoint yields the same decisions on the data. Ties go to
// the smallest tau.
CalibrationResult calibrate_threshold(std::span<const double> scores, std::span<const int> labels);

struct FeatureVector {
  std::vector<double> values;
  bool sorted = false;
  std::optional<int> label;
};

// Confidence margins f(u)_{y*} - max_{y != y*} f(u)_y, ordered by
// (variant, rank), padded with ones or truncated to `dims`. Missing candidates
// of short groups are filled with ones to keep slot indices stable.
FeatureVector feature_from(const ReconstructionSet& recon, const ScoredReconstruction& scored,
                           std::size_t dims);
FeatureVector feature_vector(const TokenizedText& x, const ReconstructionSet& recon,
                             const VictimModel& victim, const DetectorConfig& config);

FeatureVector sort_features(FeatureVector fv);

class BinaryFeatureClassifier {
 public:
  virtual ~BinaryFeatureClassifier() = default;
  virtual void fit(std::span<const FeatureVector> dataset, std::uint64_t seed) = 0;
  virtual double predict_prob(const FeatureVector& fv) const = 0;
};

// L2-regularized logistic regression fit by full-batch gradient descent.
class LogisticRegression : public BinaryFeatureClassifier {
 public:
  struct Options {
    std::size_t epochs = 500;
    double learning_rate = 0.5;
    double l2 = 1e-4;
  };

  LogisticRegression() = default;
  explicit LogisticRegression(Options options) : options_(options) {}

  void fit(std::span<const FeatureVector> dataset, std::uint64_t seed) override;
  double predict_prob(const FeatureVector& fv) const override;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  Options options_;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

// Validates the dataset (both labels, uniform dims) and fits `classifier`.
void train_feature_classifier(std::span<const FeatureVector> dataset,
                              BinaryFeatureClassifier& classifier, std::uint64_t seed);

struct DetectionTrace {
  MaskingStrategy effective_strategy = MaskingStrategy::kOneByOne;
  std::optional<std::vector<double>> importance;
  ReconstructionSet recon;
  ScoredReconstruction scored;
  DistinguishableScore score;
  std::vector<std::string> warnings;
};

// Importance (gradient-guided only), masking, reconstruction and scoring.
// Falls back to one-by-one masking when gradients are unavailable or all
// importance scores are zero.
DetectionTrace run_detection(const TokenizedText& x, const DetectorConfig& config,
                             const VictimModel& victim, const MaskedLanguageModel& mlm);

struct Verdict {
  int decision = 0;  // 1 = adversarial
  DistinguishableScore score;
  DetectorConfig config;
  MaskingStrategy effective_strategy = MaskingStrategy::kOneByOne;
  std::vector<std::string> warnings;
};

// Throws kUncalibratedDetector when config.tau is absent.
Verdict detect(const TokenizedText& x, const DetectorConfig& config, const VictimModel& victim,
               const MaskedLanguageModel& mlm);

}  // namespace mlmd
