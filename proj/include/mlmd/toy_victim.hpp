#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlmd/core.hpp"
#include "mlmd/importance.hpp"

#include <json.hpp>

namespace mlmd {

struct LabeledText {
  TokenizedText text;
  ClassLabel label;
};

// Bag-of-words classifier with closed-form gradients:
//
//   h = (1/n) * sum_t phi(E[w_t]),  phi(e) = e (*) e  (elementwise square)
//   probs = softmax(W h + b)
//
// Row 0 of E is the UNK embedding shared by every out-of-vocabulary word.
// It keeps its initialization unless unk_dropout is positive.
// The per-token square makes the gradient at e_t proportional to e_t, so
// words the head ignores get small importance.
class ToyVictimModel : public GradientCapableVictim {
 public:
  struct Parameters {
    std::size_t dim = 0;
    std::size_t classes = 0;
    std::vector<std::vector<double>> embeddings;  // (|V|+1) x dim, row 0 = UNK
    std::vector<std::vector<double>> head;        // classes x dim
    std::vector<double> bias;                     // classes
  };

  ToyVictimModel(std::unordered_map<std::string, std::size_t> vocab, Parameters params);

  std::vector<ConfidenceVector> classify(std::span<const TokenizedText> texts) const override;
  std::size_t class_count() const override { return params_.classes; }
  WordGradients word_gradients(const TokenizedText& x, ClassLabel target) const override;

  // Row of E used for `word` (0 for UNK).
  std::size_t row_of(const std::string& word) const;
  bool in_vocabulary(const std::string& word) const { return vocab_.contains(word); }

  std::vector<double> pooled(std::span<const std::string> words) const;
  std::vector<double> logits(std::span<const std::string> words) const;
  std::vector<double> probabilities(std::span<const std::string> words) const;
  double loss(std::span<const std::string> words, ClassLabel target) const;

  // d loss / d e_t for each position, through the square and the mean.
  std::vector<std::vector<double>> embedding_gradients(std::span<const std::string> words,
                                                       ClassLabel target) const;

  const Parameters& parameters() const { return params_; }
  Parameters& mutable_parameters() { return params_; }
  const std::unordered_map<std::string, std::size_t>& vocabulary() const { return vocab_; }

  nlohmann::json to_json() const;
  static ToyVictimModel from_json(const nlohmann::json& j);

 private:
  std::unordered_map<std::string, std::size_t> vocab_;
  Parameters params_;
};

struct ToyVictimOptions {
  std::size_t dim = 8;
  std::size_t epochs = 30;
  double learning_rate = 0.5;
  double l2 = 1e-3;
  double init_scale = 0.5;
  std::uint64_t seed = 7;
  // Probability of replacing a training token with UNK.
  double unk_dropout = 0.0;
};

// Seeded initialization followed by per-example gradient descent on
// cross-entropy. Throws kSingleClassCorpus when fewer than two labels occur.
ToyVictimModel toy_victim_train(std::span<const LabeledText> corpus, const ToyVictimOptions& options);

}  // namespace mlmd
