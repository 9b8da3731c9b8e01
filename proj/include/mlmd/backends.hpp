#pragma once

#include <atomic>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mlmd/core.hpp"
#include "mlmd/importance.hpp"
#include "mlmd/reconstruction.hpp"

namespace mlmd {

// Masked LM that always puts the original word back. Every rank returns the
// source word, so each candidate text equals the source exactly.
class RestoringMaskedLM : public MaskedLanguageModel {
 public:
  explicit RestoringMaskedLM(std::vector<TokenizedText> sources) : sources_(std::move(sources)) {}

  std::vector<FillCandidate> fill(std::span<const std::string> rendered,
                                  std::size_t masked_position, std::size_t k) const override;

 private:
  std::vector<TokenizedText> sources_;
};

// Returns a fixed candidate list regardless of context, truncated to k.
class FixedMaskedLM : public MaskedLanguageModel {
 public:
  explicit FixedMaskedLM(std::vector<FillCandidate> candidates) : candidates_(std::move(candidates)) {}

  std::vector<FillCandidate> fill(std::span<const std::string> rendered,
                                  std::size_t masked_position, std::size_t k) const override;

 private:
  std::vector<FillCandidate> candidates_;
};

// Call counters around a victim. Gradient requests are forwarded when the
// wrapped victim supports them.
class CountingVictim : public GradientCapableVictim {
 public:
  explicit CountingVictim(const VictimModel& inner) : inner_(inner) {}

  std::vector<ConfidenceVector> classify(std::span<const TokenizedText> texts) const override;
  std::size_t class_count() const override { return inner_.class_count(); }
  bool thread_safe() const override { return inner_.thread_safe(); }
  WordGradients word_gradients(const TokenizedText& x, ClassLabel target) const override;

  std::size_t classify_calls() const { return classify_calls_; }
  std::size_t texts_classified() const { return texts_classified_; }
  std::size_t gradient_calls() const { return gradient_calls_; }
  void reset();

 private:
  const VictimModel& inner_;
  mutable std::atomic<std::size_t> classify_calls_{0};
  mutable std::atomic<std::size_t> texts_classified_{0};
  mutable std::atomic<std::size_t> gradient_calls_{0};
};

class CountingMaskedLM : public MaskedLanguageModel {
 public:
  explicit CountingMaskedLM(const MaskedLanguageModel& inner) : inner_(inner) {}

  std::vector<FillCandidate> fill(std::span<const std::string> rendered,
                                  std::size_t masked_position, std::size_t k) const override;
  std::size_t max_in_flight() const override { return inner_.max_in_flight(); }

  std::size_t fill_calls() const { return fill_calls_; }
  std::size_t candidates_returned() const { return candidates_returned_; }
  void reset();

 private:
  const MaskedLanguageModel& inner_;
  mutable std::atomic<std::size_t> fill_calls_{0};
  mutable std::atomic<std::size_t> candidates_returned_{0};
};

}  // namespace mlmd
