#include "mlmd/backends.hpp"

#include <algorithm>

namespace mlmd {

std::vector<FillCandidate> RestoringMaskedLM::fill(std::span<const std::string> rendered,
                                                   std::size_t masked_position,
                                                   std::size_t k) const {
  for (const auto& src : sources_) {
    const auto& words = src.words();
    if (words.size() != rendered.size() || masked_position < 1 || masked_position > words.size()) {
      continue;
    }
    bool match = true;
    for (std::size_t i = 0; i < words.size() && match; ++i) {
      if (i + 1 != masked_position && words[i] != rendered[i]) match = false;
    }
    if (match) return std::vector<FillCandidate>(k, FillCandidate{words[masked_position - 1], 0.0});
  }
  return {};
}

std::vector<FillCandidate> FixedMaskedLM::fill(std::span<const std::string>, std::size_t,
                                               std::size_t k) const {
  return {candidates_.begin(),
          candidates_.begin() + static_cast<std::ptrdiff_t>(std::min(k, candidates_.size()))};
}

std::vector<ConfidenceVector> CountingVictim::classify(std::span<const TokenizedText> texts) const {
  ++classify_calls_;
  texts_classified_ += texts.size();
  return inner_.classify(texts);
}

WordGradients CountingVictim::word_gradients(const TokenizedText& x, ClassLabel target) const {
  const auto* capable = dynamic_cast<const GradientCapableVictim*>(&inner_);
  if (capable == nullptr) {
    throw Error(ErrorCode::kGradientUnavailable, "wrapped victim does not expose gradients");
  }
  ++gradient_calls_;
  return capable->word_gradients(x, target);
}

void CountingVictim::reset() {
  classify_calls_ = 0;
  texts_classified_ = 0;
  gradient_calls_ = 0;
}

std::vector<FillCandidate> CountingMaskedLM::fill(std::span<const std::string> rendered,
                                                  std::size_t masked_position,
                                                  std::size_t k) const {
  ++fill_calls_;
  auto out = inner_.fill(rendered, masked_position, k);
  candidates_returned_ += out.size();
  return out;
}

void CountingMaskedLM::reset() {
  fill_calls_ = 0;
  candidates_returned_ = 0;
}

}  // namespace mlmd
