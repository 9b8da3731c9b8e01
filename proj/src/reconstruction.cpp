#include "mlmd/reconstruction.hpp"

#include <algorithm>
#include <future>

namespace mlmd {

std::vector<ReconstructionCandidate> fill_mask(const MaskedLanguageModel& mlm,
                                               const TokenizedText& source,
                                               const MaskedVariant& variant, std::size_t k,
                                               std::size_t group) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  if (variant.rendered.size() != source.size() || variant.masked_position < 1 ||
      variant.masked_position > source.size()) {
    throw Error(ErrorCode::kInvalidArgument, "masked variant does not match its source");
  }
  auto filled = mlm.fill(variant.rendered, variant.masked_position, k);
  if (filled.empty()) {
    throw Error(ErrorCode::kShortBeam,
                "backend returned no candidates for position " +
                    std::to_string(variant.masked_position));
  }
  if (filled.size() > k) {
    throw Error(ErrorCode::kBackendFailure, "backend returned more than k candidates");
  }
  std::vector<ReconstructionCandidate> out;
  out.reserve(filled.size());
  for (std::size_t j = 0; j < filled.size(); ++j) {
    if (j > 0 && filled[j].score > filled[j - 1].score) {
      throw Error(ErrorCode::kBackendFailure, "candidate scores are not non-increasing");
    }
    if (!is_single_word(filled[j].word)) {
      throw Error(ErrorCode::kBackendFailure, "candidate is not a whole word: '" + filled[j].word + "'");
    }
    ReconstructionCandidate c;
    c.group = group;
    c.rank = j + 1;
    c.position = variant.masked_position;
    c.text = source.with_word(variant.masked_position, filled[j].word);
    c.mlm_score = filled[j].score;
    out.push_back(std::move(c));
  }
  return out;
}

ReconstructionSet reconstruct_all(const MaskedLanguageModel& mlm, const MaskingPlan& plan,
                                  std::size_t k) {
  if (plan.variants.empty()) throw Error(ErrorCode::kEmptySelection, "masking plan is empty");
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");

  const std::size_t count = plan.variants.size();
  std::vector<std::vector<ReconstructionCandidate>> groups(count);
  auto run = [&](std::size_t g) {
    try {
      groups[g] = fill_mask(mlm, plan.source, plan.variants[g], k, g + 1);
    } catch (const Error& e) {
      throw Error(e.code(), "variant " + std::to_string(g + 1) + " (position " +
                                std::to_string(plan.variants[g].masked_position) +
                                "): " + e.what());
    }
  };

  const std::size_t width = std::max<std::size_t>(1, mlm.max_in_flight());
  if (width == 1) {
    for (std::size_t g = 0; g < count; ++g) run(g);
  } else {
    for (std::size_t start = 0; start < count; start += width) {
      std::vector<std::future<void>> wave;
      for (std::size_t g = start; g < std::min(count, start + width); ++g) {
        wave.push_back(std::async(std::launch::async, run, g));
      }
      for (auto& f : wave) f.get();
    }
  }

  ReconstructionSet set;
  set.plan = plan;
  set.k = k;
  for (std::size_t g = 0; g < count; ++g) {
    if (groups[g].size() < k) set.short_groups.push_back(g + 1);
    for (auto& c : groups[g]) set.candidates.push_back(std::move(c));
  }
  return set;
}

}  // namespace mlmd
