#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mlmd/core.hpp"
#include "mlmd/masking.hpp"

namespace mlmd {

struct FillCandidate {
  std::string word;
  double score = 0.0;

  bool operator==(const FillCandidate&) const = default;
};

// Masked-language-model backend (the unmask model). `fill` receives the
// rendered word list with the mask token at `masked_position` (1-based) and
// returns up to k whole-word candidates, highest score first.
class MaskedLanguageModel {
 public:
  virtual ~MaskedLanguageModel() = default;

  virtual std::vector<FillCandidate> fill(std::span<const std::string> rendered,
                                          std::size_t masked_position, std::size_t k) const = 0;

  // Upper bound on concurrent fill calls; 1 means serial.
  virtual std::size_t max_in_flight() const { return 1; }
};

struct ReconstructionCandidate {
  std::size_t group = 0;  // 1-based index of the masked variant in the plan
  std::size_t rank = 0;   // 1-based candidate rank j
  std::size_t position = 0;  // word position that was masked
  TokenizedText text;
  double mlm_score = 0.0;
};

struct ReconstructionSet {
  MaskingPlan plan;
  std::size_t k = 0;
  std::vector<ReconstructionCandidate> candidates;  // grouped by variant, then rank
  // Variants whose backend returned fewer than k candidates.
  std::vector<std::size_t> short_groups;

  std::size_t mask_count() const { return plan.variants.size(); }
};

std::vector<ReconstructionCandidate> fill_mask(const MaskedLanguageModel& mlm,
                                               const TokenizedText& source,
                                               const MaskedVariant& variant, std::size_t k,
                                               std::size_t group = 1);

// One MLM call per variant; results merged in (variant, rank) order even when
// calls run concurrently.
ReconstructionSet reconstruct_all(const MaskedLanguageModel& mlm, const MaskingPlan& plan,
                                  std::size_t k);

}  // namespace mlmd
