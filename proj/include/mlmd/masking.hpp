#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlmd/core.hpp"

namespace mlmd {

inline constexpr std::string_view kDefaultMaskToken = "[MASK]";

enum class MaskingStrategy { kOneByOne, kGradientGuided, kOracleFiltered };

std::string_view strategy_name(MaskingStrategy strategy);
MaskingStrategy parse_strategy(std::string_view name);

// Number of words processed at masking rate r: ceil(r * n), robust to the
// rounding noise of products like 0.3 * 10.
std::size_t keyword_count(std::size_t n, double rate);
// floor((1 - r) * n); always n - keyword_count(n, rate).
std::size_t nonkeyword_count(std::size_t n, double rate);

void validate_rate(double rate);

// One masked copy of the source text with a single word replaced by the mask
// token.
struct MaskedVariant {
  std::size_t masked_position = 0;  // 1-based
  std::vector<std::string> rendered;
};

struct MaskingPlan {
  TokenizedText source;
  std::vector<MaskedVariant> variants;  // ascending masked_position
  double rate = 1.0;
  MaskingStrategy strategy = MaskingStrategy::kOneByOne;
  std::string mask_token;

  std::vector<std::size_t> masked_positions() const;
};

struct KeywordSelection {
  std::vector<std::size_t> ordering;      // positions by ascending importance
  std::vector<std::size_t> non_keywords;  // first floor((1-r)n) of ordering
  std::vector<std::size_t> keywords;      // remaining ceil(rn), in ordering order
};

MaskedVariant make_variant(const TokenizedText& x, std::size_t position,
                           std::string_view mask_token = kDefaultMaskToken);

MaskingPlan mask_one_by_one(const TokenizedText& x,
                            std::string_view mask_token = kDefaultMaskToken);

// Stable ascending sort by importance; ties keep original word order.
KeywordSelection select_keywords(const TokenizedText& x, std::span<const double> importance,
                                 double rate);

// One variant per keyword, emitted in ascending word position. `rate` is the
// masking rate the selection was built with.
MaskingPlan mask_selected(const TokenizedText& x, const KeywordSelection& selection, double rate,
                          std::string_view mask_token = kDefaultMaskToken);

// Masks every position not in `non_keywords` (posterior oracle filter).
MaskingPlan mask_oracle_filtered(const TokenizedText& x,
                                 std::span<const std::size_t> non_keywords,
                                 std::string_view mask_token = kDefaultMaskToken);

}  // namespace mlmd
