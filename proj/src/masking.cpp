#include "mlmd/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mlmd {

std::string_view strategy_name(MaskingStrategy strategy) {
  switch (strategy) {
    case MaskingStrategy::kOneByOne: return "one_by_one";
    case MaskingStrategy::kGradientGuided: return "gradient_guided";
    case MaskingStrategy::kOracleFiltered: return "oracle_filtered";
  }
  return "unknown";
}

MaskingStrategy parse_strategy(std::string_view name) {
  if (name == "one_by_one" || name == "mlmd") return MaskingStrategy::kOneByOne;
  if (name == "gradient_guided" || name == "gradmlmd") return MaskingStrategy::kGradientGuided;
  if (name == "oracle_filtered") return MaskingStrategy::kOracleFiltered;
  throw Error(ErrorCode::kInvalidArgument, "unknown masking strategy '" + std::string(name) + "'");
}

void validate_rate(double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "masking rate must lie in (0, 1], got " + std::to_string(rate));
  }
}

std::size_t keyword_count(std::size_t n, double rate) {
  validate_rate(rate);
  // r*n can land an ulp above an integer (0.3 * 10 == 3.0000000000000004).
  const double product = rate * static_cast<double>(n);
  const double nearest = std::round(product);
  const double scaled =
      std::abs(product - nearest) <= 1e-9 * std::max(1.0, product) ? nearest : std::ceil(product);
  return std::min(n, static_cast<std::size_t>(scaled));
}

std::size_t nonkeyword_count(std::size_t n, double rate) { return n - keyword_count(n, rate); }

std::vector<std::size_t> MaskingPlan::masked_positions() const {
  std::vector<std::size_t> out;
  out.reserve(variants.size());
  for (const auto& v : variants) out.push_back(v.masked_position);
  return out;
}

MaskedVariant make_variant(const TokenizedText& x, std::size_t position,
                           std::string_view mask_token) {
  if (position < 1 || position > x.size()) {
    throw Error(ErrorCode::kInvalidArgument, "mask position out of range");
  }
  MaskedVariant v;
  v.masked_position = position;
  v.rendered = x.words();
  v.rendered[position - 1] = std::string(mask_token);
  return v;
}

MaskingPlan mask_one_by_one(const TokenizedText& x, std::string_view mask_token) {
  MaskingPlan plan;
  plan.source = x;
  plan.rate = 1.0;
  plan.strategy = MaskingStrategy::kOneByOne;
  plan.mask_token = std::string(mask_token);
  plan.variants.reserve(x.size());
  for (std::size_t i = 1; i <= x.size(); ++i) plan.variants.push_back(make_variant(x, i, mask_token));
  return plan;
}

KeywordSelection select_keywords(const TokenizedText& x, std::span<const double> importance,
                                 double rate) {
  validate_rate(rate);
  if (importance.size() != x.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "importance has " + std::to_string(importance.size()) + " entries for " +
                    std::to_string(x.size()) + " words");
  }
  KeywordSelection sel;
  sel.ordering.resize(x.size());
  std::iota(sel.ordering.begin(), sel.ordering.end(), std::size_t{1});
  std::stable_sort(sel.ordering.begin(), sel.ordering.end(), [&](std::size_t a, std::size_t b) {
    return importance[a - 1] < importance[b - 1];
  });
  const std::size_t skip = nonkeyword_count(x.size(), rate);
  sel.non_keywords.assign(sel.ordering.begin(), sel.ordering.begin() + static_cast<std::ptrdiff_t>(skip));
  sel.keywords.assign(sel.ordering.begin() + static_cast<std::ptrdiff_t>(skip), sel.ordering.end());
  return sel;
}

namespace {

MaskingPlan plan_for_positions(const TokenizedText& x, std::vector<std::size_t> positions,
                               double rate, MaskingStrategy strategy,
                               std::string_view mask_token) {
  if (positions.empty()) throw Error(ErrorCode::kEmptySelection, "no positions to mask");
  std::sort(positions.begin(), positions.end());
  if (std::adjacent_find(positions.begin(), positions.end()) != positions.end()) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate mask positions");
  }
  MaskingPlan plan;
  plan.source = x;
  plan.rate = rate;
  plan.strategy = strategy;
  plan.mask_token = std::string(mask_token);
  for (std::size_t p : positions) plan.variants.push_back(make_variant(x, p, mask_token));
  return plan;
}

}  // namespace

MaskingPlan mask_selected(const TokenizedText& x, const KeywordSelection& selection, double rate,
                          std::string_view mask_token) {
  validate_rate(rate);
  return plan_for_positions(x, selection.keywords, rate, MaskingStrategy::kGradientGuided,
                            mask_token);
}

MaskingPlan mask_oracle_filtered(const TokenizedText& x,
                                 std::span<const std::size_t> non_keywords,
                                 std::string_view mask_token) {
  std::set<std::size_t> skip(non_keywords.begin(), non_keywords.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    if (!skip.contains(i)) keep.push_back(i);
  }
  const double rate = static_cast<double>(keep.size()) / static_cast<double>(x.size());
  return plan_for_positions(x, std::move(keep), rate, MaskingStrategy::kOracleFiltered, mask_token);
}

}  // namespace mlmd
