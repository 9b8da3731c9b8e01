#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlmd/core.hpp"
#include "mlmd/reconstruction.hpp"

#include <json.hpp>

namespace mlmd {

// Count-based stand-in for a masked language model. A candidate w for the
// masked slot is scored as
//
//   log p(w | left) + log p(right | w) + log p(w)
//
// with add-alpha smoothed bigram and unigram estimates. Sentence boundaries
// act as context tokens. Ties break lexicographically.
class ToyMaskedLM : public MaskedLanguageModel {
 public:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";

  explicit ToyMaskedLM(double alpha = 0.1) : alpha_(alpha) {}

  static ToyMaskedLM fit(std::span<const TokenizedText> corpus, double alpha = 0.1);

  std::vector<FillCandidate> fill(std::span<const std::string> rendered,
                                  std::size_t masked_position, std::size_t k) const override;

  double score(const std::string& left, const std::string& candidate,
               const std::string& right) const;

  const std::vector<std::string>& vocabulary() const { return vocab_; }
  double alpha() const { return alpha_; }

  nlohmann::json to_json() const;
  static ToyMaskedLM from_json(const nlohmann::json& j);

 private:
  void add_sentence(std::span<const std::string> words);
  void finalize();
  std::size_t unigram(const std::string& w) const;
  std::size_t bigram(const std::string& a, const std::string& b) const;

  double alpha_;
  std::vector<std::string> vocab_;  // sorted, boundaries excluded
  std::unordered_map<std::string, std::size_t> unigrams_;
  // Count of w as the left element of a bigram, including before </s>.
  std::unordered_map<std::string, std::size_t> left_totals_;
  std::map<std::pair<std::string, std::string>, std::size_t> bigrams_;
  std::size_t tokens_ = 0;
};

}  // namespace mlmd
