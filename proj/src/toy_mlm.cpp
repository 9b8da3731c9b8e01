#include "mlmd/toy_mlm.hpp"

#include <algorithm>
#include <cmath>

namespace mlmd {

ToyMaskedLM ToyMaskedLM::fit(std::span<const TokenizedText> corpus, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "smoothing alpha must be positive");
  if (corpus.empty()) throw Error(ErrorCode::kEmptyDataset, "masked LM corpus is empty");
  ToyMaskedLM lm(alpha);
  for (const auto& text : corpus) lm.add_sentence(text.words());
  lm.finalize();
  return lm;
}

void ToyMaskedLM::add_sentence(std::span<const std::string> words) {
  std::string prev = kBos;
  ++left_totals_[prev];
  for (const auto& w : words) {
    ++unigrams_[w];
    ++tokens_;
    ++bigrams_[{prev, w}];
    ++left_totals_[w];
    prev = w;
  }
  ++bigrams_[{prev, kEos}];
}

void ToyMaskedLM::finalize() {
  vocab_.clear();
  for (const auto& [w, c] : unigrams_) vocab_.push_back(w);
  std::sort(vocab_.begin(), vocab_.end());
}

std::size_t ToyMaskedLM::unigram(const std::string& w) const {
  auto it = unigrams_.find(w);
  return it == unigrams_.end() ? 0 : it->second;
}

std::size_t ToyMaskedLM::bigram(const std::string& a, const std::string& b) const {
  auto it = bigrams_.find({a, b});
  return it == bigrams_.end() ? 0 : it->second;
}

double ToyMaskedLM::score(const std::string& left, const std::string& candidate,
                          const std::string& right) const {
  // Outcome space for smoothing: vocabulary plus the end-of-sentence token.
  const double outcomes = static_cast<double>(vocab_.size() + 1);
  auto left_total = [&](const std::string& w) {
    auto it = left_totals_.find(w);
    return it == left_totals_.end() ? 0.0 : static_cast<double>(it->second);
  };
  const double p_given_left =
      (static_cast<double>(bigram(left, candidate)) + alpha_) / (left_total(left) + alpha_ * outcomes);
  const double p_right =
      (static_cast<double>(bigram(candidate, right)) + alpha_) / (left_total(candidate) + alpha_ * outcomes);
  const double p_unigram = (static_cast<double>(unigram(candidate)) + alpha_) /
                           (static_cast<double>(tokens_) + alpha_ * outcomes);
  return std::log(p_given_left) + std::log(p_right) + std::log(p_unigram);
}

std::vector<FillCandidate> ToyMaskedLM::fill(std::span<const std::string> rendered,
                                             std::size_t masked_position, std::size_t k) const {
  if (masked_position < 1 || masked_position > rendered.size()) {
    throw Error(ErrorCode::kInvalidArgument, "mask position out of range");
  }
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  const std::string left = masked_position == 1 ? kBos : rendered[masked_position - 2];
  const std::string right = masked_position == rendered.size() ? kEos : rendered[masked_position];

  std::vector<FillCandidate> all;
  all.reserve(vocab_.size());
  for (const auto& w : vocab_) all.push_back({w, score(left, w, right)});
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const FillCandidate& a, const FillCandidate& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.word < b.word;
                    });
  all.resize(keep);
  return all;
}

nlohmann::json ToyMaskedLM::to_json() const {
  nlohmann::json bigrams = nlohmann::json::array();
  for (const auto& [key, c] : bigrams_) bigrams.push_back({key.first, key.second, c});
  nlohmann::json unigrams = nlohmann::json::object();
  for (const auto& w : vocab_) unigrams[w] = unigram(w);
  return {{"alpha", alpha_}, {"unigrams", unigrams}, {"bigrams", bigrams}};
}

ToyMaskedLM ToyMaskedLM::from_json(const nlohmann::json& j) {
  try {
    ToyMaskedLM lm(j.at("alpha").get<double>());
    for (const auto& [w, c] : j.at("unigrams").items()) {
      lm.unigrams_[w] = c.get<std::size_t>();
      lm.tokens_ += c.get<std::size_t>();
    }
    for (const auto& entry : j.at("bigrams")) {
      const auto a = entry.at(0).get<std::string>();
      const auto b = entry.at(1).get<std::string>();
      const auto c = entry.at(2).get<std::size_t>();
      lm.bigrams_[{a, b}] = c;
      lm.left_totals_[a] += c;
    }
    lm.finalize();
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed masked LM: ") + e.what());
  }
}

}  // namespace mlmd
