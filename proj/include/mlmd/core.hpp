#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlmd/error.hpp"

namespace mlmd {

// Class labels are 1-based: a c-class victim predicts labels 1..c.
struct ClassLabel {
  int value = 1;

  constexpr auto operator<=>(const ClassLabel&) const = default;
  constexpr std::size_t index() const { return static_cast<std::size_t>(value - 1); }
  static constexpr ClassLabel from_index(std::size_t i) { return {static_cast<int>(i) + 1}; }
};

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  constexpr bool operator==(const CharSpan&) const = default;
};

// An input text split into words. Word positions in the public API are
// 1-based, mirroring how positions appear in the wire protocol.
class TokenizedText {
 public:
  TokenizedText() = default;

  const std::vector<std::string>& words() const { return words_; }
  const std::string& raw() const { return raw_; }
  const std::vector<CharSpan>& char_spans() const { return spans_; }
  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t position) const;

  // Copy of this text with the word at `position` replaced. Surrounding
  // whitespace is preserved so the result still round-trips through tokenize.
  TokenizedText with_word(std::size_t position, std::string_view replacement) const;

  bool operator==(const TokenizedText& other) const {
    return raw_ == other.raw_ && words_ == other.words_;
  }

 private:
  friend TokenizedText tokenize(std::string_view raw);
  friend TokenizedText from_words(std::span<const std::string> words);

  std::vector<std::string> words_;
  std::vector<CharSpan> spans_;
  std::string raw_;
};

// Whitespace split; punctuation stays attached to its word.
// Throws Error(kEmptyInput) if `raw` contains no words.
TokenizedText tokenize(std::string_view raw);

// Joins words with single spaces.
TokenizedText from_words(std::span<const std::string> words);

// Rebuilds the raw string from the words and the whitespace between spans.
std::string detokenize(const TokenizedText& text);

// Non-empty and free of whitespace, i.e. survives tokenize as one word.
bool is_single_word(std::string_view word);

class ConfidenceVector {
 public:
  static constexpr double kSimplexTolerance = 1e-9;

  // Validates the simplex invariant within `tolerance`. Entries are stored as
  // given (clamped into [0,1]) so values survive serialization bit-exactly.
  explicit ConfidenceVector(std::vector<double> probs, double tolerance = kSimplexTolerance);

  const std::vector<double>& probs() const { return probs_; }
  std::size_t class_count() const { return probs_.size(); }
  double operator[](ClassLabel label) const { return probs_.at(label.index()); }

  // argmax with lowest-index tie break.
  ClassLabel argmax() const;

  bool operator==(const ConfidenceVector&) const = default;

 private:
  std::vector<double> probs_;
};

struct Prediction {
  ClassLabel label;
  ConfidenceVector confidence;
};

// The classifier under protection (f). Implementations must return results
// in input order and be deterministic for identical batches.
class VictimModel {
 public:
  virtual ~VictimModel() = default;

  virtual std::vector<ConfidenceVector> classify(std::span<const TokenizedText> texts) const = 0;
  virtual std::size_t class_count() const = 0;

  // Whether concurrent classify calls are allowed.
  virtual bool thread_safe() const { return true; }
};

Prediction predict(const VictimModel& victim, const TokenizedText& text);
std::vector<Prediction> predict_batch(const VictimModel& victim,
                                      std::span<const TokenizedText> texts);

struct LabeledPair {
  TokenizedText normal;
  TokenizedText adversarial;
  std::string origin;
};

// Checks the attack-success invariant z(normal) != z(adversarial).
bool is_valid_pair(const VictimModel& victim, const LabeledPair& pair);

}  // namespace mlmd
