#include "mlmd/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mlmd {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptySelection: return "EmptySelection";
    case ErrorCode::kShortBeam: return "ShortBeam";
    case ErrorCode::kMismatchedReconstruction: return "MismatchedReconstruction";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kGradientUnavailable: return "GradientUnavailable";
    case ErrorCode::kRequiresFullPlan: return "RequiresFullPlan";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kEmptyGradientSet: return "EmptyGradientSet";
    case ErrorCode::kSingleClassCorpus: return "SingleClassCorpus";
    case ErrorCode::kUncalibratedDetector: return "UncalibratedDetector";
    case ErrorCode::kBackendFailure: return "BackendFailure";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kHttpStatus: return "HttpStatus";
  }
  return "Unknown";
}

bool is_backend_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBackendFailure:
    case ErrorCode::kTimeout:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kHttpStatus:
    case ErrorCode::kShortBeam:
    case ErrorCode::kGradientUnavailable:
      return true;
    default:
      return false;
  }
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

bool is_single_word(std::string_view word) {
  return !word.empty() && std::none_of(word.begin(), word.end(), is_space);
}

TokenizedText tokenize(std::string_view raw) {
  TokenizedText text;
  text.raw_ = std::string(raw);
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && is_space(raw[i])) ++i;
    if (i == raw.size()) break;
    std::size_t begin = i;
    while (i < raw.size() && !is_space(raw[i])) ++i;
    text.spans_.push_back({begin, i});
    text.words_.emplace_back(raw.substr(begin, i - begin));
  }
  if (text.words_.empty()) {
    throw Error(ErrorCode::kEmptyInput, "input contains no words");
  }
  return text;
}

TokenizedText from_words(std::span<const std::string> words) {
  if (words.empty()) throw Error(ErrorCode::kEmptyInput, "word list is empty");
  TokenizedText text;
  for (const auto& w : words) {
    if (!is_single_word(w)) {
      throw Error(ErrorCode::kInvalidArgument, "not a single word: '" + w + "'");
    }
    if (!text.raw_.empty()) text.raw_ += ' ';
    std::size_t begin = text.raw_.size();
    text.raw_ += w;
    text.spans_.push_back({begin, text.raw_.size()});
    text.words_.push_back(w);
  }
  return text;
}

const std::string& TokenizedText::word(std::size_t position) const {
  if (position < 1 || position > words_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "word position " + std::to_string(position) + " out of range [1, " +
                    std::to_string(words_.size()) + "]");
  }
  return words_[position - 1];
}

TokenizedText TokenizedText::with_word(std::size_t position,
                                       std::string_view replacement) const {
  const std::string& current = word(position);
  if (!is_single_word(replacement)) {
    throw Error(ErrorCode::kInvalidArgument,
                "replacement is not a single word: '" + std::string(replacement) + "'");
  }
  TokenizedText out = *this;
  const CharSpan span = spans_[position - 1];
  out.raw_.replace(span.begin, span.end - span.begin, replacement);
  out.words_[position - 1] = std::string(replacement);
  const auto delta = static_cast<std::ptrdiff_t>(replacement.size()) -
                     static_cast<std::ptrdiff_t>(current.size());
  out.spans_[position - 1].end = static_cast<std::size_t>(
      static_cast<std::ptrdiff_t>(span.end) + delta);
  for (std::size_t i = position; i < out.spans_.size(); ++i) {
    out.spans_[i].begin = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(out.spans_[i].begin) + delta);
    out.spans_[i].end = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(out.spans_[i].end) + delta);
  }
  return out;
}

std::string detokenize(const TokenizedText& text) {
  const auto& raw = text.raw();
  const auto& spans = text.char_spans();
  const auto& words = text.words();
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    out.append(raw, cursor, spans[i].begin - cursor);
    out += words[i];
    cursor = spans[i].end;
  }
  out.append(raw, cursor, std::string::npos);
  return out;
}

ConfidenceVector::ConfidenceVector(std::vector<double> probs, double tolerance)
    : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "confidence vector needs at least two classes");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < -tolerance || p > 1.0 + tolerance) {
      throw Error(ErrorCode::kInvalidArgument, "probability outside [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                "probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
  for (double& p : probs_) p = std::clamp(p, 0.0, 1.0);
}

ClassLabel ConfidenceVector::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs_.size(); ++i) {
    if (probs_[i] > probs_[best]) best = i;
  }
  return ClassLabel::from_index(best);
}

Prediction predict(const VictimModel& victim, const TokenizedText& text) {
  auto preds = predict_batch(victim, std::span<const TokenizedText>(&text, 1));
  return std::move(preds.front());
}

std::vector<Prediction> predict_batch(const VictimModel& victim,
                                      std::span<const TokenizedText> texts) {
  auto confidences = victim.classify(texts);
  if (confidences.size() != texts.size()) {
    throw Error(ErrorCode::kBackendFailure,
                "victim returned " + std::to_string(confidences.size()) + " rows for " +
                    std::to_string(texts.size()) + " texts");
  }
  std::vector<Prediction> out;
  out.reserve(confidences.size());
  for (auto& c : confidences) {
    if (c.class_count() != victim.class_count()) {
      throw Error(ErrorCode::kBackendFailure, "victim returned wrong class count");
    }
    ClassLabel label = c.argmax();
    out.push_back({label, std::move(c)});
  }
  return out;
}

bool is_valid_pair(const VictimModel& victim, const LabeledPair& pair) {
  std::vector<TokenizedText> texts{pair.normal, pair.adversarial};
  auto preds = predict_batch(victim, texts);
  return preds[0].label != preds[1].label;
}

}  // namespace mlmd
