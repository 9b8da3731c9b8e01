#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <random>

#include "mlmd/backends.hpp"
#include "mlmd/harness.hpp"

namespace mlmd {

std::vector<ScoredExample> score_pairs(std::span<const LabeledPair> pairs,
                                       const DetectorConfig& config, const VictimModel& victim,
                                       const MaskedLanguageModel& mlm) {
  std::vector<ScoredExample> out;
  out.reserve(2 * pairs.size());
  for (const auto& pair : pairs) {
    out.push_back({run_detection(pair.normal, config, victim, mlm).score, 0});
    out.push_back({run_detection(pair.adversarial, config, victim, mlm).score, 1});
  }
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with mid-ranks for ties.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) return 0.0;
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

EvalReport recompute_metrics(const EvalReport& report) {
  EvalReport out = report;
  if (!report.config.tau) throw Error(ErrorCode::kUncalibratedDetector, "report has no threshold");
  out.confusion = confusion_at(report.scores, report.labels, *report.config.tau);
  out.decisions.clear();
  for (double s : report.scores) out.decisions.push_back(s > *report.config.tau ? 1 : 0);
  out.accuracy = out.confusion.accuracy();
  out.f1_defined = out.confusion.f1_defined();
  out.f1 = out.confusion.f1();
  out.auc = roc_auc(report.scores, report.labels);
  return out;
}

EvalReport evaluate(const DetectorConfig& config, std::span<const LabeledPair> pairs,
                    const VictimModel& victim, const MaskedLanguageModel& mlm) {
  if (!config.tau) throw Error(ErrorCode::kUncalibratedDetector, "evaluate needs a calibrated tau");
  if (pairs.empty()) throw Error(ErrorCode::kEmptyDataset, "no pairs to evaluate");
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  CountingVictim counted_victim(victim);
  CountingMaskedLM counted_mlm(mlm);
  EvalReport report;
  report.config = config;
  auto score_one = [&](const TokenizedText& x, int label) {
    auto trace = run_detection(x, config, counted_victim, counted_mlm);
    report.scores.push_back(trace.score.value());
    report.labels.push_back(label);
    for (auto& w : trace.warnings) report.warnings.push_back(std::move(w));
  };
  for (const auto& pair : pairs) {
    score_one(pair.normal, 0);
    score_one(pair.adversarial, 1);
    ++report.origin_counts[pair.origin];
  }
  report.counters.mlm_calls = counted_mlm.fill_calls();
  report.counters.victim_texts = counted_victim.texts_classified();
  report.counters.victim_batches = counted_victim.classify_calls();
  report.counters.gradient_calls = counted_victim.gradient_calls();

  report = recompute_metrics(report);
  if (!report.f1_defined) report.warnings.push_back("F1 undefined (no positives); reported as 0");
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::vector<std::size_t> calibration_split(std::span<const LabeledPair> pairs, double fraction,
                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split fraction must lie in (0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < pairs.size(); ++i) strata[pairs[i].origin].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& [origin, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = static_cast<std::size_t>(fraction * static_cast<double>(members.size()) + 0.5);
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<std::size_t> complement_indices(std::span<const std::size_t> chosen, std::size_t total) {
  std::vector<bool> taken(total, false);
  for (std::size_t i : chosen) taken.at(i) = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < total; ++i) {
    if (!taken[i]) out.push_back(i);
  }
  return out;
}

}  // namespace mlmd
