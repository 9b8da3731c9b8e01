#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mlmd/harness.hpp"

namespace mlmd {

std::string_view attack_name(AttackKind kind) {
  return kind == AttackKind::kSynonymSwap ? "synonym" : "char";
}

AttackKind parse_attack(std::string_view name) {
  if (name == "synonym") return AttackKind::kSynonymSwap;
  if (name == "char") return AttackKind::kCharPerturb;
  throw Error(ErrorCode::kInvalidArgument, "unknown attack kind '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  if (!(max_perturb_fraction > 0.0 && max_perturb_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max_perturb_fraction must lie in (0, 1]");
  }
  if (kind == AttackKind::kCharPerturb && char_ops.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "char attack needs at least one op");
  }
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string perturb_word(const std::string& word, CharOp op, std::uint64_t draw) {
  const std::size_t len = word.size();
  std::string out = word;
  switch (op) {
    case CharOp::kSwap:
      if (len < 2) return word;
      for (std::size_t step = 0; step + 1 < len; ++step) {
        const std::size_t i = (draw + step) % (len - 1);
        if (out[i] != out[i + 1]) {
          std::swap(out[i], out[i + 1]);
          return out;
        }
      }
      return word;
    case CharOp::kDelete:
      if (len < 2) return word;
      out.erase(draw % len, 1);
      return out;
    case CharOp::kSubstitute: {
      if (len == 0) return word;
      const std::size_t i = draw % len;
      const char original = out[i];
      const int base = (original >= 'a' && original <= 'z') ? original - 'a' : 0;
      out[i] = static_cast<char>('a' + (base + 1 + static_cast<int>((draw >> 16) % 25)) % 26);
      if (out[i] == original) out[i] = original == 'z' ? 'a' : static_cast<char>(original + 1);
      return out;
    }
  }
  return word;
}

namespace {

struct AttackState {
  const VictimModel& victim;
  TokenizedText current;
  ClassLabel original;
  double original_prob = 0.0;
  std::size_t queries = 0;
};

std::vector<std::size_t> visit_order(const VictimModel& victim, const TokenizedText& x,
                                     ClassLabel target) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{1});
  try {
    const auto profile = importance_scores(victim, x, target);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return profile.scores[a - 1] > profile.scores[b - 1];
    });
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kGradientUnavailable) throw;
  }
  return order;
}

std::size_t edit_limit(const TokenizedText& x, const AttackConfig& config) {
  const auto by_fraction = static_cast<std::size_t>(
      std::floor(config.max_perturb_fraction * static_cast<double>(x.size()) + 1e-9));
  return std::min(config.budget, by_fraction);
}

// Tries each replacement at `position` and keeps the one with the lowest
// original-class probability if it improves on the current text.
bool try_replacements(AttackState& state, std::size_t position,
                      const std::vector<std::string>& replacements, AttackResult& result) {
  std::vector<TokenizedText> trials;
  for (const auto& r : replacements) {
    if (r != state.current.word(position) && is_single_word(r)) {
      trials.push_back(state.current.with_word(position, r));
    }
  }
  if (trials.empty()) return false;
  auto preds = predict_batch(state.victim, trials);
  state.queries += trials.size();
  std::size_t best = 0;
  for (std::size_t i = 1; i < preds.size(); ++i) {
    if (preds[i].confidence[state.original] < preds[best].confidence[state.original]) best = i;
  }
  const double prob = preds[best].confidence[state.original];
  if (!(prob < state.original_prob)) return false;
  state.current = trials[best];
  state.original_prob = prob;
  result.perturbed_positions.insert(position);
  return preds[best].label != state.original;
}

template <typename Propose>
AttackResult greedy_attack(const VictimModel& victim, const TokenizedText& x,
                           const AttackConfig& config, Propose propose) {
  config.validate();
  AttackResult result;
  const auto start = predict(victim, x);
  AttackState state{victim, x, start.label, start.confidence[start.label], 1};
  const std::size_t limit = edit_limit(x, config);
  if (limit == 0) {
    result.queries = state.queries;
    return result;
  }
  for (std::size_t position : visit_order(victim, x, start.label)) {
    if (result.perturbed_positions.size() >= limit) break;
    const auto replacements = propose(state.current, position);
    if (replacements.empty()) continue;
    if (try_replacements(state, position, replacements, result)) {
      result.pair = LabeledPair{x, state.current, std::string(attack_name(config.kind))};
      break;
    }
  }
  result.queries = state.queries;
  return result;
}

}  // namespace

AttackResult synonym_attack(const VictimModel& victim, const TokenizedText& x,
                            const AttackConfig& config) {
  AttackConfig cfg = config;
  cfg.kind = AttackKind::kSynonymSwap;
  return greedy_attack(victim, x, cfg, [&](const TokenizedText& current, std::size_t position) {
    auto it = cfg.synonyms.find(current.word(position));
    return it == cfg.synonyms.end() ? std::vector<std::string>{} : it->second;
  });
}

AttackResult char_attack(const VictimModel& victim, const TokenizedText& x,
                         const AttackConfig& config) {
  AttackConfig cfg = config;
  cfg.kind = AttackKind::kCharPerturb;
  return greedy_attack(victim, x, cfg, [&](const TokenizedText& current, std::size_t position) {
    const std::string& word = current.word(position);
    std::mt19937_64 rng(cfg.seed ^ fnv1a(word) ^ (position * 0x9E3779B97F4A7C15ULL));
    const CharOp op = cfg.char_ops[rng() % cfg.char_ops.size()];
    std::string edited = perturb_word(word, op, rng());
    return edited == word ? std::vector<std::string>{} : std::vector<std::string>{edited};
  });
}

}  // namespace mlmd
