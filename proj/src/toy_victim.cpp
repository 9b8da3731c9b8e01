#include "mlmd/toy_victim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace mlmd {

namespace {

std::vector<double> softmax(std::vector<double> z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

}  // namespace

ToyVictimModel::ToyVictimModel(std::unordered_map<std::string, std::size_t> vocab,
                               Parameters params)
    : vocab_(std::move(vocab)), params_(std::move(params)) {
  if (params_.classes < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two classes");
  if (params_.embeddings.size() != vocab_.size() + 1 || params_.head.size() != params_.classes ||
      params_.bias.size() != params_.classes) {
    throw Error(ErrorCode::kInvalidArgument, "toy victim parameter shapes are inconsistent");
  }
  for (const auto& row : params_.embeddings) {
    if (row.size() != params_.dim) throw Error(ErrorCode::kInvalidArgument, "embedding width mismatch");
  }
  for (const auto& row : params_.head) {
    if (row.size() != params_.dim) throw Error(ErrorCode::kInvalidArgument, "head width mismatch");
  }
  for (const auto& [word, row] : vocab_) {
    if (row == 0 || row > vocab_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "vocabulary rows must be 1..|V|");
    }
  }
}

std::size_t ToyVictimModel::row_of(const std::string& word) const {
  auto it = vocab_.find(word);
  return it == vocab_.end() ? 0 : it->second;
}

std::vector<double> ToyVictimModel::pooled(std::span<const std::string> words) const {
  std::vector<double> h(params_.dim, 0.0);
  for (const auto& w : words) {
    const auto& e = params_.embeddings[row_of(w)];
    for (std::size_t d = 0; d < params_.dim; ++d) h[d] += e[d] * e[d];
  }
  const double inv_n = 1.0 / static_cast<double>(words.size());
  for (double& v : h) v *= inv_n;
  return h;
}

std::vector<double> ToyVictimModel::logits(std::span<const std::string> words) const {
  if (words.empty()) throw Error(ErrorCode::kEmptyInput, "cannot classify an empty text");
  const auto h = pooled(words);
  std::vector<double> z = params_.bias;
  for (std::size_t c = 0; c < params_.classes; ++c) {
    for (std::size_t d = 0; d < params_.dim; ++d) z[c] += params_.head[c][d] * h[d];
  }
  return z;
}

std::vector<double> ToyVictimModel::probabilities(std::span<const std::string> words) const {
  return softmax(logits(words));
}

double ToyVictimModel::loss(std::span<const std::string> words, ClassLabel target) const {
  const auto z = logits(words);
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - peak);
  return -(z.at(target.index()) - peak - std::log(sum));
}

std::vector<ConfidenceVector> ToyVictimModel::classify(std::span<const TokenizedText> texts) const {
  std::vector<ConfidenceVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.emplace_back(probabilities(t.words()));
  return out;
}

std::vector<std::vector<double>> ToyVictimModel::embedding_gradients(
    std::span<const std::string> words, ClassLabel target) const {
  if (target.value < 1 || target.index() >= params_.classes) {
    throw Error(ErrorCode::kInvalidArgument, "target label out of range");
  }
  auto delta = probabilities(words);
  delta[target.index()] -= 1.0;
  // dL/dh = W^T (p - onehot)
  std::vector<double> grad_h(params_.dim, 0.0);
  for (std::size_t c = 0; c < params_.classes; ++c) {
    for (std::size_t d = 0; d < params_.dim; ++d) grad_h[d] += params_.head[c][d] * delta[c];
  }
  const double inv_n = 1.0 / static_cast<double>(words.size());
  std::vector<std::vector<double>> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    const auto& e = params_.embeddings[row_of(w)];
    std::vector<double> g(params_.dim);
    for (std::size_t d = 0; d < params_.dim; ++d) g[d] = 2.0 * e[d] * grad_h[d] * inv_n;
    out.push_back(std::move(g));
  }
  return out;
}

WordGradients ToyVictimModel::word_gradients(const TokenizedText& x, ClassLabel target) const {
  WordGradients out;
  out.loss = loss(x.words(), target);
  out.vectors = embedding_gradients(x.words(), target);
  for (const auto& v : out.vectors) {
    double sq = 0.0;
    for (double g : v) sq += g * g;
    out.norms.push_back(std::sqrt(sq));
  }
  return out;
}

nlohmann::json ToyVictimModel::to_json() const {
  std::vector<std::string> words(vocab_.size());
  for (const auto& [w, row] : vocab_) words[row - 1] = w;
  return {{"dim", params_.dim},
          {"classes", params_.classes},
          {"vocab", words},
          {"embeddings", params_.embeddings},
          {"head", params_.head},
          {"bias", params_.bias}};
}

ToyVictimModel ToyVictimModel::from_json(const nlohmann::json& j) {
  try {
    std::unordered_map<std::string, std::size_t> vocab;
    const auto words = j.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < words.size(); ++i) vocab.emplace(words[i], i + 1);
    Parameters p;
    p.dim = j.at("dim").get<std::size_t>();
    p.classes = j.at("classes").get<std::size_t>();
    p.embeddings = j.at("embeddings").get<std::vector<std::vector<double>>>();
    p.head = j.at("head").get<std::vector<std::vector<double>>>();
    p.bias = j.at("bias").get<std::vector<double>>();
    return ToyVictimModel(std::move(vocab), std::move(p));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed toy victim: ") + e.what());
  }
}

ToyVictimModel toy_victim_train(std::span<const LabeledText> corpus,
                                const ToyVictimOptions& options) {
  std::set<int> labels;
  for (const auto& ex : corpus) {
    if (ex.label.value < 1) throw Error(ErrorCode::kInvalidArgument, "labels are 1-based");
    labels.insert(ex.label.value);
  }
  if (labels.size() < 2) {
    throw Error(ErrorCode::kSingleClassCorpus, "training corpus needs at least two classes");
  }
  if (options.dim < 1) throw Error(ErrorCode::kInvalidArgument, "dim must be positive");
  if (!(options.unk_dropout >= 0.0 && options.unk_dropout < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "unk_dropout must lie in [0, 1)");
  }

  // Rows in order of first appearance keep the layout independent of hashing.
  std::unordered_map<std::string, std::size_t> vocab;
  for (const auto& ex : corpus) {
    for (const auto& w : ex.text.words()) vocab.emplace(w, vocab.size() + 1);
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> init(0.0, options.init_scale);
  ToyVictimModel::Parameters p;
  p.dim = options.dim;
  p.classes = static_cast<std::size_t>(*labels.rbegin());
  p.embeddings.assign(vocab.size() + 1, std::vector<double>(p.dim));
  for (auto& row : p.embeddings) {
    for (double& v : row) v = init(rng);
  }
  p.head.assign(p.classes, std::vector<double>(p.dim));
  for (auto& row : p.head) {
    for (double& v : row) v = init(rng);
  }
  p.bias.assign(p.classes, 0.0);
  ToyVictimModel model(vocab, std::move(p));

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::bernoulli_distribution drop(options.unk_dropout);
  auto& params = model.mutable_parameters();
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      // Dropped tokens map to the UNK row so it learns an out-of-vocabulary
      // embedding from both classes.
      auto words = corpus[idx].text.words();
      if (options.unk_dropout > 0.0) {
        for (auto& w : words) {
          if (drop(rng)) w.clear();
        }
      }
      const ClassLabel target = corpus[idx].label;
      const auto h = model.pooled(words);
      auto delta = model.probabilities(words);
      delta[target.index()] -= 1.0;
      const auto grads = model.embedding_gradients(words, target);

      for (std::size_t c = 0; c < params.classes; ++c) {
        for (std::size_t d = 0; d < params.dim; ++d) {
          params.head[c][d] -= options.learning_rate *
                               (delta[c] * h[d] + options.l2 * params.head[c][d]);
        }
        params.bias[c] -= options.learning_rate * delta[c];
      }
      // Positions sharing a word accumulate into one row.
      std::unordered_map<std::size_t, std::vector<double>> row_grads;
      for (std::size_t t = 0; t < words.size(); ++t) {
        auto [it, fresh] = row_grads.try_emplace(model.row_of(words[t]), params.dim, 0.0);
        for (std::size_t d = 0; d < params.dim; ++d) it->second[d] += grads[t][d];
      }
      std::vector<std::size_t> rows;
      for (const auto& [row, g] : row_grads) rows.push_back(row);
      std::sort(rows.begin(), rows.end());
      for (std::size_t row : rows) {
        const auto& g = row_grads[row];
        for (std::size_t d = 0; d < params.dim; ++d) {
          params.embeddings[row][d] -=
              options.learning_rate * (g[d] + options.l2 * params.embeddings[row][d]);
        }
      }
    }
  }
  return model;
}

}  // namespace mlmd
