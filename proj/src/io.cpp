#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mlmd/harness.hpp"

namespace mlmd {

using nlohmann::json;

namespace {

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path);
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_lines(const std::string& path, const std::vector<json>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  for (const auto& r : rows) out << r.dump() << '\n';
}

template <typename T>
T get_field(const json& row, const char* name, const std::string& where) {
  try {
    return row.at(name).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, where + ": field '" + name + "': " + e.what());
  }
}

}  // namespace

std::vector<LabeledText> read_corpus_jsonl(const std::string& path) {
  std::vector<LabeledText> out;
  for (const auto& row : read_jsonl(path)) {
    out.push_back({tokenize(get_field<std::string>(row, "text", path)),
                   ClassLabel{get_field<int>(row, "label", path)}});
  }
  return out;
}

void write_corpus_jsonl(const std::string& path, std::span<const LabeledText> corpus) {
  std::vector<json> rows;
  for (const auto& ex : corpus) rows.push_back({{"text", ex.text.raw()}, {"label", ex.label.value}});
  write_lines(path, rows);
}

std::vector<LabeledPair> read_pairs_jsonl(const std::string& path) {
  std::vector<LabeledPair> out;
  for (const auto& row : read_jsonl(path)) {
    out.push_back({tokenize(get_field<std::string>(row, "normal", path)),
                   tokenize(get_field<std::string>(row, "adversarial", path)),
                   row.contains("origin") ? get_field<std::string>(row, "origin", path) : ""});
  }
  return out;
}

void write_pairs_jsonl(const std::string& path, std::span<const LabeledPair> pairs) {
  std::vector<json> rows;
  for (const auto& p : pairs) {
    rows.push_back({{"normal", p.normal.raw()}, {"adversarial", p.adversarial.raw()}, {"origin", p.origin}});
  }
  write_lines(path, rows);
}

json synonyms_to_json(const SynonymTable& table) { return json(table); }

SynonymTable synonyms_from_json(const json& j) {
  try {
    return j.get<SynonymTable>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed synonym table: ") + e.what());
  }
}

json detector_config_to_json(const DetectorConfig& c) {
  json j = {{"r", c.rate},
            {"k", c.k},
            {"strategy", strategy_name(c.strategy)},
            {"gamma", c.gamma},
            {"mask_token", c.mask_token},
            {"feature_dims", c.feature_dims},
            {"renormalize", c.renormalize}};
  if (c.tau) j["tau"] = *c.tau;
  return j;
}

DetectorConfig detector_config_from_json(const json& j) {
  DetectorConfig c;
  try {
    if (j.contains("strategy")) {
      c.strategy = parse_strategy(j.at("strategy").get<std::string>());
      if (c.strategy == MaskingStrategy::kGradientGuided) c.rate = 0.3;
    }
    if (j.contains("r")) c.rate = j.at("r").get<double>();
    if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
    if (j.contains("gamma")) c.gamma = j.at("gamma").get<std::size_t>();
    if (j.contains("mask_token")) c.mask_token = j.at("mask_token").get<std::string>();
    if (j.contains("feature_dims")) c.feature_dims = j.at("feature_dims").get<std::size_t>();
    if (j.contains("renormalize")) c.renormalize = j.at("renormalize").get<bool>();
    if (j.contains("tau") && !j.at("tau").is_null()) c.tau = j.at("tau").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed detector config: ") + e.what());
  }
  c.validate();
  return c;
}

json score_histogram(std::span<const double> scores, std::span<const int> labels, std::size_t bins) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "scores and labels differ in length");
  }
  std::vector<std::size_t> normal(bins, 0), adversarial(bins, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto b = static_cast<std::size_t>(std::floor(scores[i] * static_cast<double>(bins)));
    if (b >= bins) b = bins - 1;
    (labels[i] == 1 ? adversarial : normal)[b]++;
  }
  std::vector<double> edges;
  for (std::size_t b = 0; b <= bins; ++b) edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
  return {{"edges", edges}, {"normal", normal}, {"adversarial", adversarial}};
}

json eval_report_to_json(const EvalReport& r) {
  json per_example = json::array();
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    per_example.push_back({{"score", r.scores[i]}, {"label", r.labels[i]}, {"decision", r.decisions.at(i)}});
  }
  return {{"accuracy", r.accuracy},
          {"f1", r.f1},
          {"f1_defined", r.f1_defined},
          {"auc", r.auc},
          {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
          {"examples", per_example},
          {"runtime_seconds", r.runtime_seconds},
          {"counters",
           {{"mlm_calls", r.counters.mlm_calls},
            {"victim_texts", r.counters.victim_texts},
            {"victim_batches", r.counters.victim_batches},
            {"gradient_calls", r.counters.gradient_calls}}},
          {"config", detector_config_to_json(r.config)},
          {"origin_counts", r.origin_counts},
          {"warnings", r.warnings}};
}

json analysis_report_to_json(const AnalysisReport& r) {
  json slices = json::array();
  for (const auto& s : r.slices) {
    slices.push_back({{"gamma", s.gamma},
                      {"proportion",
                       {{"normal", s.proportion.normal},
                        {"adversarial", s.proportion.adversarial},
                        {"min", s.proportion.min()}}},
                      {"scores",
                       {{"normal", s.normal_scores},
                        {"adversarial", s.adversarial_scores},
                        {"normal_renormalized", s.normal_scores_renormalized},
                        {"adversarial_renormalized", s.adversarial_scores_renormalized}}}});
  }
  return {{"k", r.k},
          {"rate", r.rate},
          {"pairs", r.pair_count},
          {"gammas", slices},
          {"overlap",
           {{"gamma", r.overlap_gamma},
            {"normal", r.overlap.normal},
            {"adversarial", r.overlap.adversarial},
            {"min", r.overlap.min()}}}};
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string scores_csv(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "scores and labels differ in length");
  }
  std::string out = "score,label\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out += format_double(scores[i]) + "," + std::to_string(labels[i]) + "\n";
  }
  return out;
}

std::string analysis_csv(const AnalysisReport& report) {
  std::string out = "gamma,score,score_renormalized,label\n";
  for (const auto& s : report.slices) {
    for (std::size_t i = 0; i < s.normal_scores.size(); ++i) {
      out += std::to_string(s.gamma) + "," + format_double(s.normal_scores[i]) + "," +
             format_double(s.normal_scores_renormalized[i]) + ",0\n";
    }
    for (std::size_t i = 0; i < s.adversarial_scores.size(); ++i) {
      out += std::to_string(s.gamma) + "," + format_double(s.adversarial_scores[i]) + "," +
             format_double(s.adversarial_scores_renormalized[i]) + ",1\n";
    }
  }
  return out;
}

}  // namespace mlmd
