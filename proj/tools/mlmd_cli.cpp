#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlmd/error.hpp"
#include "mlmd/harness.hpp"
#include "mlmd/remote.hpp"

namespace {

using nlohmann::json;
using namespace mlmd;

constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  out << text;
}

void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// Toy victim and masked LM stored side by side.
struct ToyBundle {
  ToyVictimModel victim;
  ToyMaskedLM mlm;
};

ToyBundle load_bundle(const std::string& path) {
  const auto j = read_json_file(path);
  if (!j.contains("victim") || !j.contains("mlm")) {
    throw Error(ErrorCode::kInvalidArgument, path + ": model bundle needs 'victim' and 'mlm'");
  }
  return {ToyVictimModel::from_json(j.at("victim")), ToyMaskedLM::from_json(j.at("mlm"))};
}

// Models named by the "backend" section of a config: either a local toy
// bundle {"model": path} or a server {"url": ..., "class_count": c, ...}.
struct Backend {
  std::unique_ptr<ToyBundle> toy;
  std::shared_ptr<RemoteClient> client;
  std::unique_ptr<VictimModel> remote_victim;
  std::unique_ptr<MaskedLanguageModel> remote_mlm;

  const VictimModel& victim() const { return toy ? static_cast<const VictimModel&>(toy->victim) : *remote_victim; }
  const MaskedLanguageModel& mlm() const {
    return toy ? static_cast<const MaskedLanguageModel&>(toy->mlm) : *remote_mlm;
  }
};

struct RunConfig {
  DetectorConfig detector;
  json backend;
  std::uint64_t seed = 1;
};

RunConfig load_config(const std::string& path) {
  const auto j = read_json_file(path);
  RunConfig c;
  try {
    c.detector = detector_config_from_json(j.value("detector", json::object()));
    c.backend = j.value("backend", json::object());
    c.seed = j.value("seed", std::uint64_t{1});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
  c.detector.validate();
  return c;
}

Backend open_backend(const json& section, const std::string& model_override) {
  Backend b;
  std::string model = model_override;
  if (model.empty()) model = section.value("model", std::string());
  if (!model.empty()) {
    b.toy = std::make_unique<ToyBundle>(load_bundle(model));
    return b;
  }
  if (!section.contains("url")) {
    throw Error(ErrorCode::kInvalidArgument, "backend needs 'model' or 'url'");
  }
  RemoteBackendConfig rc;
  try {
    rc.base_url = section.at("url").get<std::string>();
    rc.class_count = section.value("class_count", std::size_t{2});
    rc.max_in_flight = section.value("max_in_flight", rc.max_in_flight);
    rc.timeout = std::chrono::milliseconds(section.value("timeout_ms", rc.timeout.count()));
    rc.retry.max_attempts = section.value("max_attempts", rc.retry.max_attempts);
    if (section.contains("auth_token")) rc.auth_token = section.at("auth_token").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("backend: ") + e.what());
  }
  rc.validate();
  std::shared_ptr<ResponseCache> cache;
  const auto capacity = section.value("cache_capacity", std::size_t{4096});
  if (capacity > 0) cache = std::make_shared<ResponseCache>(capacity);
  b.client = std::make_shared<RemoteClient>(rc, cache);
  b.remote_victim = std::make_unique<RemoteVictim>(b.client);
  b.remote_mlm = std::make_unique<RemoteMaskedLM>(b.client);
  return b;
}

DetectorConfig calibrated(DetectorConfig config, const std::string& calib_path) {
  const auto j = read_json_file(calib_path);
  if (!j.contains("tau") || !j.at("tau").is_number()) {
    throw Error(ErrorCode::kInvalidArgument, calib_path + ": missing numeric 'tau'");
  }
  config.tau = j.at("tau").get<double>();
  config.validate();
  return config;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// ---- subcommands -----------------------------------------------------------

struct GenCorpusArgs {
  std::size_t count = 600;
  std::uint64_t seed = 1;
  std::string out;
  std::string synonyms_out;
};

int run_gen_corpus(const GenCorpusArgs& a) {
  SyntheticWorld world;
  const auto corpus = world.generate(a.count, a.seed);
  write_corpus_jsonl(a.out, corpus);
  if (!a.synonyms_out.empty()) write_json_file(a.synonyms_out, synonyms_to_json(world.synonyms()));
  std::cout << "wrote " << corpus.size() << " sentences to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string corpus;
  std::string out;
  std::uint64_t seed = 7;
  std::size_t epochs = 30;
  std::size_t dim = 8;
  double alpha = 0.1;
};

int run_train(const TrainArgs& a) {
  const auto corpus = read_corpus_jsonl(a.corpus);
  ToyVictimOptions options;
  options.seed = a.seed;
  options.epochs = a.epochs;
  options.dim = a.dim;
  auto victim = toy_victim_train(corpus, options);
  std::vector<TokenizedText> texts;
  for (const auto& ex : corpus) texts.push_back(ex.text);
  auto mlm = ToyMaskedLM::fit(texts, a.alpha);
  std::size_t correct = 0;
  for (const auto& ex : corpus) correct += predict(victim, ex.text).label == ex.label;
  write_json_file(a.out, {{"victim", victim.to_json()}, {"mlm", mlm.to_json()}});
  std::printf("trained on %zu sentences, training accuracy %.3f\n", corpus.size(),
              static_cast<double>(correct) / static_cast<double>(corpus.size()));
  return 0;
}

struct AttackArgs {
  std::string model;
  std::string kind = "synonym";
  std::string in;
  std::string out;
  std::string synonyms;
  std::uint64_t seed = 1;
  double max_fraction = 0.4;
  std::size_t budget = 8;
  std::size_t limit = 0;
};

int run_attack(const AttackArgs& a) {
  const auto bundle = load_bundle(a.model);
  AttackConfig config;
  config.kind = parse_attack(a.kind);
  config.seed = a.seed;
  config.max_perturb_fraction = a.max_fraction;
  config.budget = a.budget;
  config.synonyms = a.synonyms.empty() ? SyntheticWorld().synonyms() : synonyms_from_json(read_json_file(a.synonyms));
  config.validate();

  const auto corpus = read_corpus_jsonl(a.in);
  std::vector<LabeledPair> pairs;
  std::size_t attempted = 0, skipped = 0, queries = 0;
  for (const auto& ex : corpus) {
    if (a.limit > 0 && pairs.size() >= a.limit) break;
    if (predict(bundle.victim, ex.text).label != ex.label) {
      ++skipped;
      continue;
    }
    ++attempted;
    auto r = config.kind == AttackKind::kSynonymSwap ? synonym_attack(bundle.victim, ex.text, config)
                                                     : char_attack(bundle.victim, ex.text, config);
    queries += r.queries;
    if (r.success()) pairs.push_back(std::move(*r.pair));
  }
  write_pairs_jsonl(a.out, pairs);
  std::printf("%s attack: %zu of %zu flipped (%zu misclassified skipped), %zu victim queries\n",
              std::string(attack_name(config.kind)).c_str(), pairs.size(), attempted, skipped, queries);
  return 0;
}

struct SplitArgs {
  std::vector<std::string> pairs;
  double fraction = 0.5;
  std::uint64_t seed = 11;
  std::string calib_out;
  std::string eval_out;
};

int run_split(const SplitArgs& a) {
  std::vector<LabeledPair> all;
  for (const auto& path : a.pairs) {
    auto part = read_pairs_jsonl(path);
    all.insert(all.end(), part.begin(), part.end());
  }
  const auto calib = calibration_split(all, a.fraction, a.seed);
  const auto rest = complement_indices(calib, all.size());
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<LabeledPair> out;
    for (auto i : idx) out.push_back(all[i]);
    return out;
  };
  write_pairs_jsonl(a.calib_out, pick(calib));
  write_pairs_jsonl(a.eval_out, pick(rest));
  std::printf("%zu calibration pairs, %zu evaluation pairs\n", calib.size(), rest.size());
  return 0;
}

struct CalibrateArgs {
  std::string pairs;
  std::string config;
  std::string model;
  std::string out;
};

int run_calibrate(const CalibrateArgs& a) {
  const auto cfg = load_config(a.config);
  const auto backend = open_backend(cfg.backend, a.model);
  const auto pairs = read_pairs_jsonl(a.pairs);
  const auto scored = score_pairs(pairs, cfg.detector, backend.victim(), backend.mlm());
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : scored) {
    scores.push_back(s.score.value());
    labels.push_back(s.label);
  }
  const auto r = calibrate_threshold(scores, labels);
  print_warnings(r.warnings);
  write_json_file(a.out, {{"tau", r.tau},
                          {"f1", r.f1},
                          {"degenerate", r.degenerate},
                          {"warnings", r.warnings},
                          {"examples", scores.size()},
                          {"detector", detector_config_to_json(cfg.detector)}});
  std::printf("tau %.6f, calibration F1 %.4f over %zu texts\n", r.tau, r.f1, scores.size());
  return 0;
}

struct DetectArgs {
  std::string text;
  std::string config;
  std::string model;
  std::string calib;
};

int run_detect(const DetectArgs& a) {
  const auto cfg = load_config(a.config);
  const auto detector = calibrated(cfg.detector, a.calib);
  const auto backend = open_backend(cfg.backend, a.model);
  const auto v = detect(tokenize(a.text), detector, backend.victim(), backend.mlm());
  print_warnings(v.warnings);
  std::printf("%s score=%.6f flips=%zu denominator=%zu tau=%.6f strategy=%s\n",
              v.decision == 1 ? "adversarial" : "normal", v.score.value(), v.score.flips, v.score.denominator,
              *detector.tau, std::string(strategy_name(v.effective_strategy)).c_str());
  return 0;
}

struct EvalArgs {
  std::string pairs;
  std::string config;
  std::string model;
  std::string calib;
  std::string report;
  std::string hist;
};

int run_eval(const EvalArgs& a) {
  const auto cfg = load_config(a.config);
  const auto detector = calibrated(cfg.detector, a.calib);
  const auto backend = open_backend(cfg.backend, a.model);
  const auto pairs = read_pairs_jsonl(a.pairs);
  const auto report = evaluate(detector, pairs, backend.victim(), backend.mlm());
  print_warnings(report.warnings);
  auto j = eval_report_to_json(report);
  j["histogram"] = score_histogram(report.scores, report.labels);
  if (backend.client) {
    j["network_calls"] = backend.client->network_calls();
    if (backend.client->cache()) j["cache_hits"] = backend.client->cache()->hits();
  }
  if (!a.report.empty()) write_json_file(a.report, j);
  if (!a.hist.empty()) write_text_file(a.hist, scores_csv(report.scores, report.labels));
  std::printf("accuracy %.4f  F1 %.4f%s  AUC %.4f  (%zu texts, %.2fs)\n", report.accuracy, report.f1,
              report.f1_defined ? "" : " (undefined)", report.auc, report.scores.size(), report.runtime_seconds);
  return 0;
}

struct AnalyzeArgs {
  std::string pairs;
  std::string config;
  std::string model;
  bool gamma_sweep = false;
  std::string out;
  std::string csv;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto cfg = load_config(a.config);
  const auto backend = open_backend(cfg.backend, a.model);
  const auto pairs = read_pairs_jsonl(a.pairs);
  AnalysisOptions options;
  options.k = cfg.detector.k;
  options.rate = cfg.detector.strategy == MaskingStrategy::kGradientGuided ? cfg.detector.rate : 0.3;
  options.overlap_gamma = cfg.detector.gamma;
  options.mask_token = cfg.detector.mask_token;
  if (!a.gamma_sweep) options.gammas = {cfg.detector.gamma};
  const auto report = analyze_oracle(pairs, backend.victim(), backend.mlm(), options);
  if (!a.out.empty()) write_json_file(a.out, analysis_report_to_json(report));
  if (!a.csv.empty()) write_text_file(a.csv, analysis_csv(report));
  for (const auto& s : report.slices) {
    std::printf("gamma %zu: non-keyword proportion normal %.3f adversarial %.3f\n", s.gamma, s.proportion.normal,
                s.proportion.adversarial);
  }
  std::printf("oracle/gradient overlap normal %.3f adversarial %.3f\n", report.overlap.normal,
              report.overlap.adversarial);
  return 0;
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct ServeArgs {
  std::string model;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool no_gradients = false;
};

// Hides the gradient interface so the server answers 501 on /v1/gradients.
class ClassifyOnly : public VictimModel {
 public:
  explicit ClassifyOnly(const VictimModel& inner) : inner_(inner) {}
  std::vector<ConfidenceVector> classify(std::span<const TokenizedText> t) const override {
    return inner_.classify(t);
  }
  std::size_t class_count() const override { return inner_.class_count(); }

 private:
  const VictimModel& inner_;
};

int run_serve(const ServeArgs& a) {
  const auto bundle = load_bundle(a.model);
  ClassifyOnly plain(bundle.victim);
  const VictimModel& victim = a.no_gradients ? static_cast<const VictimModel&>(plain) : bundle.victim;
  MockServer server(victim, bundle.mlm);
  const int port = server.start(a.host, a.port);
  std::printf("listening on %s:%d\n", a.host.c_str(), port);
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::printf("served %zu requests\n", server.requests());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked-language-model detection of adversarial text"};
  app.require_subcommand(1);

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a synthetic labeled corpus");
  gen_cmd->add_option("--count", gen.count, "Number of sentences");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out", gen.out, "Corpus JSONL")->required();
  gen_cmd->add_option("--synonyms-out", gen.synonyms_out, "Also write the synonym table");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Train the toy victim and masked LM");
  train_cmd->add_option("--corpus", train.corpus, "Corpus JSONL")->required();
  train_cmd->add_option("--out", train.out, "Model bundle JSON")->required();
  train_cmd->add_option("--seed", train.seed, "Initialization seed");
  train_cmd->add_option("--epochs", train.epochs, "Training epochs");
  train_cmd->add_option("--dim", train.dim, "Embedding width");
  train_cmd->add_option("--alpha", train.alpha, "Masked LM smoothing");

  AttackArgs attack;
  auto* attack_cmd = app.add_subcommand("attack", "Generate adversarial pairs against the toy victim");
  attack_cmd->add_option("--model", attack.model, "Model bundle JSON")->required();
  attack_cmd->add_option("--kind", attack.kind, "synonym or char")
      ->check(CLI::IsMember({"synonym", "char"}));
  attack_cmd->add_option("--in", attack.in, "Corpus JSONL")->required();
  attack_cmd->add_option("--out", attack.out, "Pairs JSONL")->required();
  attack_cmd->add_option("--synonyms", attack.synonyms, "Synonym table JSON");
  attack_cmd->add_option("--seed", attack.seed, "Attack seed");
  attack_cmd->add_option("--max-fraction", attack.max_fraction, "Largest perturbed share of words");
  attack_cmd->add_option("--budget", attack.budget, "Largest number of edited words");
  attack_cmd->add_option("--limit", attack.limit, "Stop after this many pairs (0: no limit)");

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Split pairs into calibration and evaluation sets");
  split_cmd->add_option("--pairs", split.pairs, "Pairs JSONL (repeatable)")->required();
  split_cmd->add_option("--fraction", split.fraction, "Calibration share");
  split_cmd->add_option("--seed", split.seed, "Split seed");
  split_cmd->add_option("--calib-out", split.calib_out, "Calibration pairs JSONL")->required();
  split_cmd->add_option("--eval-out", split.eval_out, "Evaluation pairs JSONL")->required();

  CalibrateArgs calib;
  auto* calib_cmd = app.add_subcommand("calibrate", "Choose the F1-optimal threshold");
  calib_cmd->add_option("--pairs", calib.pairs, "Pairs JSONL")->required();
  calib_cmd->add_option("--config", calib.config, "Config JSON")->required();
  calib_cmd->add_option("--model", calib.model, "Model bundle, overrides the config backend");
  calib_cmd->add_option("--out", calib.out, "Calibration JSON")->required();

  DetectArgs det;
  auto* detect_cmd = app.add_subcommand("detect", "Classify one text as normal or adversarial");
  detect_cmd->add_option("--text", det.text, "Input text")->required();
  detect_cmd->add_option("--config", det.config, "Config JSON")->required();
  detect_cmd->add_option("--model", det.model, "Model bundle, overrides the config backend");
  detect_cmd->add_option("--calib", det.calib, "Calibration JSON")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a calibrated detector on pairs");
  eval_cmd->add_option("--pairs", ev.pairs, "Pairs JSONL")->required();
  eval_cmd->add_option("--config", ev.config, "Config JSON")->required();
  eval_cmd->add_option("--model", ev.model, "Model bundle, overrides the config backend");
  eval_cmd->add_option("--calib", ev.calib, "Calibration JSON")->required();
  eval_cmd->add_option("--report", ev.report, "Report JSON");
  eval_cmd->add_option("--hist", ev.hist, "Per-example score CSV");

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze-oracle", "Oracle non-keyword analysis");
  analyze_cmd->add_option("--pairs", an.pairs, "Pairs JSONL")->required();
  analyze_cmd->add_option("--config", an.config, "Config JSON")->required();
  analyze_cmd->add_option("--model", an.model, "Model bundle, overrides the config backend");
  analyze_cmd->add_flag("--gamma-sweep", an.gamma_sweep, "Report every gamma from 0 to k");
  analyze_cmd->add_option("--out", an.out, "Analysis JSON");
  analyze_cmd->add_option("--csv", an.csv, "Per-example oracle scores CSV");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve-mock", "Serve the inference protocol from a toy bundle");
  serve_cmd->add_option("--model", serve.model, "Model bundle JSON")->required();
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port (0 picks a free one)");
  serve_cmd->add_flag("--no-gradients", serve.no_gradients, "Answer 501 on the gradients endpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen_cmd) return run_gen_corpus(gen);
    if (*train_cmd) return run_train(train);
    if (*attack_cmd) return run_attack(attack);
    if (*split_cmd) return run_split(split);
    if (*calib_cmd) return run_calibrate(calib);
    if (*detect_cmd) return run_detect(det);
    if (*eval_cmd) return run_eval(ev);
    if (*analyze_cmd) return run_analyze(an);
    if (*serve_cmd) return run_serve(serve);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_backend_error(e.code()) ? kExitBackend : kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 1;
}
