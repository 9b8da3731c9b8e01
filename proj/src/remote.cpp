#include "mlmd/remote.hpp"

#include <cmath>

#include <httplib.h>

namespace mlmd {

namespace protocol {

using nlohmann::json;

json classify_request(std::span<const TokenizedText> texts) {
  json arr = json::array();
  for (const auto& t : texts) arr.push_back(t.raw());
  return {{"texts", arr}};
}

json fill_mask_request(std::span<const std::string> words, std::size_t mask_index,
                       std::size_t top_k) {
  return {{"words", std::vector<std::string>(words.begin(), words.end())},
          {"mask_index", mask_index},
          {"top_k", top_k}};
}

json gradients_request(std::span<const std::string> words, ClassLabel target) {
  return {{"words", std::vector<std::string>(words.begin(), words.end())},
          {"target_label", target.value}};
}

namespace {

[[noreturn]] void violation(const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, what);
}

const json& field(const json& body, const char* name) {
  if (!body.is_object() || !body.contains(name)) violation(std::string("missing field '") + name + "'");
  return body.at(name);
}

}  // namespace

std::vector<ConfidenceVector> parse_classify(const json& body, std::size_t expected_rows) {
  const json& probs = field(body, "probs");
  if (!probs.is_array() || probs.size() != expected_rows) {
    violation("'probs' must be an array with one row per text");
  }
  std::vector<ConfidenceVector> out;
  out.reserve(probs.size());
  for (const auto& row : probs) {
    if (!row.is_array() || row.size() < 2) violation("each probs row needs at least two numbers");
    std::vector<double> values;
    for (const auto& v : row) {
      if (!v.is_number()) violation("probs entries must be numbers");
      values.push_back(v.get<double>());
    }
    try {
      out.emplace_back(std::move(values), kProbTolerance);
    } catch (const Error& e) {
      violation(std::string("probs row is not a distribution: ") + e.what());
    }
  }
  return out;
}

std::vector<FillCandidate> parse_fill_mask(const json& body, std::size_t top_k) {
  const json& cands = field(body, "candidates");
  if (!cands.is_array()) violation("'candidates' must be an array");
  if (cands.size() > top_k) violation("more candidates than top_k");
  std::vector<FillCandidate> out;
  for (const auto& c : cands) {
    if (!c.is_object() || !c.contains("word") || !c.contains("score") || !c.at("word").is_string() ||
        !c.at("score").is_number()) {
      violation("candidate must be {\"word\": string, \"score\": number}");
    }
    FillCandidate fc{c.at("word").get<std::string>(), c.at("score").get<double>()};
    if (!is_single_word(fc.word)) violation("candidate '" + fc.word + "' is not a whole word");
    if (!out.empty() && fc.score > out.back().score) violation("candidate scores must be non-increasing");
    out.push_back(std::move(fc));
  }
  return out;
}

WordGradients parse_gradients(const json& body, std::size_t expected_words) {
  const json& loss = field(body, "loss");
  const json& norms = field(body, "word_grad_norms");
  if (!loss.is_number()) violation("'loss' must be a number");
  if (!norms.is_array() || norms.size() != expected_words) {
    violation("'word_grad_norms' must have one entry per word");
  }
  WordGradients out;
  out.loss = loss.get<double>();
  for (const auto& v : norms) {
    if (!v.is_number() || v.get<double>() < 0.0 || !std::isfinite(v.get<double>())) {
      violation("gradient norms must be finite and non-negative");
    }
    out.norms.push_back(v.get<double>());
  }
  return out;
}

}  // namespace protocol

ResponseCache::ResponseCache(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::kInvalidArgument, "cache capacity must be positive");
}

std::string ResponseCache::key_of(const std::string& endpoint, const std::string& request) {
  return endpoint + '\n' + request;
}

std::optional<std::string> ResponseCache::get(const std::string& endpoint,
                                              const std::string& request) {
  std::lock_guard lock(mu_);
  auto it = index_.find(key_of(endpoint, request));
  if (it == index_.end()) {
    ++misses_;
    return std::nullopt;
  }
  lru_.splice(lru_.begin(), lru_, it->second);
  ++hits_;
  return it->second->second;
}

void ResponseCache::put(const std::string& endpoint, const std::string& request,
                        std::string response) {
  std::lock_guard lock(mu_);
  auto key = key_of(endpoint, request);
  if (auto it = index_.find(key); it != index_.end()) {
    it->second->second = std::move(response);
    lru_.splice(lru_.begin(), lru_, it->second);
    return;
  }
  lru_.emplace_front(key, std::move(response));
  index_.emplace(std::move(key), lru_.begin());
  while (lru_.size() > capacity_) {
    index_.erase(lru_.back().first);
    lru_.pop_back();
  }
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return lru_.size();
}

void RemoteBackendConfig::validate() const {
  if (timeout.count() <= 0) throw Error(ErrorCode::kInvalidArgument, "timeout must be positive");
  if (max_in_flight < 1) throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be >= 1");
  if (retry.max_attempts < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one attempt");
  if (class_count < 2) throw Error(ErrorCode::kInvalidArgument, "class_count must be >= 2");
}

RemoteClient::RemoteClient(RemoteBackendConfig config, std::shared_ptr<ResponseCache> cache)
    : config_(std::move(config)), cache_(std::move(cache)) {
  config_.validate();
  std::string rest = config_.base_url;
  const std::string scheme = "http://";
  if (rest.rfind(scheme, 0) == 0) {
    rest = rest.substr(scheme.size());
  } else if (rest.find("://") != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "only http:// URLs are supported: " + config_.base_url);
  }
  if (auto slash = rest.find('/'); slash != std::string::npos) rest = rest.substr(0, slash);
  if (auto colon = rest.rfind(':'); colon != std::string::npos) {
    host_ = rest.substr(0, colon);
    try {
      port_ = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad port in " + config_.base_url);
    }
  } else {
    host_ = rest;
  }
  if (host_.empty()) throw Error(ErrorCode::kInvalidArgument, "missing host in " + config_.base_url);
}

std::string RemoteClient::send(const std::string& endpoint, const std::string& body) const {
  {
    std::unique_lock lock(slots_mu_);
    slots_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    const RemoteClient* self;
    ~Release() {
      {
        std::lock_guard lock(self->slots_mu_);
        --self->in_flight_;
      }
      self->slots_cv_.notify_one();
    }
  } release{this};

  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  httplib::Headers headers;
  if (config_.auth_token) headers.emplace("Authorization", "Bearer " + *config_.auth_token);

  Error last(ErrorCode::kBackendFailure, "no attempt made");
  for (std::size_t attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.retry.backoff * attempt);
    httplib::Client client(host_, port_);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    ++network_calls_;
    auto res = client.Post(endpoint, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      last = Error(timed_out ? ErrorCode::kTimeout : ErrorCode::kBackendFailure,
                   endpoint + ": " + httplib::to_string(err));
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    std::string detail = res->body;
    try {
      auto j = nlohmann::json::parse(res->body);
      if (j.is_object() && j.contains("error") && j.at("error").is_string()) detail = j.at("error");
    } catch (const nlohmann::json::exception&) {
    }
    last = Error(ErrorCode::kHttpStatus, endpoint + " returned " + std::to_string(res->status) + ": " + detail);
    if (res->status < 500) break;
  }
  throw last;
}

nlohmann::json RemoteClient::post(const std::string& endpoint, const nlohmann::json& request) const {
  const std::string body = request.dump();
  std::string response;
  if (cache_) {
    if (auto hit = cache_->get(endpoint, body)) {
      response = std::move(*hit);
    } else {
      response = send(endpoint, body);
      cache_->put(endpoint, body, response);
    }
  } else {
    response = send(endpoint, body);
  }
  try {
    return nlohmann::json::parse(response);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, endpoint + ": response is not JSON: " + e.what());
  }
}

std::vector<ConfidenceVector> RemoteClient::classify(std::span<const TokenizedText> texts) const {
  auto probs = protocol::parse_classify(post(protocol::kClassify, protocol::classify_request(texts)),
                                        texts.size());
  for (const auto& p : probs) {
    if (p.class_count() != config_.class_count) {
      throw Error(ErrorCode::kSchemaViolation, "server returned an unexpected class count");
    }
  }
  return probs;
}

std::vector<FillCandidate> RemoteClient::fill_mask(std::span<const std::string> words,
                                                   std::size_t mask_index,
                                                   std::size_t top_k) const {
  return protocol::parse_fill_mask(
      post(protocol::kFillMask, protocol::fill_mask_request(words, mask_index, top_k)), top_k);
}

WordGradients RemoteClient::gradients(std::span<const std::string> words, ClassLabel target) const {
  return protocol::parse_gradients(
      post(protocol::kGradients, protocol::gradients_request(words, target)), words.size());
}

std::vector<ConfidenceVector> RemoteVictim::classify(std::span<const TokenizedText> texts) const {
  return client_->classify(texts);
}

WordGradients RemoteVictim::word_gradients(const TokenizedText& x, ClassLabel target) const {
  try {
    return client_->gradients(x.words(), target);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kHttpStatus && std::string(e.what()).find(" 501") != std::string::npos) {
      throw Error(ErrorCode::kGradientUnavailable, e.what());
    }
    throw;
  }
}

std::vector<FillCandidate> RemoteMaskedLM::fill(std::span<const std::string> rendered,
                                                std::size_t masked_position, std::size_t k) const {
  return client_->fill_mask(rendered, masked_position, k);
}

MockServer::MockServer(const VictimModel& victim, const MaskedLanguageModel& mlm)
    : victim_(victim), mlm_(mlm), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

MockServer::~MockServer() { stop(); }

namespace {

void reply_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

template <typename Handler>
auto guarded(std::atomic<std::size_t>& counter, Handler handler) {
  return [&counter, handler](const httplib::Request& req, httplib::Response& res) {
    ++counter;
    try {
      const auto body = nlohmann::json::parse(req.body);
      res.set_content(handler(body).dump(), "application/json");
    } catch (const nlohmann::json::exception& e) {
      reply_error(res, 400, e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kGradientUnavailable) {
        reply_error(res, 501, e.what());
      } else if (is_backend_error(e.code())) {
        reply_error(res, 500, e.what());
      } else {
        reply_error(res, 400, e.what());
      }
    }
  };
}

}  // namespace

void MockServer::install_routes() {
  server_->Post(protocol::kClassify, guarded(requests_, [this](const nlohmann::json& body) {
    std::vector<TokenizedText> texts;
    for (const auto& t : body.at("texts")) texts.push_back(tokenize(t.get<std::string>()));
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : victim_.classify(texts)) rows.push_back(c.probs());
    return nlohmann::json{{"probs", rows}};
  }));
  server_->Post(protocol::kFillMask, guarded(requests_, [this](const nlohmann::json& body) {
    const auto words = body.at("words").get<std::vector<std::string>>();
    const auto index = body.at("mask_index").get<std::size_t>();
    const auto top_k = body.at("top_k").get<std::size_t>();
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : mlm_.fill(words, index, top_k)) {
      cands.push_back({{"word", c.word}, {"score", c.score}});
    }
    return nlohmann::json{{"candidates", cands}};
  }));
  server_->Post(protocol::kGradients, guarded(requests_, [this](const nlohmann::json& body) {
    const auto words = body.at("words").get<std::vector<std::string>>();
    const ClassLabel target{body.at("target_label").get<int>()};
    const auto profile = importance_scores(victim_, from_words(words), target);
    return nlohmann::json{{"loss", profile.loss}, {"word_grad_norms", profile.scores}};
  }));
}

int MockServer::start(const std::string& host, int port) {
  if (thread_.joinable()) throw Error(ErrorCode::kInvalidArgument, "server already running");
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::kBackendFailure, "could not bind mock server");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockServer::listen_blocking(const std::string& host, int port) {
  port_ = port;
  if (!server_->listen(host, port)) {
    throw Error(ErrorCode::kBackendFailure, "could not listen on " + host + ":" + std::to_string(port));
  }
}

void MockServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mlmd
