#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "mlmd/core.hpp"
#include "mlmd/importance.hpp"
#include "mlmd/reconstruction.hpp"

#include <json.hpp>

namespace httplib {
class Server;
}

namespace mlmd {

// Wire protocol (JSON over HTTP POST, UTF-8):
//   /v1/classify  {"texts":[...]}                          -> {"probs":[[...],...]}
//   /v1/fill_mask {"words":[...],"mask_index":i,"top_k":k} -> {"candidates":[{"word","score"},...]}
//   /v1/gradients {"words":[...],"target_label":y}         -> {"loss":x,"word_grad_norms":[...]}
// mask_index and target_label are 1-based. Errors are non-2xx with {"error":msg}.
namespace protocol {

inline constexpr const char* kClassify = "/v1/classify";
inline constexpr const char* kFillMask = "/v1/fill_mask";
inline constexpr const char* kGradients = "/v1/gradients";
inline constexpr double kProbTolerance = 1e-6;

nlohmann::json classify_request(std::span<const TokenizedText> texts);
nlohmann::json fill_mask_request(std::span<const std::string> words, std::size_t mask_index,
                                 std::size_t top_k);
nlohmann::json gradients_request(std::span<const std::string> words, ClassLabel target);

// Parsers validate the response schema and throw kSchemaViolation.
std::vector<ConfidenceVector> parse_classify(const nlohmann::json& body, std::size_t expected_rows);
std::vector<FillCandidate> parse_fill_mask(const nlohmann::json& body, std::size_t top_k);
WordGradients parse_gradients(const nlohmann::json& body, std::size_t expected_words);

}  // namespace protocol

// Bounded LRU cache of raw response bodies keyed by endpoint and canonical
// request body. Safe for concurrent use.
class ResponseCache {
 public:
  explicit ResponseCache(std::size_t capacity = 4096);

  std::optional<std::string> get(const std::string& endpoint, const std::string& request);
  void put(const std::string& endpoint, const std::string& request, std::string response);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  using Entry = std::pair<std::string, std::string>;
  static std::string key_of(const std::string& endpoint, const std::string& request);

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> lru_;
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::chrono::milliseconds backoff{50};
};

struct RemoteBackendConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::chrono::milliseconds timeout{5000};
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  std::optional<std::string> auth_token;
  std::size_t class_count = 2;

  void validate() const;
};

// Shared transport: cache lookup, bounded in-flight requests, retries on
// transport errors and 5xx. All protocol calls are idempotent.
class RemoteClient {
 public:
  explicit RemoteClient(RemoteBackendConfig config, std::shared_ptr<ResponseCache> cache = nullptr);

  nlohmann::json post(const std::string& endpoint, const nlohmann::json& request) const;

  std::vector<ConfidenceVector> classify(std::span<const TokenizedText> texts) const;
  std::vector<FillCandidate> fill_mask(std::span<const std::string> words, std::size_t mask_index,
                                       std::size_t top_k) const;
  WordGradients gradients(std::span<const std::string> words, ClassLabel target) const;

  const RemoteBackendConfig& config() const { return config_; }
  std::size_t network_calls() const { return network_calls_; }
  const std::shared_ptr<ResponseCache>& cache() const { return cache_; }

 private:
  std::string send(const std::string& endpoint, const std::string& body) const;

  RemoteBackendConfig config_;
  std::shared_ptr<ResponseCache> cache_;
  std::string host_;
  int port_ = 80;
  mutable std::mutex slots_mu_;
  mutable std::condition_variable slots_cv_;
  mutable std::size_t in_flight_ = 0;
  mutable std::atomic<std::size_t> network_calls_{0};
};

class RemoteVictim : public GradientCapableVictim {
 public:
  explicit RemoteVictim(std::shared_ptr<const RemoteClient> client) : client_(std::move(client)) {}

  std::vector<ConfidenceVector> classify(std::span<const TokenizedText> texts) const override;
  std::size_t class_count() const override { return client_->config().class_count; }
  WordGradients word_gradients(const TokenizedText& x, ClassLabel target) const override;

 private:
  std::shared_ptr<const RemoteClient> client_;
};

class RemoteMaskedLM : public MaskedLanguageModel {
 public:
  explicit RemoteMaskedLM(std::shared_ptr<const RemoteClient> client) : client_(std::move(client)) {}

  std::vector<FillCandidate> fill(std::span<const std::string> rendered,
                                  std::size_t masked_position, std::size_t k) const override;
  std::size_t max_in_flight() const override { return client_->config().max_in_flight; }

 private:
  std::shared_ptr<const RemoteClient> client_;
};

// Serves the protocol from in-process models. The gradients endpoint answers
// 501 when the victim is not gradient-capable.
class MockServer {
 public:
  MockServer(const VictimModel& victim, const MaskedLanguageModel& mlm);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds to `port` (0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  void listen_blocking(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::size_t requests() const { return requests_; }

 private:
  void install_routes();

  const VictimModel& victim_;
  const MaskedLanguageModel& mlm_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace mlmd
