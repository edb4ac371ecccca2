#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tea/error.hpp"
#include "tea/net.hpp"

namespace tea::gateway {

// Pipeline stage that issued a request. Judge requests must be greedy.
enum class Tag { kPlan, kRefine, kCodegen, kFix, kJudge, kQuery };

std::string_view to_string(Tag tag);
std::optional<Tag> parse_tag(std::string_view s);

struct ImageInput {
  std::string mime = "image/jpeg";
  std::string base64;
};

struct ChatRequest {
  std::string model_id;  // provider-qualified, e.g. "openai/gpt-4o"
  std::string system;
  std::string user;
  double temperature = 0.7;
  int max_output_tokens = 4096;
  Tag tag = Tag::kPlan;
  std::vector<ImageInput> images;
};

struct ChatResponse {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double latency_ms = 0.0;
  bool truncated = false;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class RateLimited : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  ProviderError(int status, std::string body);
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

class MissingPrice : public Error {
 public:
  explicit MissingPrice(std::string model_id)
      : Error("no price configured for model " + model_id), model_id_(std::move(model_id)) {}
  const std::string& model_id() const { return model_id_; }

 private:
  std::string model_id_;
};

// ---------------------------------------------------------------------------
// Usage accounting

struct UsageRecord {
  Tag tag = Tag::kPlan;
  std::string model_id;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double latency_ms = 0.0;

  bool operator==(const UsageRecord&) const = default;
};

struct Price {
  double input_per_million = 0.0;   // USD
  double output_per_million = 0.0;  // USD

  bool operator==(const Price&) const = default;
};

using PriceTable = std::map<std::string, Price, std::less<>>;

struct UsageLedger {
  std::string label;  // configuration the ledger belongs to, e.g. "openai/gpt-4o"
  std::vector<UsageRecord> records;
  PriceTable prices;

  std::int64_t total_input_tokens() const;
  std::int64_t total_output_tokens() const;
  double total_latency_ms() const;
};

// Sum over records of in*in_price/1e6 + out*out_price/1e6, unrounded.
double ledger_cost(const UsageLedger& ledger);
// Two decimals, the only place a cost is rounded.
std::string format_usd(double amount);
UsageLedger concat(const UsageLedger& a, const UsageLedger& b);

nlohmann::json to_json(const UsageLedger& ledger);
UsageLedger ledger_from_json(const nlohmann::json& j);
PriceTable prices_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Clients

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Appends one ledger record per call on top of a delegate client.
class MeteredClient final : public ChatClient {
 public:
  MeteredClient(ChatClient& inner, std::string label, PriceTable prices);
  ChatResponse complete(const ChatRequest& request) override;
  UsageLedger snapshot() const;
  std::size_t call_count() const;

 private:
  ChatClient& inner_;
  mutable std::mutex mu_;
  UsageLedger ledger_;
};

// One provider attempt. Implementations throw TransientFailure for retryable
// outcomes, AuthError or ProviderError otherwise.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse send(const ChatRequest& request, std::string_view remote_model) = 0;
};

class TransientFailure : public Error {
 public:
  TransientFailure(int status, std::string body)
      : Error("transient provider failure " + std::to_string(status)), status_(status),
        body_(std::move(body)) {}
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

struct ProviderConfig {
  std::string kind = "openai";  // openai | anthropic
  std::string base_url;
  std::string api_key_env;
  int max_in_flight = 4;
  double requests_per_second = 2.0;
  int burst = 4;
  int timeout_s = 300;
  bool send_temperature = true;
};

struct ModelEntry {
  std::string provider;
  std::string remote_name;
};

struct GatewayConfig {
  std::map<std::string, ProviderConfig, std::less<>> providers;
  std::map<std::string, ModelEntry, std::less<>> models;
  PriceTable prices;
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  std::filesystem::path mock_dir;
  std::filesystem::path record_dir;
};

GatewayConfig gateway_config_from_json(const nlohmann::json& j);

// Token bucket with an in-flight cap. acquire() blocks until both allow.
class RateLimiter {
 public:
  RateLimiter(double rate_per_second, int burst, int max_in_flight);

  class Permit {
   public:
    explicit Permit(RateLimiter* owner) : owner_(owner) {}
    Permit(Permit&& o) noexcept : owner_(std::exchange(o.owner_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit();

   private:
    RateLimiter* owner_;
  };

  Permit acquire();
  int in_flight() const;

 private:
  void release();

  const double rate_;
  const double capacity_;
  const int max_in_flight_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  int in_flight_ = 0;
};

// Provider-routing client: registry lookup, request validation, rate limits,
// retries with exponential backoff, and a process-level ledger.
class Gateway final : public ChatClient {
 public:
  Gateway(GatewayConfig config, std::map<std::string, std::unique_ptr<Provider>, std::less<>> providers);

  ChatResponse complete(const ChatRequest& request) override;
  UsageLedger ledger() const;
  const GatewayConfig& config() const { return config_; }

 private:
  struct Route {
    Provider* provider;
    RateLimiter* limiter;
  };

  GatewayConfig config_;
  std::map<std::string, std::unique_ptr<Provider>, std::less<>> providers_;
  std::map<std::string, std::unique_ptr<RateLimiter>, std::less<>> limiters_;
  mutable std::mutex ledger_mu_;
  UsageLedger ledger_;
};

// Throws std::invalid_argument on contract violations (temperature range,
// non-greedy judge requests, empty model id).
void validate_request(const ChatRequest& request);

// ---------------------------------------------------------------------------
// Offline operation

// Digest of (model_id, whitespace-normalized system, whitespace-normalized
// user, temperature, image payloads). Names mock fixture files.
std::string request_digest(const ChatRequest& request);

// Rough 4-characters-per-token estimate used by offline providers.
std::int64_t estimate_tokens(std::string_view text);

// Produces response text for requests that have no recorded fixture.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::string respond(const ChatRequest& request) = 0;
};

// Serves <mock_dir>/<digest>.txt byte-exact; falls back to a Responder when
// one is supplied, else fails with ProviderError(404).
class MockProvider final : public Provider {
 public:
  MockProvider(std::filesystem::path fixture_dir, std::shared_ptr<Responder> fallback = nullptr);
  ChatResponse send(const ChatRequest& request, std::string_view remote_model) override;

  std::filesystem::path fixture_path(const ChatRequest& request) const;

 private:
  std::filesystem::path dir_;
  std::shared_ptr<Responder> fallback_;
};

// Writes every response as a fixture so a live run can be replayed offline.
class FixtureRecorder final : public ChatClient {
 public:
  FixtureRecorder(ChatClient& inner, std::filesystem::path dir);
  ChatResponse complete(const ChatRequest& request) override;

 private:
  ChatClient& inner_;
  std::filesystem::path dir_;
};

std::unique_ptr<Provider> make_http_provider(const ProviderConfig& config,
                                             std::shared_ptr<net::HttpTransport> transport);

// Builds a gateway whose providers are either the configured HTTP providers
// or, when mock is set, one MockProvider shared by every registered model.
std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config, bool mock,
                                      std::shared_ptr<Responder> fallback = nullptr,
                                      std::shared_ptr<net::HttpTransport> transport = nullptr);

}  // namespace tea::gateway
