#include "tea/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tea/util.hpp"

namespace tea::gateway {

using nlohmann::json;

namespace {

constexpr std::pair<Tag, std::string_view> kTagNames[] = {
    {Tag::kPlan, "plan"}, {Tag::kRefine, "refine"}, {Tag::kCodegen, "codegen"},
    {Tag::kFix, "fix"},   {Tag::kJudge, "judge"},   {Tag::kQuery, "query"},
};

double record_cost(const UsageRecord& r, const PriceTable& prices) {
  auto it = prices.find(r.model_id);
  if (it == prices.end()) throw MissingPrice(r.model_id);
  return static_cast<double>(r.input_tokens) * it->second.input_per_million / 1e6 +
         static_cast<double>(r.output_tokens) * it->second.output_per_million / 1e6;
}

}  // namespace

std::string_view to_string(Tag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "?";
}

std::optional<Tag> parse_tag(std::string_view s) {
  for (const auto& [t, name] : kTagNames) {
    if (name == s) return t;
  }
  return std::nullopt;
}

ProviderError::ProviderError(int status, std::string body)
    : Error(fmt::format("provider error {}: {}", status, body.substr(0, 300))),
      status_(status),
      body_(std::move(body)) {}

// ---------------------------------------------------------------------------

std::int64_t UsageLedger::total_input_tokens() const {
  std::int64_t n = 0;
  for (const auto& r : records) n += r.input_tokens;
  return n;
}

std::int64_t UsageLedger::total_output_tokens() const {
  std::int64_t n = 0;
  for (const auto& r : records) n += r.output_tokens;
  return n;
}

double UsageLedger::total_latency_ms() const {
  double t = 0.0;
  for (const auto& r : records) t += r.latency_ms;
  return t;
}

double ledger_cost(const UsageLedger& ledger) {
  double total = 0.0;
  for (const auto& r : ledger.records) total += record_cost(r, ledger.prices);
  return total;
}

std::string format_usd(double amount) { return fmt::format("{:.2f}", amount); }

UsageLedger concat(const UsageLedger& a, const UsageLedger& b) {
  UsageLedger out = a;
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  for (const auto& [model, price] : b.prices) out.prices.try_emplace(model, price);
  return out;
}

json to_json(const UsageLedger& ledger) {
  json records = json::array();
  for (const auto& r : ledger.records) {
    records.push_back({{"tag", to_string(r.tag)},
                       {"model_id", r.model_id},
                       {"input_tokens", r.input_tokens},
                       {"output_tokens", r.output_tokens},
                       {"latency_ms", r.latency_ms}});
  }
  json prices = json::object();
  for (const auto& [model, p] : ledger.prices) {
    prices[model] = json::array({p.input_per_million, p.output_per_million});
  }
  return {{"label", ledger.label}, {"records", records}, {"prices", prices}};
}

PriceTable prices_from_json(const json& j) {
  PriceTable table;
  for (const auto& [model, v] : j.items()) {
    if (!v.is_array() || v.size() != 2) {
      throw std::invalid_argument("price for " + model + " must be [input, output] per 1M tokens");
    }
    table[model] = Price{v[0].get<double>(), v[1].get<double>()};
  }
  return table;
}

UsageLedger ledger_from_json(const json& j) {
  UsageLedger ledger;
  ledger.label = j.value("label", "");
  for (const auto& r : j.at("records")) {
    auto tag = parse_tag(r.at("tag").get<std::string>());
    if (!tag) throw std::invalid_argument("unknown ledger tag " + r.at("tag").dump());
    ledger.records.push_back(UsageRecord{*tag, r.at("model_id").get<std::string>(),
                                         r.at("input_tokens").get<std::int64_t>(),
                                         r.at("output_tokens").get<std::int64_t>(),
                                         r.value("latency_ms", 0.0)});
  }
  if (j.contains("prices")) ledger.prices = prices_from_json(j.at("prices"));
  return ledger;
}

// ---------------------------------------------------------------------------

MeteredClient::MeteredClient(ChatClient& inner, std::string label, PriceTable prices)
    : inner_(inner) {
  ledger_.label = std::move(label);
  ledger_.prices = std::move(prices);
}

ChatResponse MeteredClient::complete(const ChatRequest& request) {
  ChatResponse response = inner_.complete(request);
  std::lock_guard lock(mu_);
  ledger_.records.push_back(UsageRecord{request.tag, request.model_id, response.input_tokens,
                                        response.output_tokens, response.latency_ms});
  return response;
}

UsageLedger MeteredClient::snapshot() const {
  std::lock_guard lock(mu_);
  return ledger_;
}

std::size_t MeteredClient::call_count() const {
  std::lock_guard lock(mu_);
  return ledger_.records.size();
}

// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(double rate_per_second, int burst, int max_in_flight)
    : rate_(rate_per_second),
      capacity_(std::max(1, burst)),
      max_in_flight_(std::max(1, max_in_flight)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

RateLimiter::Permit::~Permit() {
  if (owner_ != nullptr) owner_->release();
}

RateLimiter::Permit RateLimiter::acquire() {
  std::unique_lock lock(mu_);
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    if (rate_ > 0.0) {
      double elapsed = std::chrono::duration<double>(now - last_).count();
      tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    } else {
      tokens_ = capacity_;
    }
    last_ = now;
    if (in_flight_ < max_in_flight_ && tokens_ >= 1.0) {
      tokens_ -= 1.0;
      ++in_flight_;
      return Permit(this);
    }
    auto wait = std::chrono::milliseconds(5);
    if (rate_ > 0.0 && tokens_ < 1.0) {
      wait = std::max(wait, std::chrono::milliseconds(
                                static_cast<long>(std::ceil((1.0 - tokens_) / rate_ * 1000.0))));
    }
    cv_.wait_for(lock, wait);
  }
}

void RateLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

int RateLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

// ---------------------------------------------------------------------------

void validate_request(const ChatRequest& request) {
  if (request.model_id.empty()) throw std::invalid_argument("request has no model id");
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw std::invalid_argument(fmt::format("temperature {} outside [0,2]", request.temperature));
  }
  if (request.tag == Tag::kJudge && request.temperature != 0.0) {
    throw std::invalid_argument("judge requests must use temperature 0");
  }
  if (request.max_output_tokens <= 0) throw std::invalid_argument("max_output_tokens must be positive");
}

Gateway::Gateway(GatewayConfig config,
                 std::map<std::string, std::unique_ptr<Provider>, std::less<>> providers)
    : config_(std::move(config)), providers_(std::move(providers)) {
  for (const auto& [name, _] : providers_) {
    auto it = config_.providers.find(name);
    ProviderConfig pc = it != config_.providers.end() ? it->second : ProviderConfig{};
    limiters_[name] = std::make_unique<RateLimiter>(pc.requests_per_second, pc.burst, pc.max_in_flight);
  }
  ledger_.prices = config_.prices;
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  validate_request(request);
  auto model = config_.models.find(request.model_id);
  if (model == config_.models.end()) {
    throw ProviderError(404, "model not in registry: " + request.model_id);
  }
  auto provider = providers_.find(model->second.provider);
  if (provider == providers_.end()) {
    throw ProviderError(404, fmt::format("provider '{}' for model {} is not configured",
                                         model->second.provider, request.model_id));
  }
  RateLimiter& limiter = *limiters_.at(model->second.provider);

  ChatResponse response;
  for (int attempt = 0;; ++attempt) {
    try {
      auto permit = limiter.acquire();
      response = provider->second->send(request, model->second.remote_name);
      break;
    } catch (const TransientFailure& e) {
      if (attempt >= config_.max_retries) {
        if (e.status() == 429) {
          throw RateLimited(fmt::format("rate limited by provider for {} after {} attempts",
                                        request.model_id, attempt + 1));
        }
        throw ProviderError(e.status(), e.body());
      }
      auto delay = config_.backoff * (1 << std::min(attempt, 10));
      spdlog::debug("transient failure {} on {}, retrying in {} ms", e.status(), request.model_id,
                    delay.count());
      std::this_thread::sleep_for(delay);
    }
  }
  if (response.input_tokens < 0 || response.output_tokens < 0) {
    throw ProviderError(500, "provider reported negative token counts");
  }
  std::lock_guard lock(ledger_mu_);
  ledger_.records.push_back(UsageRecord{request.tag, request.model_id, response.input_tokens,
                                        response.output_tokens, response.latency_ms});
  return response;
}

UsageLedger Gateway::ledger() const {
  std::lock_guard lock(ledger_mu_);
  return ledger_;
}

GatewayConfig gateway_config_from_json(const json& j) {
  GatewayConfig cfg;
  const json providers = j.value("providers", json::object());
  for (const auto& [name, p] : providers.items()) {
    ProviderConfig pc;
    pc.kind = p.value("kind", pc.kind);
    pc.base_url = p.value("base_url", "");
    pc.api_key_env = p.value("api_key_env", "");
    pc.max_in_flight = p.value("max_in_flight", pc.max_in_flight);
    pc.requests_per_second = p.value("requests_per_second", pc.requests_per_second);
    pc.burst = p.value("burst", pc.burst);
    pc.timeout_s = p.value("timeout_s", pc.timeout_s);
    pc.send_temperature = p.value("send_temperature", pc.send_temperature);
    cfg.providers[name] = pc;
  }
  const json models = j.value("models", json::object());
  for (const auto& [id, m] : models.items()) {
    cfg.models[id] = ModelEntry{m.at("provider").get<std::string>(), m.value("name", id)};
  }
  cfg.prices = prices_from_json(j.value("prices", json::object()));
  cfg.max_retries = j.value("max_retries", cfg.max_retries);
  cfg.backoff = std::chrono::milliseconds(j.value("backoff_ms", 500));
  cfg.mock_dir = j.value("mock_dir", "");
  cfg.record_dir = j.value("record_dir", "");
  return cfg;
}

// ---------------------------------------------------------------------------

std::string request_digest(const ChatRequest& request) {
  std::string canon;
  canon += request.model_id;
  canon += '\x1f';
  canon += util::normalize_ws(request.system);
  canon += '\x1f';
  canon += util::normalize_ws(request.user);
  canon += '\x1f';
  canon += fmt::format("{:.3f}", request.temperature);
  for (const auto& img : request.images) {
    canon += '\x1f';
    canon += img.mime;
    canon += ':';
    canon += util::sha256_hex(img.base64);
  }
  return util::sha256_hex(canon);
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

MockProvider::MockProvider(std::filesystem::path fixture_dir, std::shared_ptr<Responder> fallback)
    : dir_(std::move(fixture_dir)), fallback_(std::move(fallback)) {}

std::filesystem::path MockProvider::fixture_path(const ChatRequest& request) const {
  return dir_ / (request_digest(request) + ".txt");
}

ChatResponse MockProvider::send(const ChatRequest& request, std::string_view) {
  ChatResponse response;
  auto path = fixture_path(request);
  if (!dir_.empty() && std::filesystem::is_regular_file(path)) {
    response.text = util::read_file(path);
  } else if (fallback_) {
    response.text = fallback_->respond(request);
  } else {
    throw ProviderError(404, "no mock fixture " + path.filename().string());
  }
  response.input_tokens = estimate_tokens(request.system) + estimate_tokens(request.user) +
                          static_cast<std::int64_t>(request.images.size()) * 85;
  response.output_tokens = estimate_tokens(response.text);
  return response;
}

FixtureRecorder::FixtureRecorder(ChatClient& inner, std::filesystem::path dir)
    : inner_(inner), dir_(std::move(dir)) {}

ChatResponse FixtureRecorder::complete(const ChatRequest& request) {
  ChatResponse response = inner_.complete(request);
  util::write_file(dir_ / (request_digest(request) + ".txt"), response.text);
  return response;
}

std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config, bool mock,
                                      std::shared_ptr<Responder> fallback,
                                      std::shared_ptr<net::HttpTransport> transport) {
  std::map<std::string, std::unique_ptr<Provider>, std::less<>> providers;
  if (mock) {
    GatewayConfig cfg = config;
    for (auto& [_, m] : cfg.models) m.provider = "mock";
    ProviderConfig unlimited;
    unlimited.requests_per_second = 0.0;
    unlimited.max_in_flight = 64;
    unlimited.burst = 64;
    cfg.providers["mock"] = unlimited;
    providers["mock"] = std::make_unique<MockProvider>(cfg.mock_dir, std::move(fallback));
    return std::make_unique<Gateway>(std::move(cfg), std::move(providers));
  }
  if (!transport) transport = net::default_transport();
  for (const auto& [name, pc] : config.providers) {
    providers[name] = make_http_provider(pc, transport);
  }
  return std::make_unique<Gateway>(config, std::move(providers));
}

}  // namespace tea::gateway
