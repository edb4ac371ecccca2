#include <chrono>
#include <cstdlib>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tea/gateway.hpp"

namespace tea::gateway {
namespace {

using nlohmann::json;

std::string api_key(const ProviderConfig& config) {
  if (config.api_key_env.empty()) return {};
  const char* v = std::getenv(config.api_key_env.c_str());
  if (v == nullptr || *v == '\0') {
    throw AuthError("credential environment variable " + config.api_key_env + " is not set");
  }
  return v;
}

// Maps an HTTP status to the gateway error taxonomy; returns normally on 2xx.
void check_status(const net::HttpResponse& res) {
  if (res.status >= 200 && res.status < 300) return;
  if (res.status == 401 || res.status == 403) {
    throw AuthError(fmt::format("provider rejected credentials ({})", res.status));
  }
  if (res.status == 0 || res.status == 408 || res.status == 429 || res.status >= 500) {
    throw TransientFailure(res.status, res.body);
  }
  throw ProviderError(res.status, res.body);
}

json parse_body(const net::HttpResponse& res) {
  try {
    return json::parse(res.body);
  } catch (const json::parse_error&) {
    throw ProviderError(res.status, "unparseable response body: " + res.body.substr(0, 200));
  }
}

class OpenAiProvider final : public Provider {
 public:
  OpenAiProvider(ProviderConfig config, std::shared_ptr<net::HttpTransport> transport)
      : config_(std::move(config)), transport_(std::move(transport)) {}

  ChatResponse send(const ChatRequest& request, std::string_view remote_model) override {
    json user_content;
    if (request.images.empty()) {
      user_content = request.user;
    } else {
      user_content = json::array();
      user_content.push_back({{"type", "text"}, {"text", request.user}});
      for (const auto& img : request.images) {
        user_content.push_back(
            {{"type", "image_url"},
             {"image_url", {{"url", "data:" + img.mime + ";base64," + img.base64}}}});
      }
    }
    json messages = json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", user_content}});
    json body = {{"model", remote_model},
                 {"messages", messages},
                 {"max_completion_tokens", request.max_output_tokens}};
    if (config_.send_temperature) body["temperature"] = request.temperature;

    net::Headers headers;
    if (auto key = api_key(config_); !key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto start = std::chrono::steady_clock::now();
    auto res = transport_->post(config_.base_url + "/chat/completions", headers, body.dump(),
                                "application/json", std::chrono::seconds(config_.timeout_s));
    check_status(res);
    json j = parse_body(res);
    ChatResponse out;
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    try {
      const auto& choice = j.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      out.text = content.is_string() ? content.get<std::string>() : std::string();
      out.truncated = choice.value("finish_reason", "") == "length";
      const auto& usage = j.at("usage");
      out.input_tokens = usage.value("prompt_tokens", 0);
      out.output_tokens = usage.value("completion_tokens", 0);
    } catch (const json::exception& e) {
      throw ProviderError(res.status, std::string("unexpected response shape: ") + e.what());
    }
    if (out.text.empty() && !out.truncated) throw ProviderError(res.status, "empty completion");
    return out;
  }

 private:
  ProviderConfig config_;
  std::shared_ptr<net::HttpTransport> transport_;
};

class AnthropicProvider final : public Provider {
 public:
  AnthropicProvider(ProviderConfig config, std::shared_ptr<net::HttpTransport> transport)
      : config_(std::move(config)), transport_(std::move(transport)) {}

  ChatResponse send(const ChatRequest& request, std::string_view remote_model) override {
    json content = json::array();
    for (const auto& img : request.images) {
      content.push_back({{"type", "image"},
                         {"source", {{"type", "base64"}, {"media_type", img.mime}, {"data", img.base64}}}});
    }
    content.push_back({{"type", "text"}, {"text", request.user}});
    json body = {{"model", remote_model},
                 {"max_tokens", request.max_output_tokens},
                 {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
    if (!request.system.empty()) body["system"] = request.system;
    if (config_.send_temperature) body["temperature"] = request.temperature;

    net::Headers headers{{"anthropic-version", "2023-06-01"}};
    if (auto key = api_key(config_); !key.empty()) headers.emplace("x-api-key", key);
    auto start = std::chrono::steady_clock::now();
    auto res = transport_->post(config_.base_url + "/messages", headers, body.dump(),
                                "application/json", std::chrono::seconds(config_.timeout_s));
    check_status(res);
    json j = parse_body(res);
    ChatResponse out;
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    try {
      for (const auto& block : j.at("content")) {
        if (block.value("type", "") == "text") out.text += block.at("text").get<std::string>();
      }
      out.truncated = j.value("stop_reason", "") == "max_tokens";
      out.input_tokens = j.at("usage").value("input_tokens", 0);
      out.output_tokens = j.at("usage").value("output_tokens", 0);
    } catch (const json::exception& e) {
      throw ProviderError(res.status, std::string("unexpected response shape: ") + e.what());
    }
    if (out.text.empty() && !out.truncated) throw ProviderError(res.status, "empty completion");
    return out;
  }

 private:
  ProviderConfig config_;
  std::shared_ptr<net::HttpTransport> transport_;
};

}  // namespace

std::unique_ptr<Provider> make_http_provider(const ProviderConfig& config,
                                             std::shared_ptr<net::HttpTransport> transport) {
  if (config.kind == "openai") return std::make_unique<OpenAiProvider>(config, std::move(transport));
  if (config.kind == "anthropic") return std::make_unique<AnthropicProvider>(config, std::move(transport));
  throw std::invalid_argument("unknown provider kind: " + config.kind);
}

}  // namespace tea::gateway
