#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tea/retrieval.hpp"
#include "tea/util.hpp"

namespace tea::retrieval {
namespace {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '_') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

void normalize(std::vector<float>& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (float& x : v) x = static_cast<float>(x / norm);
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ < 2) throw std::invalid_argument("embedding dimension must be at least 2");
}

std::string HashingEmbedder::name() const { return fmt::format("hashing-v1-{}", dimension_); }

std::vector<float> HashingEmbedder::embed_one(std::string_view text) const {
  std::vector<float> v(dimension_, 0.0F);
  auto add = [&](std::string_view feature, float weight) {
    std::uint64_t h = util::fnv1a64(feature);
    float sign = (h >> 63) != 0 ? -1.0F : 1.0F;
    v[static_cast<std::size_t>(h % dimension_)] += sign * weight;
  };
  auto tokens = tokenize(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add(tokens[i], 1.0F);
    if (i + 1 < tokens.size()) add(tokens[i] + ' ' + tokens[i + 1], 0.5F);
  }
  // Token-free text (punctuation only) still gets a direction.
  bool zero = std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0F; });
  if (zero) add(std::string("\x01") + std::string(text), 1.0F);
  normalize(v);
  return v;
}

std::vector<std::vector<float>> HashingEmbedder::embed(std::span<const std::string> texts) {
  ++calls_;
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config, std::shared_ptr<net::HttpTransport> transport)
    : config_(std::move(config)), transport_(transport ? std::move(transport) : net::default_transport()) {}

std::vector<std::vector<float>> HttpEmbedder::embed(std::span<const std::string> texts) {
  net::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw EmbeddingPortUnavailable("credential environment variable " + config_.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json body = {{"model", config_.model}, {"input", texts}};
  net::HttpResponse res;
  try {
    res = transport_->post(config_.base_url + "/embeddings", headers, body.dump(), "application/json",
                           std::chrono::seconds(config_.timeout_s));
  } catch (const net::NetworkDisabled& e) {
    throw EmbeddingPortUnavailable(e.what());
  }
  if (res.status != 200) {
    throw EmbeddingPortUnavailable(fmt::format("embedding endpoint returned {}: {}", res.status, res.body.substr(0, 200)));
  }
  std::vector<std::vector<float>> out(texts.size());
  try {
    auto j = nlohmann::json::parse(res.body);
    for (const auto& item : j.at("data")) {
      auto index = item.value("index", std::size_t{0});
      if (index >= out.size()) throw EmbeddingPortUnavailable("embedding index out of range");
      out[index] = item.at("embedding").get<std::vector<float>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw EmbeddingPortUnavailable(std::string("malformed embedding response: ") + e.what());
  }
  for (auto& v : out) {
    if (v.size() != config_.dimension) {
      throw EmbeddingPortUnavailable(fmt::format("expected {}-d embeddings, got {}", config_.dimension, v.size()));
    }
    normalize(v);
  }
  return out;
}

}  // namespace tea::retrieval
