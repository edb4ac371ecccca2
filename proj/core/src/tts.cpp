#include <cstdlib>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tea/pipeline.hpp"
#include "tea/util.hpp"

namespace tea::pipeline {

double stub_narration_seconds(std::string_view narration) {
  return std::max(0.5, static_cast<double>(util::split_words(narration).size()) / 2.5);
}

Voiceover SilentTts::synthesize(std::string_view narration, const std::filesystem::path& out_wav) {
  double seconds = stub_narration_seconds(narration);
  media::write_silent_wav(out_wav, seconds);
  return {out_wav, media::wav_duration(out_wav)};
}

HttpTts::HttpTts(HttpTtsConfig config, std::shared_ptr<net::HttpTransport> transport)
    : config_(std::move(config)), transport_(transport ? std::move(transport) : net::default_transport()) {}

Voiceover HttpTts::synthesize(std::string_view narration, const std::filesystem::path& out_wav) {
  net::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') throw TtsPortError("credential variable " + config_.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json body = {{"model", config_.model},
                         {"voice", config_.voice},
                         {"input", std::string(narration)},
                         {"response_format", "wav"}};
  net::HttpResponse res;
  try {
    res = transport_->post(config_.base_url + "/audio/speech", headers, body.dump(), "application/json",
                           std::chrono::seconds(config_.timeout_s));
  } catch (const net::NetworkDisabled& e) {
    throw TtsPortError(e.what());
  }
  if (res.status != 200) throw TtsPortError(fmt::format("speech endpoint returned {}", res.status));
  util::write_file(out_wav, res.body);
  try {
    return {out_wav, media::wav_duration(out_wav)};
  } catch (const media::MediaError& e) {
    throw TtsPortError(std::string("speech endpoint returned unusable audio: ") + e.what());
  }
}

}  // namespace tea::pipeline
