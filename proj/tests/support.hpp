#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "tea/codegen.hpp"
#include "tea/gateway.hpp"
#include "tea/prompts.hpp"

namespace tea::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "tea") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Chat client answering from a callback and recording every request.
class ScriptedClient final : public gateway::ChatClient {
 public:
  using Handler = std::function<std::string(const gateway::ChatRequest&)>;
  explicit ScriptedClient(Handler handler) : handler_(std::move(handler)) {}

  gateway::ChatResponse complete(const gateway::ChatRequest& request) override {
    gateway::validate_request(request);
    std::string text = handler_(request);
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    return {text, gateway::estimate_tokens(request.system + request.user), gateway::estimate_tokens(text), 1.0,
            false};
  }
  std::vector<gateway::ChatRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  Handler handler_;
  mutable std::mutex mu_;
  std::vector<gateway::ChatRequest> requests_;
};

// Chat client replaying a fixed queue of replies.
class QueueClient final : public gateway::ChatClient {
 public:
  explicit QueueClient(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}
  gateway::ChatResponse complete(const gateway::ChatRequest& request) override {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    if (replies_.empty()) throw gateway::ProviderError(500, "queue exhausted");
    std::string text = replies_.front();
    replies_.pop_front();
    return {text, 10, 5, 1.0, false};
  }
  const std::vector<gateway::ChatRequest>& requests() const { return requests_; }

 private:
  std::mutex mu_;
  std::deque<std::string> replies_;
  std::vector<gateway::ChatRequest> requests_;
};

// Executor whose k-th call for a scene follows a fixed verdict list; calls
// past the end fail.
class ScriptedExecutor final : public codegen::ScriptExecutor {
 public:
  explicit ScriptedExecutor(std::vector<bool> verdicts, std::string error = "NameError: name 'Foo' is not defined")
      : verdicts_(std::move(verdicts)), error_(std::move(error)) {}

  codegen::RenderOutcome execute(const std::filesystem::path&, const std::string& scene_class, std::size_t,
                                 const std::filesystem::path& out_dir) override {
    std::size_t k = calls_++;
    codegen::RenderOutcome out;
    if (k < verdicts_.size() && verdicts_[k]) {
      out.ok = true;
      out.media = out_dir / (scene_class + ".mp4");
      out.duration_s = 3.0;
    } else {
      out.stderr_text = error_;
    }
    return out;
  }
  std::size_t calls() const { return calls_; }

 private:
  std::vector<bool> verdicts_;
  std::string error_;
  std::size_t calls_ = 0;
};

inline std::string python_reply(const std::string& body = "class Scene1(Scene):\n    pass\n") {
  return "Here is the code.\n```python\n" + body + "```\n";
}

inline const PromptLibrary& shipped_prompts() {
  static const PromptLibrary lib = PromptLibrary::load(data_dir() / "prompts");
  return lib;
}

}  // namespace tea::testing
