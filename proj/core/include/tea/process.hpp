#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tea/error.hpp"

namespace tea::process {

struct ProcessResult {
  int exit_code = -1;  // -1 when killed by a signal or the timeout
  std::string stdout_text;
  std::string stderr_text;
  bool timed_out = false;
};

// The executable could not be started.
class SpawnError : public Error {
 public:
  using Error::Error;
};

// Runs argv[0] (looked up on PATH) with captured output. The child is killed
// with SIGKILL once the timeout elapses.
// env entries are added to the inherited environment.
ProcessResult run(const std::vector<std::string>& argv, const std::filesystem::path& cwd = {},
                  std::chrono::milliseconds timeout = std::chrono::minutes(10),
                  const std::vector<std::pair<std::string, std::string>>& env = {});

// Absolute path of an executable on PATH, or empty.
std::filesystem::path which(const std::string& name);

}  // namespace tea::process
