#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tea/pipeline.hpp"
#include "tea/process.hpp"
#include "tea/util.hpp"

namespace tea::pipeline {
namespace {

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[++i];
      out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::filesystem::path newest_video(const std::filesystem::path& dir) {
  std::filesystem::path best;
  std::filesystem::file_time_type best_time{};
  if (!std::filesystem::is_directory(dir)) return best;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = util::to_lower(e.path().extension().string());
    if (ext != ".mp4" && ext != ".mov" && ext != ".avi") continue;
    // Renderers leave partial movie files in a partial_movie_files folder.
    if (e.path().generic_string().find("partial_movie_files") != std::string::npos) continue;
    auto t = e.last_write_time();
    if (best.empty() || t > best_time || (t == best_time && e.path() < best)) {
      best = e.path();
      best_time = t;
    }
  }
  return best;
}

}  // namespace

SubprocessExecutor::SubprocessExecutor(SubprocessExecutorConfig config) : config_(std::move(config)) {
  if (config_.command.empty()) throw std::invalid_argument("renderer command is empty");
  if (config_.timeout_s <= 0) throw std::invalid_argument("renderer timeout must be positive");
}

codegen::RenderOutcome SubprocessExecutor::execute(const std::filesystem::path& script_path,
                                                   const std::string& scene_class, std::size_t scene_index,
                                                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto media_dir = std::filesystem::absolute(out_dir);
  auto timing = media_dir / codegen::timing_sidecar_name(scene_index);
  std::filesystem::remove(timing);
  std::vector<std::pair<std::string, std::string>> bindings = {
      {"script", std::filesystem::absolute(script_path).string()},
      {"scene_class", scene_class},
      {"media_dir", media_dir.string()},
      {"timing_file", timing.string()}};
  std::vector<std::string> argv;
  for (const auto& arg : config_.command) argv.push_back(util::render_template(arg, bindings));

  process::ProcessResult r;
  try {
    r = process::run(argv, script_path.parent_path(), std::chrono::seconds(config_.timeout_s),
                     {{"TEA_TIMING_FILE", timing.string()}, {"TEA_MEDIA_DIR", media_dir.string()}});
  } catch (const process::SpawnError& e) {
    throw codegen::RendererUnavailable(e.what());
  }
  codegen::RenderOutcome out;
  out.timed_out = r.timed_out;
  out.stderr_text = r.stderr_text;
  if (r.timed_out) {
    out.stderr_text += fmt::format("\nTimeout: renderer exceeded {} s", config_.timeout_s);
    return out;
  }
  auto video = newest_video(media_dir);
  if (r.exit_code == 0 && !video.empty()) {
    try {
      out.duration_s = media::probe_clip(video).duration_s;
      out.media = video;
      out.ok = true;
    } catch (const media::MediaError& e) {
      out.stderr_text += std::string("\n") + e.what();
    }
  } else if (r.exit_code == 0) {
    out.stderr_text = "no output produced";
  }
  return out;
}

StubExecutor::StubExecutor(double clip_s) : clip_s_(clip_s) {
  if (clip_s_ <= 0.0) throw std::invalid_argument("stub clip length must be positive");
}

codegen::RenderOutcome StubExecutor::execute(const std::filesystem::path& script_path, const std::string& scene_class,
                                             std::size_t /*scene_index*/, const std::filesystem::path& out_dir) {
  ++runs_;
  codegen::RenderOutcome out;
  std::string code = util::read_file(script_path);
  for (const auto& line : util::split_lines(code)) {
    std::string t = util::trim(line);
    constexpr std::string_view kMarker = "# stub-error:";
    if (t.rfind(kMarker, 0) == 0) {
      out.stderr_text = unescape(util::trim(std::string_view(t).substr(kMarker.size())));
      return out;
    }
  }
  if (code.find("class " + scene_class) == std::string::npos) {
    out.stderr_text = fmt::format("Error: {} is not in the script", scene_class);
    return out;
  }
  auto h = util::fnv1a64(scene_class);
  auto clip = out_dir / (scene_class + ".mp4");
  media::write_solid_clip(clip, clip_s_, static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8),
                          static_cast<std::uint8_t>(h >> 16));
  out.ok = true;
  out.media = clip;
  out.duration_s = media::probe_clip(clip).duration_s;
  return out;
}

}  // namespace tea::pipeline
