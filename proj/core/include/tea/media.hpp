#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tea/error.hpp"

namespace tea::media {

class MediaError : public Error {
 public:
  using Error::Error;
};

// Packed 8-bit BGR pixels, row-major.
struct VideoFrame {
  double timestamp_s = 0.0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bgr;
};

struct ClipInfo {
  double duration_s = 0.0;
  double fps = 0.0;
  int frame_count = 0;
  int width = 0;
  int height = 0;
};

ClipInfo probe_clip(const std::filesystem::path& path);

// Writes frame_count frames produced by paint(index, frame); the frame comes
// pre-sized and black. Container picked from the extension (.mp4 or .avi).
void write_clip(const std::filesystem::path& path, double fps, int width, int height, int frame_count,
                const std::function<void(int, VideoFrame&)>& paint);
void write_solid_clip(const std::filesystem::path& path, double duration_s, std::uint8_t b, std::uint8_t g,
                      std::uint8_t r, double fps = 15.0, int width = 320, int height = 180);

// Frames at t = j / sample_fps for t below the clip duration, decoded
// sequentially. Stops after max_frames when that is nonzero.
std::vector<VideoFrame> sample_frames(const std::filesystem::path& path, double sample_fps,
                                      std::size_t max_frames = 0);

std::vector<std::uint8_t> encode_jpeg(const VideoFrame& frame, int quality = 85);
// Mean absolute grayscale difference scaled to [0,1].
double frame_difference(const VideoFrame& a, const VideoFrame& b);

// ---------------------------------------------------------------------------
// Audio (16-bit PCM mono WAV)

void write_silent_wav(const std::filesystem::path& path, double duration_s, int sample_rate = 16000);
double wav_duration(const std::filesystem::path& path);
// Concatenates PCM payloads; every input must share one format.
void concat_wav(std::span<const std::filesystem::path> inputs, const std::filesystem::path& output);

// ---------------------------------------------------------------------------
// Assembly

struct SceneMedia {
  std::filesystem::path clip;
  std::filesystem::path audio;  // may be empty
  double duration_s = 0.0;      // target length, >= the clip length
};

class MediaTool {
 public:
  virtual ~MediaTool() = default;
  virtual std::string name() const = 0;
  // Extends a clip to target_s by holding its last frame.
  virtual void pad_clip(const std::filesystem::path& in, const std::filesystem::path& out, double target_s) = 0;
  // Joins scene clips in order and lays each scene's audio over it.
  virtual void assemble(std::span<const SceneMedia> scenes, const std::filesystem::path& output) = 0;
};

// In-process tool built on OpenCV. The output video has no audio track; the
// joined narration is written next to it as <output stem>.wav.
class BuiltinMediaTool final : public MediaTool {
 public:
  std::string name() const override { return "builtin"; }
  void pad_clip(const std::filesystem::path& in, const std::filesystem::path& out, double target_s) override;
  void assemble(std::span<const SceneMedia> scenes, const std::filesystem::path& output) override;
};

// Drives an ffmpeg executable.
class FfmpegMediaTool final : public MediaTool {
 public:
  explicit FfmpegMediaTool(std::string executable = "ffmpeg",
                           std::chrono::milliseconds timeout = std::chrono::minutes(10));
  std::string name() const override { return "ffmpeg"; }
  void pad_clip(const std::filesystem::path& in, const std::filesystem::path& out, double target_s) override;
  void assemble(std::span<const SceneMedia> scenes, const std::filesystem::path& output) override;

  std::vector<std::string> pad_args(const std::filesystem::path& in, const std::filesystem::path& out,
                                    double extra_s) const;
  std::vector<std::string> mux_args(const SceneMedia& scene, const std::filesystem::path& out) const;
  std::vector<std::string> concat_args(const std::filesystem::path& list_file,
                                       const std::filesystem::path& out) const;

 private:
  void run(const std::vector<std::string>& args) const;

  std::string executable_;
  std::chrono::milliseconds timeout_;
};

// "ffmpeg" when that executable is on PATH, else "builtin".
std::unique_ptr<MediaTool> make_media_tool(const std::string& kind);

}  // namespace tea::media
