#include "tea/media.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>
#include <spdlog/spdlog.h>

#include "tea/process.hpp"
#include "tea/util.hpp"

namespace tea::media {
namespace {

int fourcc_for(const std::filesystem::path& path) {
  auto ext = util::to_lower(path.extension().string());
  if (ext == ".avi") return cv::VideoWriter::fourcc('M', 'J', 'P', 'G');
  if (ext == ".mp4" || ext == ".m4v" || ext == ".mov") return cv::VideoWriter::fourcc('m', 'p', '4', 'v');
  throw MediaError("unsupported video container: " + path.string());
}

cv::VideoCapture open_capture(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw MediaError("no such clip: " + path.string());
  cv::VideoCapture cap(path.string(), cv::CAP_FFMPEG);
  if (!cap.isOpened()) throw MediaError("cannot decode clip: " + path.string());
  return cap;
}

VideoFrame to_frame(const cv::Mat& mat, double t) {
  cv::Mat bgr;
  if (mat.channels() == 1) cv::cvtColor(mat, bgr, cv::COLOR_GRAY2BGR);
  else bgr = mat.isContinuous() ? mat : mat.clone();
  VideoFrame f;
  f.timestamp_s = t;
  f.width = bgr.cols;
  f.height = bgr.rows;
  f.bgr.assign(bgr.data, bgr.data + bgr.total() * 3);
  return f;
}

cv::Mat as_mat(const VideoFrame& f) {
  if (f.bgr.size() != static_cast<std::size_t>(f.width) * f.height * 3) throw MediaError("frame buffer size mismatch");
  return cv::Mat(f.height, f.width, CV_8UC3, const_cast<std::uint8_t*>(f.bgr.data()));
}

struct WavFormat {
  std::uint16_t channels = 1;
  std::uint32_t sample_rate = 16000;
  std::uint16_t bits = 16;
  bool operator==(const WavFormat&) const = default;
};

struct WavData {
  WavFormat format;
  std::string pcm;
};

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u16(std::string& s, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}
std::uint16_t get_u16(std::string_view s, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s[at]) |
                                    (static_cast<unsigned char>(s[at + 1]) << 8));
}

std::string encode_wav(const WavData& w) {
  std::string out = "RIFF";
  put_u32(out, static_cast<std::uint32_t>(36 + w.pcm.size()));
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, w.format.channels);
  put_u32(out, w.format.sample_rate);
  std::uint16_t block = static_cast<std::uint16_t>(w.format.channels * w.format.bits / 8);
  put_u32(out, w.format.sample_rate * block);
  put_u16(out, block);
  put_u16(out, w.format.bits);
  out += "data";
  put_u32(out, static_cast<std::uint32_t>(w.pcm.size()));
  out += w.pcm;
  return out;
}

WavData decode_wav(const std::filesystem::path& path) {
  std::string bytes = util::read_file(path);
  std::string_view s(bytes);
  if (s.size() < 12 || s.substr(0, 4) != "RIFF" || s.substr(8, 4) != "WAVE") {
    throw MediaError("not a RIFF/WAVE file: " + path.string());
  }
  WavData w;
  bool have_fmt = false;
  std::size_t at = 12;
  while (at + 8 <= s.size()) {
    auto id = s.substr(at, 4);
    std::uint32_t size = get_u32(s, at + 4);
    std::size_t body = at + 8;
    if (body + size > s.size()) size = static_cast<std::uint32_t>(s.size() - body);
    if (id == "fmt ") {
      if (size < 16 || get_u16(s, body) != 1) throw MediaError("only PCM WAV is supported: " + path.string());
      w.format.channels = get_u16(s, body + 2);
      w.format.sample_rate = get_u32(s, body + 4);
      w.format.bits = get_u16(s, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw MediaError("WAV data chunk before fmt chunk: " + path.string());
      w.pcm = std::string(s.substr(body, size));
      return w;
    }
    at = body + size + (size & 1U);
  }
  throw MediaError("WAV file has no data chunk: " + path.string());
}

}  // namespace

ClipInfo probe_clip(const std::filesystem::path& path) {
  auto cap = open_capture(path);
  ClipInfo info;
  info.fps = cap.get(cv::CAP_PROP_FPS);
  info.frame_count = static_cast<int>(cap.get(cv::CAP_PROP_FRAME_COUNT));
  info.width = static_cast<int>(cap.get(cv::CAP_PROP_FRAME_WIDTH));
  info.height = static_cast<int>(cap.get(cv::CAP_PROP_FRAME_HEIGHT));
  if (info.fps <= 0.0) throw MediaError("clip reports no frame rate: " + path.string());
  info.duration_s = info.frame_count / info.fps;
  return info;
}

void write_clip(const std::filesystem::path& path, double fps, int width, int height, int frame_count,
                const std::function<void(int, VideoFrame&)>& paint) {
  if (fps <= 0.0 || width <= 0 || height <= 0 || frame_count <= 0) {
    throw std::invalid_argument("clip needs positive fps, size and frame count");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  cv::VideoWriter writer(path.string(), cv::CAP_FFMPEG, fourcc_for(path), fps, cv::Size(width, height));
  if (!writer.isOpened()) throw MediaError("cannot open video writer for " + path.string());
  VideoFrame frame;
  frame.width = width;
  frame.height = height;
  for (int i = 0; i < frame_count; ++i) {
    frame.timestamp_s = i / fps;
    frame.bgr.assign(static_cast<std::size_t>(width) * height * 3, 0);
    paint(i, frame);
    writer.write(as_mat(frame));
  }
}

void write_solid_clip(const std::filesystem::path& path, double duration_s, std::uint8_t b, std::uint8_t g,
                      std::uint8_t r, double fps, int width, int height) {
  int frames = std::max(1, static_cast<int>(std::lround(duration_s * fps)));
  write_clip(path, fps, width, height, frames, [&](int, VideoFrame& f) {
    for (std::size_t i = 0; i < f.bgr.size(); i += 3) {
      f.bgr[i] = b;
      f.bgr[i + 1] = g;
      f.bgr[i + 2] = r;
    }
  });
}

std::vector<VideoFrame> sample_frames(const std::filesystem::path& path, double sample_fps,
                                      std::size_t max_frames) {
  if (sample_fps <= 0.0) throw std::invalid_argument("sample rate must be positive");
  auto info = probe_clip(path);
  auto cap = open_capture(path);
  std::vector<VideoFrame> out;
  cv::Mat mat;
  int index = 0;
  for (int j = 0;; ++j) {
    double t = j / sample_fps;
    if (t >= info.duration_s - 1e-9) break;
    if (max_frames != 0 && out.size() >= max_frames) break;
    int target = static_cast<int>(std::floor(t * info.fps + 1e-9));
    bool ok = true;
    while (index <= target) {
      ok = cap.read(mat);
      if (!ok) break;
      ++index;
    }
    if (!ok) break;
    out.push_back(to_frame(mat, t));
  }
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const VideoFrame& frame, int quality) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".jpg", as_mat(frame), buf, {cv::IMWRITE_JPEG_QUALITY, quality})) {
    throw MediaError("JPEG encoding failed");
  }
  return buf;
}

double frame_difference(const VideoFrame& a, const VideoFrame& b) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("frames differ in size");
  cv::Mat ga;
  cv::Mat gb;
  cv::cvtColor(as_mat(a), ga, cv::COLOR_BGR2GRAY);
  cv::cvtColor(as_mat(b), gb, cv::COLOR_BGR2GRAY);
  cv::Mat diff;
  cv::absdiff(ga, gb, diff);
  return cv::mean(diff)[0] / 255.0;
}

// ---------------------------------------------------------------------------

void write_silent_wav(const std::filesystem::path& path, double duration_s, int sample_rate) {
  if (duration_s < 0.0 || sample_rate <= 0) throw std::invalid_argument("bad silent WAV parameters");
  WavData w;
  w.format.sample_rate = static_cast<std::uint32_t>(sample_rate);
  auto samples = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
  w.pcm.assign(samples * 2, '\0');
  util::write_file(path, encode_wav(w));
}

double wav_duration(const std::filesystem::path& path) {
  auto w = decode_wav(path);
  double bytes_per_second = static_cast<double>(w.format.sample_rate) * w.format.channels * w.format.bits / 8.0;
  if (bytes_per_second <= 0.0) throw MediaError("WAV header has zero byte rate: " + path.string());
  return static_cast<double>(w.pcm.size()) / bytes_per_second;
}

void concat_wav(std::span<const std::filesystem::path> inputs, const std::filesystem::path& output) {
  if (inputs.empty()) throw std::invalid_argument("nothing to concatenate");
  WavData out = decode_wav(inputs.front());
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    auto next = decode_wav(inputs[i]);
    if (!(next.format == out.format)) throw MediaError("WAV formats differ: " + inputs[i].string());
    out.pcm += next.pcm;
  }
  util::write_file(output, encode_wav(out));
}

// ---------------------------------------------------------------------------

void BuiltinMediaTool::pad_clip(const std::filesystem::path& in, const std::filesystem::path& out, double target_s) {
  auto info = probe_clip(in);
  auto cap = open_capture(in);
  int target_frames = std::max(info.frame_count, static_cast<int>(std::ceil(target_s * info.fps - 1e-9)));
  cv::Mat last;
  cv::Mat mat;
  std::filesystem::create_directories(out.parent_path());
  cv::VideoWriter writer(out.string(), cv::CAP_FFMPEG, fourcc_for(out), info.fps, cv::Size(info.width, info.height));
  if (!writer.isOpened()) throw MediaError("cannot open video writer for " + out.string());
  int written = 0;
  while (cap.read(mat)) {
    writer.write(mat);
    last = mat.clone();
    ++written;
  }
  if (last.empty()) throw MediaError("clip has no frames: " + in.string());
  for (; written < target_frames; ++written) writer.write(last);
}

void BuiltinMediaTool::assemble(std::span<const SceneMedia> scenes, const std::filesystem::path& output) {
  if (scenes.empty()) throw std::invalid_argument("no scenes to assemble");
  auto first = probe_clip(scenes.front().clip);
  std::filesystem::create_directories(output.parent_path());
  cv::VideoWriter writer(output.string(), cv::CAP_FFMPEG, fourcc_for(output), first.fps,
                         cv::Size(first.width, first.height));
  if (!writer.isOpened()) throw MediaError("cannot open video writer for " + output.string());
  std::vector<std::filesystem::path> audio;
  for (const auto& s : scenes) {
    auto info = probe_clip(s.clip);
    auto cap = open_capture(s.clip);
    int target_frames = std::max(info.frame_count, static_cast<int>(std::ceil(s.duration_s * first.fps - 1e-9)));
    cv::Mat mat;
    cv::Mat last;
    int written = 0;
    while (written < target_frames && cap.read(mat)) {
      if (mat.cols != first.width || mat.rows != first.height) cv::resize(mat, mat, cv::Size(first.width, first.height));
      writer.write(mat);
      last = mat.clone();
      ++written;
    }
    if (last.empty()) throw MediaError("clip has no frames: " + s.clip.string());
    for (; written < target_frames; ++written) writer.write(last);
    if (!s.audio.empty()) {
      // Pad each narration to its scene length so later scenes stay in sync.
      double have = wav_duration(s.audio);
      auto padded = output.parent_path() / fmt::format(".pad_{}.wav", audio.size());
      if (have + 1e-6 < s.duration_s) {
        write_silent_wav(padded, s.duration_s - have, static_cast<int>(decode_wav(s.audio).format.sample_rate));
        std::vector<std::filesystem::path> parts = {s.audio, padded};
        concat_wav(parts, padded);
      } else {
        std::filesystem::copy_file(s.audio, padded, std::filesystem::copy_options::overwrite_existing);
      }
      audio.push_back(padded);
    }
  }
  writer.release();
  if (!audio.empty()) {
    auto wav = output;
    wav.replace_extension(".wav");
    concat_wav(audio, wav);
    for (const auto& p : audio) std::filesystem::remove(p);
  }
}

FfmpegMediaTool::FfmpegMediaTool(std::string executable, std::chrono::milliseconds timeout)
    : executable_(std::move(executable)), timeout_(timeout) {}

std::vector<std::string> FfmpegMediaTool::pad_args(const std::filesystem::path& in, const std::filesystem::path& out,
                                                   double extra_s) const {
  return {executable_, "-y", "-loglevel", "error", "-i", in.string(),
          "-vf", fmt::format("tpad=stop_mode=clone:stop_duration={:.3f}", std::max(0.0, extra_s)),
          "-an", out.string()};
}

std::vector<std::string> FfmpegMediaTool::mux_args(const SceneMedia& scene, const std::filesystem::path& out) const {
  std::vector<std::string> args = {executable_, "-y", "-loglevel", "error", "-i", scene.clip.string()};
  if (!scene.audio.empty()) {
    args.insert(args.end(), {"-i", scene.audio.string(), "-af", "apad", "-map", "0:v:0", "-map", "1:a:0"});
  } else {
    args.insert(args.end(), {"-f", "lavfi", "-i", "anullsrc=r=16000:cl=mono", "-map", "0:v:0", "-map", "1:a:0"});
  }
  // Holding the last frame for the whole target length guarantees -t finds enough video.
  args.insert(args.end(), {"-vf", fmt::format("tpad=stop_mode=clone:stop_duration={:.3f}", scene.duration_s)});
  args.insert(args.end(), {"-t", fmt::format("{:.3f}", scene.duration_s), "-c:v", "libx264", "-pix_fmt", "yuv420p",
                           "-c:a", "aac", out.string()});
  return args;
}

std::vector<std::string> FfmpegMediaTool::concat_args(const std::filesystem::path& list_file,
                                                      const std::filesystem::path& out) const {
  return {executable_, "-y", "-loglevel", "error", "-f", "concat", "-safe", "0",
          "-i", list_file.string(), "-c", "copy", out.string()};
}

void FfmpegMediaTool::run(const std::vector<std::string>& args) const {
  process::ProcessResult r;
  try {
    r = process::run(args, {}, timeout_);
  } catch (const process::SpawnError& e) {
    throw MediaError(e.what());
  }
  if (r.timed_out) throw MediaError("ffmpeg timed out");
  if (r.exit_code != 0) throw MediaError(fmt::format("ffmpeg exited with {}: {}", r.exit_code, util::trim(r.stderr_text)));
}

void FfmpegMediaTool::pad_clip(const std::filesystem::path& in, const std::filesystem::path& out, double target_s) {
  double have = probe_clip(in).duration_s;
  std::filesystem::create_directories(out.parent_path());
  run(pad_args(in, out, target_s - have));
}

void FfmpegMediaTool::assemble(std::span<const SceneMedia> scenes, const std::filesystem::path& output) {
  if (scenes.empty()) throw std::invalid_argument("no scenes to assemble");
  auto work = output.parent_path() / ".assemble";
  std::filesystem::create_directories(work);
  std::string list;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    auto part = work / fmt::format("part_{}.mp4", i);
    run(mux_args(scenes[i], part));
    list += fmt::format("file '{}'\n", std::filesystem::absolute(part).string());
  }
  util::write_file(work / "list.txt", list);
  run(concat_args(work / "list.txt", output));
}

std::unique_ptr<MediaTool> make_media_tool(const std::string& kind) {
  if (kind == "builtin") return std::make_unique<BuiltinMediaTool>();
  if (kind == "ffmpeg") return std::make_unique<FfmpegMediaTool>();
  if (kind == "auto" || kind.empty()) {
    if (!process::which("ffmpeg").empty()) return std::make_unique<FfmpegMediaTool>();
    spdlog::info("ffmpeg not found on PATH, assembling with the builtin media tool");
    return std::make_unique<BuiltinMediaTool>();
  }
  if (kind.rfind("ffmpeg:", 0) == 0) return std::make_unique<FfmpegMediaTool>(kind.substr(7));
  throw std::invalid_argument("unknown media tool: " + kind);
}

}  // namespace tea::media
