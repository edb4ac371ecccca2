#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tea/error.hpp"

namespace tea::srt {

struct SrtCue {
  int index = 1;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::string text;

  bool operator==(const SrtCue&) const = default;
};

class SrtSyntaxError : public Error {
 public:
  SrtSyntaxError(std::size_t line, const std::string& detail);
  std::size_t line() const { return line_; }  // 1-based

 private:
  std::size_t line_;
};

// "HH:MM:SS,mmm"
std::string format_timestamp(std::int64_t ms);

// Numbered cues with LF line ends, each followed by a blank line.
std::string emit_srt(std::span<const SrtCue> cues);

// Strict SubRip reader: indices consecutive from 1, "HH:MM:SS,mmm -->
// HH:MM:SS,mmm" timing lines, start < end, no cue starting before the
// previous one ends, non-empty text. Accepts a UTF-8 BOM and CRLF.
std::vector<SrtCue> parse_srt(std::string_view text);

// One narrated segment, e.g. a line of a scene timing sidecar.
struct TimedText {
  std::string text;
  double start_s = 0.0;
  double end_s = 0.0;
};

// JSON lines of {"text", "start_s", "end_s"}.
std::vector<TimedText> read_timing_sidecar(const std::filesystem::path& path);

struct SceneNarration {
  double start_s = 0.0;  // offset of the scene in the final video
  double duration_s = 0.0;
  std::string narration;
  std::vector<TimedText> segments;  // scene-relative; overrides the even spread when present
};

// One cue per sentence. Inside a scene (or a sidecar segment) cue
// boundaries fall at the cumulative word-count share of its duration,
// rounded to the millisecond.
std::vector<SrtCue> build_cues(std::span<const SceneNarration> scenes);

// Joined cue text, one cue per line.
std::string transcript(std::span<const SrtCue> cues);

}  // namespace tea::srt
