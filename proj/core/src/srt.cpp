#include "tea/srt.hpp"

#include <cmath>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tea/util.hpp"

namespace tea::srt {
namespace {

std::int64_t to_ms(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1000.0)); }

void spread(std::string_view text, std::int64_t start_ms, std::int64_t end_ms, std::vector<SrtCue>& out) {
  auto sentences = util::split_sentences(text);
  if (sentences.empty()) return;
  std::vector<std::size_t> words;
  std::size_t total = 0;
  for (const auto& s : sentences) {
    words.push_back(std::max<std::size_t>(1, util::split_words(s).size()));
    total += words.back();
  }
  std::int64_t span = end_ms - start_ms;
  std::size_t cumulative = 0;
  std::int64_t prev = start_ms;
  if (!out.empty()) prev = std::max(prev, out.back().end_ms);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    cumulative += words[i];
    auto boundary = start_ms + static_cast<std::int64_t>(std::llround(static_cast<double>(span) * cumulative / total));
    boundary = std::max(boundary, prev + 1);
    out.push_back(SrtCue{static_cast<int>(out.size()) + 1, prev, boundary, sentences[i]});
    prev = boundary;
  }
}

}  // namespace

SrtSyntaxError::SrtSyntaxError(std::size_t line, const std::string& detail)
    : Error(fmt::format("SRT syntax error on line {}: {}", line, detail)), line_(line) {}

std::string format_timestamp(std::int64_t ms) {
  if (ms < 0) throw std::invalid_argument("negative timestamp");
  return fmt::format("{:02}:{:02}:{:02},{:03}", ms / 3600000, (ms / 60000) % 60, (ms / 1000) % 60, ms % 1000);
}

std::string emit_srt(std::span<const SrtCue> cues) {
  std::string out;
  for (const auto& c : cues) {
    out += fmt::format("{}\n{} --> {}\n{}\n\n", c.index, format_timestamp(c.start_ms), format_timestamp(c.end_ms),
                       c.text);
  }
  return out;
}

std::vector<SrtCue> parse_srt(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  auto lines = util::split_lines(text);
  static const std::regex kIndex(R"(^[1-9][0-9]*$)");
  static const std::regex kTiming(R"(^(\d{2}):([0-5]\d):([0-5]\d),(\d{3}) --> (\d{2}):([0-5]\d):([0-5]\d),(\d{3})$)");

  std::vector<SrtCue> cues;
  std::size_t i = 0;
  auto stamp = [](const std::smatch& m, int first) {
    return std::stoll(m[first].str()) * 3600000 + std::stoll(m[first + 1].str()) * 60000 +
           std::stoll(m[first + 2].str()) * 1000 + std::stoll(m[first + 3].str());
  };
  while (i < lines.size()) {
    if (lines[i].empty()) {
      // Only trailing blank lines may remain once cues have started.
      ++i;
      if (cues.empty() || i >= lines.size() || lines[i].empty()) continue;
      throw SrtSyntaxError(i, "unexpected blank line");
    }
    std::size_t index_line = i + 1;
    if (!std::regex_match(lines[i], kIndex)) throw SrtSyntaxError(index_line, "expected a cue number");
    int index = std::stoi(lines[i]);
    if (index != static_cast<int>(cues.size()) + 1) {
      throw SrtSyntaxError(index_line, fmt::format("expected cue number {}, found {}", cues.size() + 1, index));
    }
    if (++i >= lines.size()) throw SrtSyntaxError(i, "missing timing line");
    std::smatch m;
    if (!std::regex_match(lines[i], m, kTiming)) throw SrtSyntaxError(i + 1, "malformed timing line");
    SrtCue cue{index, stamp(m, 1), stamp(m, 5), {}};
    if (cue.start_ms >= cue.end_ms) throw SrtSyntaxError(i + 1, "cue ends before it starts");
    if (!cues.empty() && cue.start_ms < cues.back().end_ms) {
      throw SrtSyntaxError(i + 1, "cue overlaps the previous cue");
    }
    ++i;
    while (i < lines.size() && !lines[i].empty()) {
      if (!cue.text.empty()) cue.text += '\n';
      cue.text += lines[i++];
    }
    if (cue.text.empty()) throw SrtSyntaxError(i, "cue has no text");
    cues.push_back(std::move(cue));
    if (i < lines.size()) ++i;  // the blank separator
  }
  return cues;
}

std::vector<TimedText> read_timing_sidecar(const std::filesystem::path& path) {
  std::vector<TimedText> out;
  std::size_t n = 0;
  for (const auto& line : util::split_lines(util::read_file(path))) {
    ++n;
    if (util::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TimedText t{j.at("text").get<std::string>(), j.at("start_s").get<double>(), j.at("end_s").get<double>()};
      if (!(t.end_s >= t.start_s) || t.start_s < 0.0) {
        throw std::invalid_argument(fmt::format("{}:{}: segment ends before it starts", path.string(), n));
      }
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return out;
}

std::vector<SrtCue> build_cues(std::span<const SceneNarration> scenes) {
  std::vector<SrtCue> cues;
  for (const auto& s : scenes) {
    if (s.duration_s < 0.0) throw std::invalid_argument("negative scene duration");
    if (!s.segments.empty()) {
      for (const auto& seg : s.segments) {
        spread(seg.text, to_ms(s.start_s + seg.start_s), to_ms(s.start_s + seg.end_s), cues);
      }
    } else {
      spread(s.narration, to_ms(s.start_s), to_ms(s.start_s + s.duration_s), cues);
    }
  }
  return cues;
}

std::string transcript(std::span<const SrtCue> cues) {
  std::string out;
  for (const auto& c : cues) {
    out += c.text;
    out += '\n';
  }
  return out;
}

}  // namespace tea::srt
