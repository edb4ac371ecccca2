#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tea::util {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

// Collapses every whitespace run to a single space and trims both ends.
std::string normalize_ws(std::string_view s);

std::vector<std::string> split_words(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

// Splits narration into sentences on '.', '!' or '?' followed by whitespace
// or end of text. Sentences are whitespace-normalized; empty ones dropped.
std::vector<std::string> split_sentences(std::string_view text);

// Lowercase ASCII slug: runs of non-alphanumerics become '-', no leading or
// trailing dashes. Empty input yields "item".
std::string slugify(std::string_view s);

// Replaces {name} placeholders. Throws std::invalid_argument on a
// placeholder with no binding.
std::string render_template(
    std::string_view tmpl,
    std::span<const std::pair<std::string, std::string>> bindings);

std::string read_file(const std::filesystem::path& path);
// Writes through a sibling temp file and renames into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view data);
std::string base64_encode(std::span<const std::uint8_t> data);
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string utc_timestamp();

// Runs body(i) for i in [0, n) on at most parallelism threads. The first
// exception is rethrown after all workers finish.
void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& body);

}  // namespace tea::util
