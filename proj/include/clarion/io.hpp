#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace clarion::io {

std::string read_file(std::filesystem::path const &path);

/// Writes through a sibling temporary file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
void write_file_atomic(std::filesystem::path const &path, std::string_view content);

/// Calls `fn(line, line_number)` for every line (1-based numbering, trailing
/// '\r' stripped). Blank lines are skipped.
void for_each_line(std::filesystem::path const &path,
                   std::function<void(std::string_view, std::size_t)> const &fn);

/// 1-based line number of byte `offset` in `content`.
std::size_t line_of_offset(std::string_view content, std::size_t offset);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

} // namespace clarion::io
