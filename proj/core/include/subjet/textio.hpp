#pragma once

#include <string>
#include <vector>

namespace subjet {

// Format tag written as the first line of every output file.
inline constexpr const char* kFormatPrefix = "# format: subjet/1";

// Shortest text form that round-trips a double exactly (17 significant
// digits).
std::string fmt17(double v);

// Parse a double; throws IoError on trailing garbage or empty input.
double parse_double(const std::string& tok, const std::string& context = {});

// Write content to path via a temporary file in the same directory followed
// by rename, so a failed write never leaves a partial file. Throws IoError.
void write_atomic(const std::string& path, const std::string& content);

// Read a whole file; throws IoError when unreadable.
std::string read_file(const std::string& path);

// Split on unquoted whitespace.
std::vector<std::string> split_ws(const std::string& line);

// Ensure a directory exists (like mkdir -p); throws IoError.
void ensure_dir(const std::string& path);

}  // namespace subjet
