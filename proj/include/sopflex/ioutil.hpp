#pragma once

#include <string>

namespace sopflex {

// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

// Writes via a temp file in the same directory followed by a rename, so a
// failure never leaves a partial file at `path`.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace sopflex
