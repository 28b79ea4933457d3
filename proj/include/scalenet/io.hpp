#pragma once

#include <cstdint>
#include <string>

namespace scalenet::io {

/// Writes `content` to a temp file next to `path` and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// 64-bit FNV-1a, hex encoded. Stable across platforms.
std::string fnv1a_hex(const std::string& data);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace scalenet::io
