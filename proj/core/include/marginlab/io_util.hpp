#pragma once

#include <cstdint>
#include <string>

namespace marginlab {

// Writes content to path via a sibling temp file and atomic rename.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

// FNV-1a 64-bit digest of a file's bytes, as a 16-hex-digit string.
std::string fnv1a64_file(const std::string& path);

}  // namespace marginlab
