#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "clown/types.hpp"

namespace clown {

/// Raw files of little-endian 32-bit words (bin images, firmware, disks).
std::vector<Word> read_words(const std::filesystem::path& path);
void write_words(const std::filesystem::path& path, std::span<const Word> words);

std::vector<std::uint8_t> words_to_bytes(std::span<const Word> words);
/// Throws FormatError if the byte count is not a multiple of four.
std::vector<Word> bytes_to_words(std::span<const std::uint8_t> bytes);

}  // namespace clown
