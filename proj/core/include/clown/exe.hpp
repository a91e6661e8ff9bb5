#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "clown/object.hpp"

namespace clown {

// exe file, all little-endian 32-bit words:
//
//   header     magic 0x434C4F57, version 1, flags, entry_seg (0xFFFFFFFF for
//              none), entry_off, n_segments, n_symbols, n_relocs
//   segments   n_segments x {name_idx, size, flags (bit0 w, bit1 x), file_offset}
//   symbols    n_symbols x {name_idx, seg or 0xFFFFFFFF, value, flags (bit0 global)}
//   relocs     n_relocs x {seg, offset, symbol, type}
//   strings    count, then each string one character per word, 0-terminated
//   data       segment words at their file_offset (in words)
inline constexpr std::uint32_t kExeMagic = 0x434C4F57;
inline constexpr std::uint32_t kExeVersion = 1;
inline constexpr std::uint32_t kExeNone = 0xFFFFFFFF;
inline constexpr std::size_t kExeHeaderWords = 8;

std::vector<Word> write_exe_words(const ObjectModule& m);
/// Throws FormatError naming the word offset of the first inconsistency.
ObjectModule read_exe_words(std::span<const Word> words);

std::vector<std::uint8_t> write_exe(const ObjectModule& m);
ObjectModule read_exe(std::span<const std::uint8_t> bytes);

void save_exe(const std::filesystem::path& path, const ObjectModule& m);
ObjectModule load_exe(const std::filesystem::path& path);

/// True when the file starts with the exe magic.
bool is_exe(std::span<const Word> words);

}  // namespace clown
