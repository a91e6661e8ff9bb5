#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "clown/types.hpp"

namespace clown {

struct DiskGeometry {
  std::uint32_t tracks = 64;
  std::uint32_t sectors = 16;
  std::uint32_t sector_time = 128;
  std::uint32_t gap = 16;
  std::uint32_t t2t = 100;
  std::uint32_t max_seek = 2000;

  std::uint32_t rotation() const { return sectors * (sector_time + gap); }
  std::uint32_t blocks() const { return tracks * sectors; }
  /// Throws FormatError when the geometry cannot be simulated.
  void validate() const;

  friend bool operator==(const DiskGeometry&, const DiskGeometry&) = default;
};

/// Header followed by tracks * sectors blocks of kBlockWords words.
///
///   magic 0x434C4457, version, T, S, words per block, sector_time, gap,
///   t2t, max_seek
class DiskImage {
 public:
  static constexpr UWord kMagic = 0x434C4457;
  static constexpr UWord kVersion = 1;
  static constexpr std::size_t kHeaderWords = 9;

  /// A freshly formatted, zero-filled disk.
  explicit DiskImage(const DiskGeometry& g = {});

  const DiskGeometry& geometry() const { return geo_; }

  std::size_t block_index(std::uint32_t track, std::uint32_t sector) const;

  /// Writes words.size() / 128 consecutive blocks starting at (track, sector),
  /// continuing onto following tracks.
  void write_blocks(std::uint32_t track, std::uint32_t sector, std::span<const Word> words);
  std::vector<Word> read_blocks(std::uint32_t track, std::uint32_t sector, std::size_t n) const;

  std::span<const Word> block(std::uint32_t track, std::uint32_t sector) const;
  std::span<Word> block(std::uint32_t track, std::uint32_t sector);

  /// Copies arbitrary-length data from (0,0) on, zero-padding the last block.
  /// Returns the number of blocks used.
  std::size_t install(std::span<const Word> words, std::uint32_t track = 0, std::uint32_t sector = 0);

  std::vector<Word> to_words() const;
  static DiskImage from_words(std::span<const Word> words);

  void save(const std::filesystem::path& path) const;
  static DiskImage load(const std::filesystem::path& path);

  friend bool operator==(const DiskImage&, const DiskImage&) = default;

 private:
  DiskGeometry geo_;
  std::vector<Word> data_;
};

}  // namespace clown
