#include "clown/disk_image.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "clown/error.hpp"
#include "clown/words_io.hpp"

namespace clown {

void DiskGeometry::validate() const {
  if (tracks < 2 || sectors < 1) throw FormatError(fmt::format("bad disk geometry {}x{}", tracks, sectors));
  if (sector_time == 0) throw FormatError("sector time must be positive");
  if (max_seek < t2t) throw FormatError("max seek is shorter than track-to-track seek");
  if (std::uint64_t{tracks} * sectors * kBlockWords > (std::uint64_t{1} << 31))
    throw FormatError("disk image too large");
}

DiskImage::DiskImage(const DiskGeometry& g) : geo_(g) {
  geo_.validate();
  data_.assign(std::size_t{geo_.blocks()} * kBlockWords, 0);
}

std::size_t DiskImage::block_index(std::uint32_t track, std::uint32_t sector) const {
  if (track >= geo_.tracks || sector >= geo_.sectors)
    throw FormatError(fmt::format("block ({}, {}) outside {}x{} disk", track, sector, geo_.tracks, geo_.sectors));
  return std::size_t{track} * geo_.sectors + sector;
}

std::span<const Word> DiskImage::block(std::uint32_t track, std::uint32_t sector) const {
  return std::span<const Word>(data_).subspan(block_index(track, sector) * kBlockWords, kBlockWords);
}

std::span<Word> DiskImage::block(std::uint32_t track, std::uint32_t sector) {
  return std::span<Word>(data_).subspan(block_index(track, sector) * kBlockWords, kBlockWords);
}

void DiskImage::write_blocks(std::uint32_t track, std::uint32_t sector, std::span<const Word> words) {
  if (words.size() % kBlockWords != 0)
    throw FormatError(fmt::format("{} words is not a whole number of blocks", words.size()));
  const std::size_t first = block_index(track, sector);
  const std::size_t n = words.size() / kBlockWords;
  if (first + n > geo_.blocks()) throw FormatError(fmt::format("{} blocks from ({}, {}) run off the disk", n, track, sector));
  std::copy(words.begin(), words.end(), data_.begin() + static_cast<std::ptrdiff_t>(first * kBlockWords));
}

std::vector<Word> DiskImage::read_blocks(std::uint32_t track, std::uint32_t sector, std::size_t n) const {
  const std::size_t first = block_index(track, sector);
  if (first + n > geo_.blocks()) throw FormatError(fmt::format("{} blocks from ({}, {}) run off the disk", n, track, sector));
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * kBlockWords);
  return {begin, begin + static_cast<std::ptrdiff_t>(n * kBlockWords)};
}

std::size_t DiskImage::install(std::span<const Word> words, std::uint32_t track, std::uint32_t sector) {
  const std::size_t n = (words.size() + kBlockWords - 1) / kBlockWords;
  std::vector<Word> padded(n * kBlockWords, 0);
  std::copy(words.begin(), words.end(), padded.begin());
  write_blocks(track, sector, padded);
  return n;
}

std::vector<Word> DiskImage::to_words() const {
  std::vector<Word> out = {static_cast<Word>(kMagic),         static_cast<Word>(kVersion),
                           static_cast<Word>(geo_.tracks),     static_cast<Word>(geo_.sectors),
                           static_cast<Word>(kBlockWords),     static_cast<Word>(geo_.sector_time),
                           static_cast<Word>(geo_.gap),        static_cast<Word>(geo_.t2t),
                           static_cast<Word>(geo_.max_seek)};
  out.insert(out.end(), data_.begin(), data_.end());
  return out;
}

DiskImage DiskImage::from_words(std::span<const Word> words) {
  if (words.size() < kHeaderWords) throw FormatError("disk image shorter than its header");
  auto u = [&](std::size_t i) { return static_cast<UWord>(words[i]); };
  if (u(0) != kMagic) throw FormatError(fmt::format("bad disk image magic 0x{:08X} at offset 0", u(0)));
  if (u(1) != kVersion) throw FormatError(fmt::format("unsupported disk image version {}", u(1)));
  if (u(4) != kBlockWords) throw FormatError(fmt::format("unsupported block size {}", u(4)));
  DiskGeometry g{u(2), u(3), u(5), u(6), u(7), u(8)};
  DiskImage img(g);
  if (words.size() != kHeaderWords + img.data_.size())
    throw FormatError(fmt::format("disk image has {} words, geometry needs {}", words.size(),
                                  kHeaderWords + img.data_.size()));
  std::copy(words.begin() + kHeaderWords, words.end(), img.data_.begin());
  return img;
}

void DiskImage::save(const std::filesystem::path& path) const { write_words(path, to_words()); }

DiskImage DiskImage::load(const std::filesystem::path& path) { return from_words(read_words(path)); }

}  // namespace clown
