#include "clown/words_io.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "clown/error.hpp"

namespace clown {

std::vector<std::uint8_t> words_to_bytes(std::span<const Word> words) {
  std::vector<std::uint8_t> out;
  out.reserve(words.size() * 4);
  for (Word w : words) {
    const auto u = static_cast<UWord>(w);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  return out;
}

std::vector<Word> bytes_to_words(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) throw FormatError(fmt::format("{} bytes is not a whole number of words", bytes.size()));
  std::vector<Word> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    UWord u = 0;
    for (int k = 0; k < 4; ++k) u |= UWord{bytes[4 * i + k]} << (8 * k);
    out[i] = static_cast<Word>(u);
  }
  return out;
}

std::vector<Word> read_words(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return bytes_to_words(bytes);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_words(const std::filesystem::path& path, std::span<const Word> words) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot create {}", path.string()));
  const auto bytes = words_to_bytes(words);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(fmt::format("write to {} failed", path.string()));
}

}  // namespace clown
