#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clown/types.hpp"

namespace clown {

struct Segment {
  std::string name;
  bool writable = false;
  bool executable = false;
  std::vector<Word> words;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Defined symbols carry a segment index and a segment-relative value;
/// externals have no segment.
struct Symbol {
  std::string name;
  std::optional<std::uint32_t> segment;
  Word value = 0;
  bool global = false;

  bool external() const { return !segment.has_value(); }
  friend bool operator==(const Symbol&, const Symbol&) = default;
};

enum class RelocType : std::uint32_t { AbsoluteWord = 0 };

/// The word at (segment, offset) holds an addend; the final address of
/// `symbol` is added to it at link/load time.
struct Relocation {
  std::uint32_t segment = 0;
  std::uint32_t offset = 0;
  std::uint32_t symbol = 0;
  RelocType type = RelocType::AbsoluteWord;

  friend bool operator==(const Relocation&, const Relocation&) = default;
};

struct EntryPoint {
  std::uint32_t segment = 0;
  std::uint32_t offset = 0;
  friend bool operator==(const EntryPoint&, const EntryPoint&) = default;
};

struct ObjectModule {
  std::uint32_t flags = 0;  // bit0: output of the linker
  std::vector<Segment> segments;
  std::vector<Symbol> symbols;
  std::vector<Relocation> relocations;
  std::optional<EntryPoint> entry;

  static constexpr std::uint32_t kLinked = 1;

  std::optional<std::size_t> find_segment(const std::string& name) const {
    for (std::size_t i = 0; i < segments.size(); ++i)
      if (segments[i].name == name) return i;
    return std::nullopt;
  }
  std::optional<std::size_t> find_symbol(const std::string& name) const {
    for (std::size_t i = 0; i < symbols.size(); ++i)
      if (symbols[i].name == name) return i;
    return std::nullopt;
  }
  bool has_externals() const {
    for (const auto& s : symbols)
      if (s.external()) return true;
    return false;
  }

  friend bool operator==(const ObjectModule&, const ObjectModule&) = default;
};

}  // namespace clown
