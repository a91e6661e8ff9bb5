#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clown/object.hpp"

namespace clown {

/// Segments are placed on 8-word boundaries, both when same-named segments
/// are merged and when segments are laid out in memory.
inline constexpr std::uint32_t kSegmentAlign = 8;

constexpr std::uint32_t align_up(std::uint32_t v, std::uint32_t a = kSegmentAlign) { return (v + a - 1) / a * a; }

struct LinkInput {
  std::string name;  // for diagnostics
  ObjectModule module;
};

/// Merges modules: same-named segments are concatenated in input order,
/// globals resolve externals, relocations are kept (rebased) so the result
/// stays relocatable. Throws LinkError on unresolved externals (all listed)
/// or duplicate globals (both modules named).
ObjectModule link(std::span<const LinkInput> inputs);

struct Layout {
  std::vector<Address> bases;  // per segment
  Address low = 0;             // lowest placed address
  Address high = 0;            // one past the highest placed word
};

/// Places segments consecutively from `base`; `overrides` pins named
/// segments. Throws LinkError when explicitly placed segments overlap.
Layout layout(const ObjectModule& m, Address base, const std::map<std::string, Address>& overrides = {});

struct Image {
  Address base = 0;
  std::vector<Word> words;     // [base, base + words.size())
  std::optional<Address> entry;
};

/// Patches every relocation with final addresses and flattens the module
/// into one memory image (gaps zero-filled). Throws LinkError if any
/// relocation refers to an external symbol.
Image relocate(const ObjectModule& m, const Layout& l);

/// layout + relocate.
Image link_image(const ObjectModule& m, Address base, const std::map<std::string, Address>& overrides = {});

}  // namespace clown
