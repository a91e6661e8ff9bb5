#include "clown/link.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "clown/error.hpp"

namespace clown {

ObjectModule link(std::span<const LinkInput> inputs) {
  ObjectModule out;
  out.flags = ObjectModule::kLinked;

  struct Placement {
    std::uint32_t segment;
    std::uint32_t offset;
  };
  std::vector<std::vector<Placement>> placed(inputs.size());
  std::vector<std::vector<std::optional<std::uint32_t>>> sym_map(inputs.size());
  std::map<std::string, std::pair<std::uint32_t, std::size_t>> globals;  // name -> (out symbol, module)

  for (std::size_t mi = 0; mi < inputs.size(); ++mi) {
    const auto& m = inputs[mi].module;
    for (const auto& seg : m.segments) {
      auto idx = out.find_segment(seg.name);
      if (!idx) {
        out.segments.push_back(Segment{seg.name, seg.writable, seg.executable, {}});
        idx = out.segments.size() - 1;
      }
      auto& dst = out.segments[*idx];
      dst.writable = dst.writable || seg.writable;
      dst.executable = dst.executable || seg.executable;
      const auto offset = align_up(static_cast<std::uint32_t>(dst.words.size()));
      dst.words.resize(offset, 0);
      dst.words.insert(dst.words.end(), seg.words.begin(), seg.words.end());
      placed[mi].push_back({static_cast<std::uint32_t>(*idx), offset});
    }
    sym_map[mi].resize(m.symbols.size());
    for (std::size_t si = 0; si < m.symbols.size(); ++si) {
      const auto& s = m.symbols[si];
      if (s.external()) continue;
      const auto& p = placed[mi].at(*s.segment);
      const auto out_idx = static_cast<std::uint32_t>(out.symbols.size());
      out.symbols.push_back(Symbol{s.name, p.segment, s.value + static_cast<Word>(p.offset), s.global});
      sym_map[mi][si] = out_idx;
      if (s.global) {
        auto [it, fresh] = globals.try_emplace(s.name, out_idx, mi);
        if (!fresh)
          throw LinkError(fmt::format("duplicate global '{}' defined in {} and {}", s.name,
                                      inputs[it->second.second].name, inputs[mi].name));
      }
    }
  }

  std::vector<std::string> unresolved;
  for (std::size_t mi = 0; mi < inputs.size(); ++mi) {
    const auto& m = inputs[mi].module;
    for (std::size_t si = 0; si < m.symbols.size(); ++si) {
      const auto& s = m.symbols[si];
      if (!s.external()) continue;
      if (auto it = globals.find(s.name); it != globals.end()) {
        sym_map[mi][si] = it->second.first;
      } else {
        unresolved.push_back(fmt::format("{} (referenced in {})", s.name, inputs[mi].name));
      }
    }
  }
  if (!unresolved.empty()) {
    std::string list;
    for (const auto& u : unresolved) list += (list.empty() ? "" : ", ") + u;
    throw LinkError("unresolved external symbols: " + list);
  }

  for (std::size_t mi = 0; mi < inputs.size(); ++mi) {
    const auto& m = inputs[mi].module;
    for (const auto& r : m.relocations) {
      const auto& p = placed[mi].at(r.segment);
      out.relocations.push_back(Relocation{p.segment, p.offset + r.offset, *sym_map[mi].at(r.symbol), r.type});
    }
    if (m.entry && !out.entry) {
      const auto& p = placed[mi].at(m.entry->segment);
      out.entry = EntryPoint{p.segment, p.offset + m.entry->offset};
    }
  }
  return out;
}

Layout layout(const ObjectModule& m, Address base, const std::map<std::string, Address>& overrides) {
  for (const auto& [name, addr] : overrides) {
    if (!m.find_segment(name)) throw LinkError(fmt::format("--base names unknown segment '{}'", name));
    (void)addr;
  }
  Layout l;
  l.bases.resize(m.segments.size());
  Address cursor = base;
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    if (auto it = overrides.find(m.segments[i].name); it != overrides.end()) {
      l.bases[i] = it->second;
    } else {
      l.bases[i] = cursor;
      cursor = align_up(cursor + static_cast<Address>(m.segments[i].words.size()));
    }
  }

  // Overlap check over all placed ranges.
  std::vector<std::size_t> order(m.segments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return l.bases[a] < l.bases[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto a = order[k - 1], b = order[k];
    const Address a_end = l.bases[a] + static_cast<Address>(m.segments[a].words.size());
    if (a_end > l.bases[b] && !m.segments[b].words.empty())
      throw LinkError(fmt::format("segment '{}' [0x{:X}, 0x{:X}) overlaps '{}' at 0x{:X}", m.segments[a].name,
                                  l.bases[a], a_end, m.segments[b].name, l.bases[b]));
  }
  if (m.segments.empty()) {
    l.low = l.high = base;
  } else {
    l.low = l.bases[order.front()];
    l.high = l.low;
    for (std::size_t i = 0; i < m.segments.size(); ++i)
      l.high = std::max<Address>(l.high, l.bases[i] + static_cast<Address>(m.segments[i].words.size()));
  }
  return l;
}

Image relocate(const ObjectModule& m, const Layout& l) {
  Image img;
  img.base = l.low;
  img.words.assign(l.high - l.low, 0);
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const auto& w = m.segments[i].words;
    std::copy(w.begin(), w.end(), img.words.begin() + (l.bases[i] - l.low));
  }
  std::vector<std::string> externals;
  for (const auto& r : m.relocations) {
    const auto& s = m.symbols.at(r.symbol);
    if (s.external()) {
      externals.push_back(s.name);
      continue;
    }
    const Address site = l.bases[r.segment] + r.offset - l.low;
    const Address target = l.bases[*s.segment] + static_cast<Address>(s.value);
    img.words[site] = static_cast<Word>(static_cast<Address>(img.words[site]) + target);
  }
  if (!externals.empty()) {
    std::sort(externals.begin(), externals.end());
    externals.erase(std::unique(externals.begin(), externals.end()), externals.end());
    std::string list;
    for (const auto& e : externals) list += (list.empty() ? "" : ", ") + e;
    throw LinkError("unresolved external symbols: " + list);
  }
  if (m.entry) img.entry = l.bases[m.entry->segment] + m.entry->offset;
  return img;
}

Image link_image(const ObjectModule& m, Address base, const std::map<std::string, Address>& overrides) {
  return relocate(m, layout(m, base, overrides));
}

}  // namespace clown
