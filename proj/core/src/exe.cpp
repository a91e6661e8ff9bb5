#include "clown/exe.hpp"

#include <map>

#include <fmt/format.h>

#include "clown/error.hpp"
#include "clown/words_io.hpp"

namespace clown {

namespace {

class StringTable {
 public:
  std::uint32_t index(const std::string& s) {
    auto [it, fresh] = ids_.try_emplace(s, static_cast<std::uint32_t>(strings_.size()));
    if (fresh) strings_.push_back(s);
    return it->second;
  }
  const std::vector<std::string>& strings() const { return strings_; }

 private:
  std::map<std::string, std::uint32_t> ids_;
  std::vector<std::string> strings_;
};

Word w(std::uint32_t v) { return static_cast<Word>(v); }

class Reader {
 public:
  explicit Reader(std::span<const Word> words) : words_(words) {}

  std::uint32_t at(std::size_t i, const char* what) const {
    if (i >= words_.size()) throw FormatError(fmt::format("truncated exe: {} missing at word offset {}", what, i));
    return static_cast<std::uint32_t>(words_[i]);
  }
  std::size_t size() const { return words_.size(); }
  std::span<const Word> slice(std::size_t from, std::size_t n) const { return words_.subspan(from, n); }

 private:
  std::span<const Word> words_;
};

}  // namespace

bool is_exe(std::span<const Word> words) { return !words.empty() && static_cast<std::uint32_t>(words[0]) == kExeMagic; }

std::vector<Word> write_exe_words(const ObjectModule& m) {
  StringTable strings;
  std::vector<std::uint32_t> seg_names, sym_names;
  for (const auto& s : m.segments) seg_names.push_back(strings.index(s.name));
  for (const auto& s : m.symbols) sym_names.push_back(strings.index(s.name));

  std::size_t string_words = 1;
  for (const auto& s : strings.strings()) string_words += s.size() + 1;
  const std::size_t tables =
      kExeHeaderWords + 4 * (m.segments.size() + m.symbols.size() + m.relocations.size()) + string_words;

  std::vector<Word> out;
  out.reserve(tables);
  out.push_back(w(kExeMagic));
  out.push_back(w(kExeVersion));
  out.push_back(w(m.flags));
  out.push_back(w(m.entry ? m.entry->segment : kExeNone));
  out.push_back(w(m.entry ? m.entry->offset : 0));
  out.push_back(w(static_cast<std::uint32_t>(m.segments.size())));
  out.push_back(w(static_cast<std::uint32_t>(m.symbols.size())));
  out.push_back(w(static_cast<std::uint32_t>(m.relocations.size())));

  std::size_t data_at = tables;
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const auto& s = m.segments[i];
    out.push_back(w(seg_names[i]));
    out.push_back(w(static_cast<std::uint32_t>(s.words.size())));
    out.push_back(w((s.writable ? 1u : 0u) | (s.executable ? 2u : 0u)));
    out.push_back(w(static_cast<std::uint32_t>(data_at)));
    data_at += s.words.size();
  }
  for (std::size_t i = 0; i < m.symbols.size(); ++i) {
    const auto& s = m.symbols[i];
    out.push_back(w(sym_names[i]));
    out.push_back(w(s.segment ? *s.segment : kExeNone));
    out.push_back(s.value);
    out.push_back(w(s.global ? 1u : 0u));
  }
  for (const auto& r : m.relocations) {
    out.push_back(w(r.segment));
    out.push_back(w(r.offset));
    out.push_back(w(r.symbol));
    out.push_back(w(static_cast<std::uint32_t>(r.type)));
  }
  out.push_back(w(static_cast<std::uint32_t>(strings.strings().size())));
  for (const auto& s : strings.strings()) {
    for (unsigned char c : s) out.push_back(c);
    out.push_back(0);
  }
  for (const auto& s : m.segments) out.insert(out.end(), s.words.begin(), s.words.end());
  return out;
}

ObjectModule read_exe_words(std::span<const Word> words) {
  const Reader r(words);
  if (r.at(0, "magic") != kExeMagic)
    throw FormatError(fmt::format("bad exe magic 0x{:08X} at word offset 0", r.at(0, "magic")));
  if (r.at(1, "version") != kExeVersion)
    throw FormatError(fmt::format("unsupported exe version {} at word offset 1", r.at(1, "version")));

  ObjectModule m;
  m.flags = r.at(2, "flags");
  const std::uint32_t entry_seg = r.at(3, "entry segment");
  const std::uint32_t entry_off = r.at(4, "entry offset");
  const std::uint32_t nseg = r.at(5, "segment count");
  const std::uint32_t nsym = r.at(6, "symbol count");
  const std::uint32_t nrel = r.at(7, "relocation count");
  const std::uint64_t tables_end = kExeHeaderWords + 4ull * (std::uint64_t{nseg} + nsym + nrel);
  if (tables_end >= r.size()) throw FormatError(fmt::format("truncated exe: tables need {} words, file has {}", tables_end + 1, r.size()));

  // String table first, so names can be resolved.
  std::size_t pos = tables_end;
  const std::uint32_t nstr = r.at(pos++, "string count");
  std::vector<std::string> strings;
  for (std::uint32_t i = 0; i < nstr; ++i) {
    std::string s;
    for (;;) {
      const std::uint32_t c = r.at(pos, "string character");
      ++pos;
      if (c == 0) break;
      if (c > 0xFF) throw FormatError(fmt::format("bad string character at word offset {}", pos - 1));
      s.push_back(static_cast<char>(c));
    }
    strings.push_back(std::move(s));
  }
  auto name = [&](std::uint32_t idx, std::size_t where) -> std::string {
    if (idx >= strings.size()) throw FormatError(fmt::format("dangling string index {} at word offset {}", idx, where));
    return strings[idx];
  };

  std::size_t rec = kExeHeaderWords;
  for (std::uint32_t i = 0; i < nseg; ++i, rec += 4) {
    Segment s;
    s.name = name(r.at(rec, "segment name"), rec);
    const std::uint32_t size = r.at(rec + 1, "segment size");
    const std::uint32_t flags = r.at(rec + 2, "segment flags");
    const std::uint32_t offset = r.at(rec + 3, "segment offset");
    s.writable = (flags & 1u) != 0;
    s.executable = (flags & 2u) != 0;
    if (std::uint64_t{offset} + size > r.size() || offset < pos)
      throw FormatError(fmt::format("segment data out of bounds at word offset {}", rec + 3));
    const auto data = r.slice(offset, size);
    s.words.assign(data.begin(), data.end());
    m.segments.push_back(std::move(s));
  }
  for (std::uint32_t i = 0; i < nsym; ++i, rec += 4) {
    Symbol s;
    s.name = name(r.at(rec, "symbol name"), rec);
    const std::uint32_t seg = r.at(rec + 1, "symbol segment");
    if (seg != kExeNone) {
      if (seg >= nseg) throw FormatError(fmt::format("dangling segment index {} at word offset {}", seg, rec + 1));
      s.segment = seg;
    }
    s.value = static_cast<Word>(r.at(rec + 2, "symbol value"));
    s.global = (r.at(rec + 3, "symbol flags") & 1u) != 0;
    m.symbols.push_back(std::move(s));
  }
  for (std::uint32_t i = 0; i < nrel; ++i, rec += 4) {
    Relocation x;
    x.segment = r.at(rec, "relocation segment");
    x.offset = r.at(rec + 1, "relocation offset");
    x.symbol = r.at(rec + 2, "relocation symbol");
    const std::uint32_t type = r.at(rec + 3, "relocation type");
    if (x.segment >= nseg || x.offset >= m.segments[x.segment].words.size())
      throw FormatError(fmt::format("relocation site out of range at word offset {}", rec));
    if (x.symbol >= nsym) throw FormatError(fmt::format("dangling symbol index {} at word offset {}", x.symbol, rec + 2));
    if (type != 0) throw FormatError(fmt::format("unknown relocation type {} at word offset {}", type, rec + 3));
    m.relocations.push_back(x);
  }
  if (entry_seg != kExeNone) {
    if (entry_seg >= nseg) throw FormatError(fmt::format("dangling entry segment {} at word offset 3", entry_seg));
    m.entry = EntryPoint{entry_seg, entry_off};
  }
  return m;
}

std::vector<std::uint8_t> write_exe(const ObjectModule& m) { return words_to_bytes(write_exe_words(m)); }

ObjectModule read_exe(std::span<const std::uint8_t> bytes) { return read_exe_words(bytes_to_words(bytes)); }

void save_exe(const std::filesystem::path& path, const ObjectModule& m) { write_words(path, write_exe_words(m)); }

ObjectModule load_exe(const std::filesystem::path& path) {
  try {
    return read_exe_words(read_words(path));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace clown
