#include "clown/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "clown/expr.hpp"
#include "clown/isa.hpp"
#include "clown/link.hpp"

namespace clown {

using as::Tok;
using as::Token;
using as::Value;
using isa::Shape;

std::string section_symbol(const std::string& segment_name) { return "." + segment_name; }

namespace {

enum class OperandKind : std::uint8_t { Reg, Seg, MemReg, MemExpr, Paren, Expr };

struct Operand {
  OperandKind kind;
  unsigned reg = 0;
  std::size_t begin = 0;  // expression token range [begin, end)
  std::size_t end = 0;
  int column = 0;
};

bool is_punct(const Token& t, std::string_view p) { return t.kind == Tok::Punct && t.text == p; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Splits [from, End) on top-level commas.
std::vector<std::pair<std::size_t, std::size_t>> split_commas(const std::vector<Token>& t, std::size_t from,
                                                              const SourceLocation& loc) {
  std::vector<std::pair<std::size_t, std::size_t>> parts;
  if (t[from].kind == Tok::End) return parts;
  int depth = 0;
  std::size_t start = from;
  for (std::size_t i = from;; ++i) {
    const Token& tok = t[i];
    if (tok.kind == Tok::End || (depth == 0 && is_punct(tok, ","))) {
      if (i == start) throw AsmError({loc.file, loc.line, tok.column}, "missing operand");
      parts.emplace_back(start, i);
      if (tok.kind == Tok::End) break;
      start = i + 1;
      continue;
    }
    if (is_punct(tok, "(") || is_punct(tok, "[")) ++depth;
    if (is_punct(tok, ")") || is_punct(tok, "]")) {
      if (--depth < 0) throw AsmError({loc.file, loc.line, tok.column}, fmt::format("unbalanced '{}'", tok.text));
    }
  }
  return parts;
}

// Index of the bracket closing the one at `open`, or npos.
std::size_t matching(const std::vector<Token>& t, std::size_t open, std::size_t end) {
  const std::string o = t[open].text;
  const std::string c = o == "(" ? ")" : "]";
  int depth = 0;
  for (std::size_t i = open; i < end; ++i) {
    if (is_punct(t[i], o)) ++depth;
    if (is_punct(t[i], c) && --depth == 0) return i;
  }
  return std::string::npos;
}

Operand classify(const std::vector<Token>& t, std::size_t b, std::size_t e, const SourceLocation& loc) {
  Operand op{OperandKind::Expr, 0, b, e, t[b].column};
  if (e - b == 1 && t[b].kind == Tok::Reg) return {OperandKind::Reg, static_cast<unsigned>(t[b].value), b, e, op.column};
  if (e - b == 1 && t[b].kind == Tok::Seg) return {OperandKind::Seg, static_cast<unsigned>(t[b].value), b, e, op.column};
  if (is_punct(t[b], "[")) {
    if (matching(t, b, e) != e - 1) throw AsmError({loc.file, loc.line, t[b].column}, "malformed memory operand");
    if (e - b == 3 && t[b + 1].kind == Tok::Reg)
      return {OperandKind::MemReg, static_cast<unsigned>(t[b + 1].value), b, e, op.column};
    return {OperandKind::MemExpr, 0, b + 1, e - 1, op.column};
  }
  if (is_punct(t[b], "(") && matching(t, b, e) == e - 1) op.kind = OperandKind::Paren;
  for (std::size_t i = b; i < e; ++i) {
    if (t[i].kind == Tok::Reg || t[i].kind == Tok::Seg)
      throw AsmError({loc.file, loc.line, t[i].column}, "register not allowed in an expression");
    if (t[i].kind == Tok::String) throw AsmError({loc.file, loc.line, t[i].column}, "string not allowed here");
  }
  return op;
}

bool immediate(const Operand& o) { return o.kind == OperandKind::Expr || o.kind == OperandKind::Paren; }

bool shape_matches(Shape s, const std::vector<Operand>& ops) {
  auto n = [&](std::size_t k) { return ops.size() == k; };
  auto reg = [&](std::size_t i) { return ops[i].kind == OperandKind::Reg; };
  switch (s) {
    case Shape::None: return n(0);
    case Shape::Rd: case Shape::Rs: return n(1) && reg(0);
    case Shape::RdRs: return n(2) && reg(0) && reg(1);
    case Shape::RdImm: return n(2) && reg(0) && immediate(ops[1]);
    case Shape::Imm: case Shape::Vec: return n(1) && immediate(ops[0]);
    case Shape::RdMemRs: return n(2) && reg(0) && ops[1].kind == OperandKind::MemReg;
    case Shape::RdMemImm: return n(2) && reg(0) && ops[1].kind == OperandKind::MemExpr;
    case Shape::MemRdRs: return n(2) && ops[0].kind == OperandKind::MemReg && reg(1);
    case Shape::MemImmRs: return n(2) && ops[0].kind == OperandKind::MemExpr && reg(1);
    case Shape::SegRs: return n(2) && ops[0].kind == OperandKind::Seg && reg(1);
    case Shape::RdSeg: return n(2) && reg(0) && ops[1].kind == OperandKind::Seg;
    case Shape::SegImm: return n(2) && ops[0].kind == OperandKind::Seg && immediate(ops[1]);
    case Shape::RdPort: case Shape::RsPort: return n(2) && reg(0) && ops[1].kind == OperandKind::Paren;
    case Shape::ImmPort: return n(2) && immediate(ops[0]) && ops[1].kind == OperandKind::Paren;
  }
  return false;
}

struct SegState {
  std::string name;
  bool writable = false;
  bool executable = false;
  std::uint32_t size = 0;  // pass 1
  std::vector<Word> words;  // pass 2
};

struct Label {
  std::uint32_t segment;
  std::uint32_t offset;
  SourceLocation loc;
};

struct Line {
  SourceLocation loc;
  std::string text;
  std::vector<Token> toks;
};

class Assembler {
 public:
  explicit Assembler(const std::string& filename) : filename_(filename) {}

  Assembly run(std::string_view text) {
    read_lines(text);
    for (pass_ = 1; pass_ <= 2; ++pass_) {
      segments_.resize(std::max<std::size_t>(segments_.size(), 1));
      if (pass_ == 1) segments_[0] = SegState{"code", false, true, 0, {}};
      cur_ = 0;
      for (auto& s : segments_) s.size = 0;
      for (const auto& line : lines_) statement(line);
    }
    return finish();
  }

 private:
  // ---- input ----

  void read_lines(std::string_view text) {
    std::string file = filename_;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.rfind("#line ", 0) == 0) {
        std::istringstream ls(line.substr(6));
        int n = 0;
        ls >> n;
        std::string rest;
        std::getline(ls, rest);
        const auto q1 = rest.find('"'), q2 = rest.rfind('"');
        if (q1 != std::string::npos && q2 > q1) file = rest.substr(q1 + 1, q2 - q1 - 1);
        line_no = n - 1;
        continue;
      }
      SourceLocation loc{file, line_no, 0};
      auto toks = as::tokenize(line, loc);
      if (toks.size() == 1) continue;
      lines_.push_back({loc, line, std::move(toks)});
    }
  }

  // ---- environment ----

  SourceLocation at(const Line& l, int column) const { return {l.loc.file, l.loc.line, column}; }

  std::optional<Value> lookup(const std::string& name) const {
    if (auto it = labels_.find(name); it != labels_.end()) {
      Value v;
      v.k = it->second.offset;
      v.kind = Value::Kind::Segment;
      v.segment = it->second.segment;
      return v;
    }
    if (externs_.count(name)) {
      Value v;
      v.kind = Value::Kind::External;
      v.external = name;
      return v;
    }
    return std::nullopt;
  }

  Value eval(const Line& l, std::size_t b, std::size_t e, bool need_defined = false) {
    as::ExprEnv env;
    env.lookup = [this](const std::string& n) { return lookup(n); };
    env.here.kind = Value::Kind::Segment;
    env.here.segment = cur_;
    env.here.k = segments_[cur_].size;
    env.lenient = pass_ == 1 && !need_defined;
    std::vector<Token> sub(l.toks.begin() + static_cast<std::ptrdiff_t>(b), l.toks.begin() + static_cast<std::ptrdiff_t>(e));
    sub.push_back({Tok::End, "", 0, l.toks[e].column});
    std::size_t pos = 0;
    Value v = as::eval(sub, pos, env, l.loc);
    if (sub[pos].kind != Tok::End) throw AsmError(at(l, sub[pos].column), fmt::format("unexpected '{}'", sub[pos].text));
    return v;
  }

  std::int64_t constant(const Line& l, std::size_t b, std::size_t e, const char* what) {
    const Value v = eval(l, b, e, true);
    if (!v.absolute()) throw AsmError(at(l, l.toks[b].column), fmt::format("{} must be a constant", what));
    return v.k;
  }

  // ---- emission ----

  void emit(Word w) {
    auto& s = segments_[cur_];
    if (pass_ == 2) s.words.push_back(w);
    ++s.size;
  }

  // Emits an address-capable word, recording a relocation if needed.
  void emit_value(const Line& l, const Value& v, int column) {
    if (v.k < -0x80000000ll || v.k > 0xFFFFFFFFll)
      throw AsmError(at(l, column), fmt::format("value {} does not fit in 32 bits", v.k));
    if (pass_ == 2 && !v.absolute()) {
      std::string sym = v.kind == Value::Kind::External ? v.external : section_symbol(segments_[v.segment].name);
      relocs_.push_back({cur_, segments_[cur_].size, sym});
    }
    emit(static_cast<Word>(static_cast<std::uint32_t>(v.k)));
  }

  // ---- statements ----

  void statement(const Line& l) {
    const auto& t = l.toks;
    std::size_t i = 0;
    while (t[i].kind == Tok::Ident && is_punct(t[i + 1], ":")) {
      define_label(l, t[i]);
      i += 2;
    }
    const std::uint32_t seg_before = cur_;
    const std::uint32_t off_before = segments_[cur_].size;
    if (t[i].kind == Tok::End) return;
    if (t[i].kind != Tok::Ident) throw AsmError(at(l, t[i].column), "expected a mnemonic or directive");
    if (t[i].text[0] == '.') {
      directive(l, i);
    } else {
      instruction(l, i);
    }
    if (pass_ == 2) {
      ListingLine ll{l.loc, segments_[seg_before].name, off_before, {}, l.text};
      if (cur_ == seg_before) {
        const auto& w = segments_[cur_].words;
        ll.words.assign(w.begin() + off_before, w.end());
      }
      listing_.push_back(std::move(ll));
    }
  }

  void define_label(const Line& l, const Token& tok) {
    if (pass_ == 2) {
      const auto& lab = labels_.at(tok.text);
      if (lab.segment != cur_ || lab.offset != segments_[cur_].size)
        throw AsmError(at(l, tok.column), fmt::format("internal: label '{}' moved between passes", tok.text));
      return;
    }
    if (auto it = labels_.find(tok.text); it != labels_.end())
      throw AsmError(at(l, tok.column), fmt::format("duplicate label '{}' (first defined at {})", tok.text,
                                                    to_string(it->second.loc)));
    labels_.emplace(tok.text, Label{cur_, segments_[cur_].size, at(l, tok.column)});
    label_order_.push_back(tok.text);
  }

  std::vector<std::string> names(const Line& l, std::size_t from) {
    std::vector<std::string> out;
    for (auto [b, e] : split_commas(l.toks, from, l.loc)) {
      if (e - b != 1 || l.toks[b].kind != Tok::Ident || l.toks[b].text[0] == '.')
        throw AsmError(at(l, l.toks[b].column), "expected a symbol name");
      out.push_back(l.toks[b].text);
    }
    if (out.empty()) throw AsmError(at(l, l.toks[from].column), "expected a symbol name");
    return out;
  }

  void pad_to(std::uint32_t target) {
    while (segments_[cur_].size < target) emit(0);
  }

  void directive(const Line& l, std::size_t i) {
    const auto& t = l.toks;
    const std::string name = lower(t[i].text);
    const std::size_t a = i + 1;
    const auto args = split_commas(t, a, l.loc);
    auto need = [&](std::size_t n) {
      if (args.size() != n)
        throw AsmError(at(l, t[i].column), fmt::format("{} takes {} argument{}", name, n, n == 1 ? "" : "s"));
    };

    if (name == ".segment") {
      if (args.empty() || args.size() > 2) throw AsmError(at(l, t[i].column), ".segment takes a name and optional flags");
      const auto [nb, ne] = args[0];
      if (ne - nb != 1 || t[nb].kind != Tok::Ident) throw AsmError(at(l, t[nb].column), "expected a segment name");
      bool w = false, x = false;
      if (args.size() == 2) {
        const auto [fb, fe] = args[1];
        if (fe - fb != 1 || t[fb].kind != Tok::Ident) throw AsmError(at(l, t[fb].column), "segment flags are w and/or x");
        for (char c : lower(t[fb].text)) {
          if (c == 'w') w = true;
          else if (c == 'x') x = true;
          else throw AsmError(at(l, t[fb].column), fmt::format("unknown segment flag '{}'", c));
        }
      }
      select_segment(t[nb].text, w, x);
    } else if (name == ".global") {
      for (auto& n : names(l, a)) globals_.insert(n);
    } else if (name == ".extern") {
      for (auto& n : names(l, a)) {
        if (pass_ == 1 && labels_.count(n)) throw AsmError(at(l, t[a].column), fmt::format("'{}' is defined here", n));
        externs_.insert(n);
      }
    } else if (name == ".word") {
      if (args.empty()) throw AsmError(at(l, t[i].column), ".word needs a value");
      for (auto [b, e] : args) emit_value(l, eval(l, b, e), t[b].column);
    } else if (name == ".ascii") {
      need(1);
      const auto [b, e] = args[0];
      if (e - b != 1 || t[b].kind != Tok::String) throw AsmError(at(l, t[b].column), ".ascii expects a string");
      for (unsigned char c : t[b].text) emit(c);
      emit(0);
    } else if (name == ".space") {
      need(1);
      const auto n = constant(l, args[0].first, args[0].second, ".space size");
      if (n < 0 || n > (1 << 24)) throw AsmError(at(l, t[a].column), "bad .space size");
      pad_to(segments_[cur_].size + static_cast<std::uint32_t>(n));
    } else if (name == ".align") {
      need(1);
      const auto n = constant(l, args[0].first, args[0].second, ".align boundary");
      if (n <= 0 || n > (1 << 20)) throw AsmError(at(l, t[a].column), "bad .align boundary");
      const auto u = static_cast<std::uint32_t>(n);
      pad_to((segments_[cur_].size + u - 1) / u * u);
    } else if (name == ".org") {
      need(1);
      const auto n = constant(l, args[0].first, args[0].second, ".org offset");
      if (n < segments_[cur_].size)
        throw AsmError(at(l, t[a].column), fmt::format(".org 0x{:X} is behind the current offset 0x{:X}", n,
                                                       segments_[cur_].size));
      pad_to(static_cast<std::uint32_t>(n));
    } else if (name == ".entry") {
      need(1);
      const auto [b, e] = args[0];
      if (e - b != 1 || t[b].kind != Tok::Ident) throw AsmError(at(l, t[b].column), ".entry expects a label");
      entry_ = t[b].text;
      entry_loc_ = at(l, t[b].column);
    } else {
      throw AsmError(at(l, t[i].column), fmt::format("unknown directive {}", t[i].text));
    }
  }

  void select_segment(const std::string& name, bool w, bool x) {
    for (std::uint32_t k = 0; k < segments_.size(); ++k) {
      if (segments_[k].name == name) {
        segments_[k].writable = segments_[k].writable || w;
        segments_[k].executable = segments_[k].executable || x;
        cur_ = k;
        return;
      }
    }
    segments_.push_back(SegState{name, w, x, 0, {}});
    cur_ = static_cast<std::uint32_t>(segments_.size() - 1);
  }

  void instruction(const Line& l, std::size_t i) {
    const auto& t = l.toks;
    const std::string m = lower(t[i].text);
    std::vector<Operand> ops;
    for (auto [b, e] : split_commas(t, i + 1, l.loc)) ops.push_back(classify(t, b, e, l.loc));

    const isa::OpcodeInfo* chosen = nullptr;
    bool known = false;
    for (const auto& e : isa::roster()) {
      if (e.mnemonic != m && e.base_mnemonic != m) continue;
      known = true;
      if (shape_matches(e.shape, ops)) {
        chosen = &e;
        break;
      }
    }
    if (!known) throw AsmError(at(l, t[i].column), fmt::format("unknown mnemonic '{}'", t[i].text));
    if (!chosen) throw AsmError(at(l, t[i].column), fmt::format("operands do not fit any form of '{}'", m));

    isa::Instruction in = isa::make(chosen->op);
    const std::uint32_t length = static_cast<std::uint32_t>(in.length());
    if (pass_ == 1) {
      segments_[cur_].size += length;
      return;
    }

    std::optional<Value> imm;
    int imm_column = 0;
    auto take_imm = [&](const Operand& o) {
      imm = eval(l, o.begin, o.end);
      imm_column = o.column;
    };
    auto small = [&](const Operand& o, std::int64_t lo, std::int64_t hi, const char* what) -> std::int32_t {
      const Value v = eval(l, o.begin, o.end);
      if (!v.absolute()) throw AsmError(at(l, o.column), fmt::format("{} must be a constant", what));
      if (v.k < lo || v.k > hi) throw AsmError(at(l, o.column), fmt::format("{} {} out of range {}..{}", what, v.k, lo, hi));
      return static_cast<std::int32_t>(v.k);
    };

    switch (chosen->shape) {
      case Shape::None: break;
      case Shape::Rd: in.rd = static_cast<std::uint8_t>(ops[0].reg); break;
      case Shape::Rs: in.rs = static_cast<std::uint8_t>(ops[0].reg); break;
      case Shape::RdRs: case Shape::RdMemRs: case Shape::MemRdRs: case Shape::SegRs: case Shape::RdSeg:
        in.rd = static_cast<std::uint8_t>(ops[0].reg);
        in.rs = static_cast<std::uint8_t>(ops[1].reg);
        break;
      case Shape::RdImm: case Shape::RdMemImm: case Shape::SegImm:
        in.rd = static_cast<std::uint8_t>(ops[0].reg);
        take_imm(ops[1]);
        break;
      case Shape::Imm: take_imm(ops[0]); break;
      case Shape::MemImmRs:
        take_imm(ops[0]);
        in.rs = static_cast<std::uint8_t>(ops[1].reg);
        break;
      case Shape::RdPort: in.rd = static_cast<std::uint8_t>(ops[0].reg); in.imm16 = small(ops[1], 0, 255, "port"); break;
      case Shape::RsPort: in.rs = static_cast<std::uint8_t>(ops[0].reg); in.imm16 = small(ops[1], 0, 255, "port"); break;
      case Shape::ImmPort:
        take_imm(ops[0]);
        in.imm16 = small(ops[1], 0, 255, "port");
        break;
      case Shape::Vec: in.imm16 = small(ops[0], 0, static_cast<std::int64_t>(kVectorCount) - 1, "vector"); break;
    }

    Word buf[2];
    const std::size_t n = isa::encode_into(in, std::span<Word, 2>(buf));
    if (n != length) throw AsmError(at(l, t[i].column), "internal: instruction size changed between passes");
    emit(buf[0]);
    if (n == 2) emit_value(l, imm.value_or(Value{}), imm_column);
  }

  // ---- output ----

  Assembly finish() {
    Assembly out;
    auto& m = out.module;
    for (const auto& s : segments_) m.segments.push_back(Segment{s.name, s.writable, s.executable, s.words});

    std::map<std::string, std::uint32_t> index;
    auto add = [&](Symbol s) {
      index[s.name] = static_cast<std::uint32_t>(m.symbols.size());
      m.symbols.push_back(std::move(s));
    };
    for (std::uint32_t k = 0; k < segments_.size(); ++k) add(Symbol{section_symbol(segments_[k].name), k, 0, false});
    for (const auto& name : label_order_) {
      const auto& lab = labels_.at(name);
      if (externs_.count(name)) throw AsmError(lab.loc, fmt::format("'{}' is declared .extern", name));
      add(Symbol{name, lab.segment, static_cast<Word>(lab.offset), globals_.count(name) != 0});
    }
    for (const auto& g : globals_) {
      if (!labels_.count(g)) throw AsmError({filename_, 0, 0}, fmt::format(".global '{}' is never defined", g));
    }
    for (const auto& e : externs_) add(Symbol{e, std::nullopt, 0, false});

    for (const auto& r : relocs_) m.relocations.push_back(Relocation{r.segment, r.offset, index.at(r.symbol), RelocType::AbsoluteWord});
    if (entry_) {
      auto it = labels_.find(*entry_);
      if (it == labels_.end()) throw AsmError(entry_loc_, fmt::format(".entry label '{}' is not defined", *entry_));
      m.entry = EntryPoint{it->second.segment, it->second.offset};
    }
    out.listing = std::move(listing_);
    return out;
  }

  struct PendingReloc {
    std::uint32_t segment;
    std::uint32_t offset;
    std::string symbol;
  };

  std::string filename_;
  std::vector<Line> lines_;
  int pass_ = 1;
  std::vector<SegState> segments_;
  std::uint32_t cur_ = 0;
  std::map<std::string, Label> labels_;
  std::vector<std::string> label_order_;
  std::set<std::string> globals_;
  std::set<std::string> externs_;
  std::vector<PendingReloc> relocs_;
  std::optional<std::string> entry_;
  SourceLocation entry_loc_;
  std::vector<ListingLine> listing_;
};

}  // namespace

Assembly assemble_preprocessed(std::string_view text, const std::string& filename) {
  return Assembler(filename).run(text);
}

Assembly assemble_source(std::string_view text, const std::string& filename, const PreprocessOptions& pp) {
  return assemble_preprocessed(preprocess(text, filename, pp), filename);
}

Assembly assemble_file(const std::filesystem::path& path, const PreprocessOptions& pp) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AsmError({path.string(), 0, 0}, "cannot open source file");
  std::stringstream ss;
  ss << in.rdbuf();
  return assemble_source(ss.str(), path.string(), pp);
}

ObjectModule assemble(std::string_view text, const std::string& filename, const PreprocessOptions& pp) {
  return assemble_source(text, filename, pp).module;
}

std::vector<Word> emit_bin(const ObjectModule& m, Address base, std::optional<Address> entry_disp) {
  Image img = link_image(m, base);
  if (entry_disp) {
    if (!img.entry) throw LinkError("--entry-disp given but the program has no .entry");
    if (*img.entry != base + *entry_disp)
      throw LinkError(fmt::format("entry point is at displacement 0x{:X}, expected 0x{:X}", *img.entry - base, *entry_disp));
  }
  return std::move(img.words);
}

std::string format_listing(const Assembly& a) {
  std::string out;
  for (const auto& l : a.listing) {
    std::string words;
    for (std::size_t k = 0; k < l.words.size() && k < 2; ++k) words += fmt::format("{:08X} ", static_cast<UWord>(l.words[k]));
    if (l.words.size() > 2) words += fmt::format("+{} ", l.words.size() - 2);
    out += fmt::format("{:>8}:{:08X}  {:<20} {:>5}  {}\n", l.segment, l.offset, words, l.loc.line, l.text);
  }
  return out;
}

}  // namespace clown
