#include "clown/isa.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

#include "clown/error.hpp"

namespace clown::isa {
namespace {

using G = Group;
using S = Shape;
using B = BusClass;

constexpr B kMem = B::MemoryReference;
constexpr B kIo = B::IOInstruction;
constexpr B kNone = B::None;

// Order must match enum Op.
constexpr std::array<OpcodeInfo, kOpCount> kRoster{{
    {Op::Mov, G::DataMovement, 0x01, false, "mov", S::RdRs, kNone, ""},
    {Op::Xmov, G::DataMovement, 0x01, true, "xmov", S::RdImm, kNone, "mov"},
    {Op::Ld, G::DataMovement, 0x02, false, "ld", S::RdMemRs, kMem, ""},
    {Op::Xld, G::DataMovement, 0x02, true, "xld", S::RdMemImm, kMem, "ld"},
    {Op::St, G::DataMovement, 0x03, false, "st", S::MemRdRs, kMem, ""},
    {Op::Xst, G::DataMovement, 0x03, true, "xst", S::MemImmRs, kMem, "st"},
    {Op::Push, G::DataMovement, 0x04, false, "push", S::Rs, kMem, ""},
    {Op::Xpush, G::DataMovement, 0x04, true, "xpush", S::Imm, kMem, "push"},
    {Op::Pop, G::DataMovement, 0x05, false, "pop", S::Rd, kMem, ""},
    {Op::Lds, G::DataMovement, 0x06, false, "lds", S::SegRs, kNone, ""},
    {Op::Sts, G::DataMovement, 0x07, false, "sts", S::RdSeg, kNone, ""},
    {Op::Swap, G::DataMovement, 0x08, false, "swap", S::RdRs, kNone, ""},
    {Op::Lea, G::DataMovement, 0x09, false, "lea", S::RdMemRs, kNone, ""},

    {Op::Add, G::Arithmetic, 0x10, false, "add", S::RdRs, kNone, ""},
    {Op::Xadd, G::Arithmetic, 0x10, true, "xadd", S::RdImm, kNone, "add"},
    {Op::Sub, G::Arithmetic, 0x11, false, "sub", S::RdRs, kNone, ""},
    {Op::Xsub, G::Arithmetic, 0x11, true, "xsub", S::RdImm, kNone, "sub"},
    {Op::Mul, G::Arithmetic, 0x12, false, "mul", S::RdRs, kNone, ""},
    {Op::Xmul, G::Arithmetic, 0x12, true, "xmul", S::RdImm, kNone, "mul"},
    {Op::Div, G::Arithmetic, 0x13, false, "div", S::RdRs, kNone, ""},
    {Op::Xdiv, G::Arithmetic, 0x13, true, "xdiv", S::RdImm, kNone, "div"},
    {Op::Mod, G::Arithmetic, 0x14, false, "mod", S::RdRs, kNone, ""},
    {Op::Xmod, G::Arithmetic, 0x14, true, "xmod", S::RdImm, kNone, "mod"},
    {Op::Inc, G::Arithmetic, 0x15, false, "inc", S::Rd, kNone, ""},
    {Op::Dec, G::Arithmetic, 0x16, false, "dec", S::Rd, kNone, ""},

    {Op::Shl, G::ShiftRotate, 0x18, false, "shl", S::RdRs, kNone, ""},
    {Op::Xshl, G::ShiftRotate, 0x18, true, "xshl", S::RdImm, kNone, "shl"},
    {Op::Shr, G::ShiftRotate, 0x19, false, "shr", S::RdRs, kNone, ""},
    {Op::Xshr, G::ShiftRotate, 0x19, true, "xshr", S::RdImm, kNone, "shr"},
    {Op::Sar, G::ShiftRotate, 0x1A, false, "sar", S::RdRs, kNone, ""},
    {Op::Xsar, G::ShiftRotate, 0x1A, true, "xsar", S::RdImm, kNone, "sar"},
    {Op::Rol, G::ShiftRotate, 0x1B, false, "rol", S::RdRs, kNone, ""},
    {Op::Ror, G::ShiftRotate, 0x1C, false, "ror", S::RdRs, kNone, ""},

    {Op::And, G::Logical, 0x20, false, "and", S::RdRs, kNone, ""},
    {Op::Xand, G::Logical, 0x20, true, "xand", S::RdImm, kNone, "and"},
    {Op::Or, G::Logical, 0x21, false, "or", S::RdRs, kNone, ""},
    {Op::Xior, G::Logical, 0x21, true, "xior", S::RdImm, kNone, "or"},
    {Op::Eor, G::Logical, 0x22, false, "eor", S::RdRs, kNone, ""},
    {Op::Xeor, G::Logical, 0x22, true, "xeor", S::RdImm, kNone, "eor"},
    {Op::Not, G::Logical, 0x23, false, "not", S::Rd, kNone, ""},
    {Op::Test, G::Logical, 0x24, false, "test", S::RdRs, kNone, ""},
    {Op::Xtest, G::Logical, 0x24, true, "xtest", S::RdImm, kNone, "test"},
    {Op::Cmp, G::Logical, 0x25, false, "cmp", S::RdRs, kNone, ""},
    {Op::Xcmp, G::Logical, 0x25, true, "xcmp", S::RdImm, kNone, "cmp"},

    {Op::Bt, G::BitsBytes, 0x28, false, "bt", S::RdRs, kNone, ""},
    {Op::Xbt, G::BitsBytes, 0x28, true, "xbt", S::RdImm, kNone, "bt"},
    {Op::Bts, G::BitsBytes, 0x29, false, "bts", S::RdRs, kNone, ""},
    {Op::Btr, G::BitsBytes, 0x2A, false, "btr", S::RdRs, kNone, ""},
    {Op::Btc, G::BitsBytes, 0x2B, false, "btc", S::RdRs, kNone, ""},
    {Op::Bsf, G::BitsBytes, 0x2C, false, "bsf", S::RdRs, kNone, ""},
    {Op::Bsr, G::BitsBytes, 0x2D, false, "bsr", S::RdRs, kNone, ""},
    {Op::Popcnt, G::BitsBytes, 0x2E, false, "popcnt", S::RdRs, kNone, ""},

    {Op::Stc, G::FlagControl, 0x30, false, "stc", S::None, kNone, ""},
    {Op::Clc, G::FlagControl, 0x31, false, "clc", S::None, kNone, ""},
    {Op::Sti, G::FlagControl, 0x32, false, "sti", S::None, kNone, ""},
    {Op::Cli, G::FlagControl, 0x33, false, "cli", S::None, kNone, ""},
    {Op::Pushf, G::FlagControl, 0x34, false, "pushf", S::None, kMem, ""},
    {Op::Popf, G::FlagControl, 0x35, false, "popf", S::None, kMem, ""},

    {Op::Nop, G::ProcessorControl, 0x00, false, "nop", S::None, kNone, ""},
    {Op::Hlt, G::ProcessorControl, 0x38, false, "hlt", S::None, kNone, ""},
    {Op::Stop, G::ProcessorControl, 0x39, false, "stop", S::None, kNone, ""},

    {Op::Jmp, G::FlowControl, 0x40, false, "jmp", S::Rs, kNone, ""},
    {Op::Xjmp, G::FlowControl, 0x40, true, "xjmp", S::Imm, kNone, "jmp"},
    {Op::Jz, G::FlowControl, 0x41, true, "jz", S::Imm, kNone, ""},
    {Op::Jnz, G::FlowControl, 0x42, true, "jnz", S::Imm, kNone, ""},
    {Op::Jc, G::FlowControl, 0x43, true, "jc", S::Imm, kNone, ""},
    {Op::Jnc, G::FlowControl, 0x44, true, "jnc", S::Imm, kNone, ""},
    {Op::Js, G::FlowControl, 0x45, true, "js", S::Imm, kNone, ""},
    {Op::Jns, G::FlowControl, 0x46, true, "jns", S::Imm, kNone, ""},
    {Op::Jo, G::FlowControl, 0x47, true, "jo", S::Imm, kNone, ""},
    {Op::Jno, G::FlowControl, 0x48, true, "jno", S::Imm, kNone, ""},
    {Op::Call, G::FlowControl, 0x49, false, "call", S::Rs, kMem, ""},
    {Op::Xcall, G::FlowControl, 0x49, true, "xcall", S::Imm, kMem, "call"},
    {Op::Ret, G::FlowControl, 0x4A, false, "ret", S::None, kMem, ""},
    {Op::Int, G::FlowControl, 0x4B, false, "int", S::Vec, kMem, ""},
    {Op::Iret, G::FlowControl, 0x4C, false, "iret", S::None, kMem, ""},
    {Op::Loop, G::FlowControl, 0x4D, true, "loop", S::RdImm, kNone, ""},
    {Op::Jmpf, G::FlowControl, 0x4E, true, "jmpf", S::SegImm, kNone, ""},
    {Op::Callf, G::FlowControl, 0x4F, true, "callf", S::SegImm, kMem, ""},

    {Op::Pgon, G::MemoryProtection, 0x50, false, "pgon", S::None, kNone, ""},
    {Op::Pgoff, G::MemoryProtection, 0x51, false, "pgoff", S::None, kNone, ""},
    {Op::Tlbinv, G::MemoryProtection, 0x52, false, "tlbinv", S::None, kNone, ""},
    {Op::Segon, G::MemoryProtection, 0x53, false, "segon", S::None, kNone, ""},
    {Op::Segoff, G::MemoryProtection, 0x54, false, "segoff", S::None, kNone, ""},

    {Op::In, G::IO, 0x58, false, "in", S::RdPort, kIo, ""},
    {Op::Out, G::IO, 0x59, false, "out", S::RsPort, kIo, ""},
    {Op::Xout, G::IO, 0x59, true, "xout", S::ImmPort, kIo, "out"},
}};

constexpr bool roster_in_enum_order() {
  for (std::size_t i = 0; i < kRoster.size(); ++i) {
    if (static_cast<std::size_t>(kRoster[i].op) != i) return false;
  }
  return true;
}
static_assert(roster_in_enum_order());

// (ximm << 7 | code) -> Op, Invalid where unassigned.
constexpr std::array<Op, 256> build_decode_table() {
  std::array<Op, 256> table{};
  for (auto& e : table) e = Op::Invalid;
  for (const auto& e : kRoster) table[(e.ximm ? 0x80u : 0u) | e.code] = e.op;
  return table;
}
constexpr std::array<Op, 256> kDecodeTable = build_decode_table();

constexpr bool keys_unique() {
  for (std::size_t i = 0; i < kRoster.size(); ++i) {
    for (std::size_t j = i + 1; j < kRoster.size(); ++j) {
      if (kRoster[i].code == kRoster[j].code && kRoster[i].ximm == kRoster[j].ximm) return false;
    }
  }
  return true;
}
static_assert(keys_unique(), "two roster entries share an encoding");

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view group_name(Group g) {
  switch (g) {
    case Group::DataMovement: return "DataMovement";
    case Group::Arithmetic: return "Arithmetic";
    case Group::ShiftRotate: return "ShiftRotate";
    case Group::Logical: return "Logical";
    case Group::BitsBytes: return "BitsBytes";
    case Group::FlagControl: return "FlagControl";
    case Group::ProcessorControl: return "ProcessorControl";
    case Group::FlowControl: return "FlowControl";
    case Group::MemoryProtection: return "MemoryProtection";
    case Group::IO: return "IO";
  }
  return "?";
}

std::string_view shape_text(Shape s) {
  switch (s) {
    case Shape::None: return "-";
    case Shape::Rd: return "%rd";
    case Shape::Rs: return "%rs";
    case Shape::RdRs: return "%rd,%rs";
    case Shape::RdImm: return "%rd,imm";
    case Shape::Imm: return "imm";
    case Shape::RdMemRs: return "%rd,[%rs]";
    case Shape::RdMemImm: return "%rd,[imm]";
    case Shape::MemRdRs: return "[%rd],%rs";
    case Shape::MemImmRs: return "[imm],%rs";
    case Shape::SegRs: return "%sk,%rs";
    case Shape::RdSeg: return "%rd,%sk";
    case Shape::SegImm: return "%sk,imm";
    case Shape::RdPort: return "%rd,(port)";
    case Shape::RsPort: return "%rs,(port)";
    case Shape::ImmPort: return "imm,(port)";
    case Shape::Vec: return "vector";
  }
  return "?";
}

std::string_view bus_class_name(BusClass c) {
  switch (c) {
    case BusClass::None: return "none";
    case BusClass::MemoryReference: return "mem";
    case BusClass::IOInstruction: return "io";
  }
  return "?";
}

std::span<const OpcodeInfo, kOpCount> roster() { return kRoster; }

const OpcodeInfo& info(Op op) { return kRoster[static_cast<std::size_t>(op)]; }

std::optional<Op> find_mnemonic(std::string_view mnemonic) {
  for (const auto& e : kRoster) {
    if (iequals(e.mnemonic, mnemonic)) return e.op;
  }
  return std::nullopt;
}

std::optional<Op> lookup(bool ximm, std::uint8_t code) {
  if (code > 0x7F) return std::nullopt;
  Op op = kDecodeTable[(ximm ? 0x80u : 0u) | code];
  if (op == Op::Invalid) return std::nullopt;
  return op;
}

std::size_t group_count(Group g) {
  return static_cast<std::size_t>(
      std::count_if(kRoster.begin(), kRoster.end(), [g](const OpcodeInfo& e) { return e.group == g; }));
}

std::string roster_text() {
  std::string out = "# code ximm mnemonic group shape bus\n";
  for (const auto& e : kRoster) {
    out += fmt::format("0x{:02X} {} {} {} {} {}\n", e.code, e.ximm ? 1 : 0, e.mnemonic, group_name(e.group),
                       shape_text(e.shape), bus_class_name(e.bus));
  }
  return out;
}

Instruction make(Op op, unsigned rd, unsigned rs, std::int32_t imm16, Word imm32) {
  const auto& e = info(op);
  Instruction inst;
  inst.op = op;
  inst.code = e.code;
  inst.ximm = e.ximm;
  inst.rd = static_cast<std::uint8_t>(rd);
  inst.rs = static_cast<std::uint8_t>(rs);
  inst.imm16 = imm16;
  inst.imm32 = e.ximm ? imm32 : 0;
  return inst;
}

std::size_t encode_into(const Instruction& inst, std::span<Word, 2> out) {
  if (inst.rd > 15) throw EncodeError(fmt::format("rd field out of range: {}", inst.rd));
  if (inst.rs > 15) throw EncodeError(fmt::format("rs field out of range: {}", inst.rs));
  if (inst.imm16 < -32768 || inst.imm16 > 32767) {
    throw EncodeError(fmt::format("imm16 field out of range: {}", inst.imm16));
  }
  if (inst.code > 0x7F) throw EncodeError(fmt::format("opcode field out of range: {}", inst.code));
  if (inst.op != Op::Invalid) {
    const auto& e = info(inst.op);
    if (e.code != inst.code || e.ximm != inst.ximm) {
      throw EncodeError(fmt::format("opcode field does not match mnemonic {}", e.mnemonic));
    }
  }
  UWord w = (inst.ximm ? 0x80000000u : 0u) | (UWord{inst.code} << 24) | (UWord{inst.rd} << 20) |
            (UWord{inst.rs} << 16) | (static_cast<UWord>(inst.imm16) & 0xFFFFu);
  out[0] = static_cast<Word>(w);
  if (inst.ximm) {
    out[1] = inst.imm32;
    return 2;
  }
  return 1;
}

std::vector<Word> encode(const Instruction& inst) {
  std::array<Word, 2> buf{};
  std::size_t n = encode_into(inst, buf);
  return {buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n)};
}

Instruction decode_first(Word word0) {
  const auto w = static_cast<UWord>(word0);
  Instruction inst;
  inst.ximm = (w >> 31) != 0;
  inst.code = static_cast<std::uint8_t>((w >> 24) & 0x7F);
  inst.rd = static_cast<std::uint8_t>((w >> 20) & 0xF);
  inst.rs = static_cast<std::uint8_t>((w >> 16) & 0xF);
  inst.imm16 = static_cast<std::int16_t>(w & 0xFFFF);
  inst.op = kDecodeTable[(inst.ximm ? 0x80u : 0u) | inst.code];
  return inst;
}

Decoded decode(std::span<const Word> words, std::size_t at) {
  if (at >= words.size()) throw DecodeError(fmt::format("no instruction word at index {}", at));
  Instruction inst = decode_first(words[at]);
  if (inst.ximm) {
    if (at + 1 >= words.size()) {
      throw DecodeError(fmt::format("truncated two-word instruction at index {}", at));
    }
    inst.imm32 = words[at + 1];
  }
  return {inst, inst.length()};
}

BusClass bus_class(const Instruction& inst) {
  if (inst.op == Op::Invalid) return BusClass::None;
  return info(inst.op).bus;
}

}  // namespace clown::isa
