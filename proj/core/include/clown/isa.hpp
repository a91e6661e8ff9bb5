#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clown/types.hpp"

// Instruction word layout:
//
//   31     30..24   23..20   19..16   15..0
//   ximm | opcode | rd     | rs     | imm16
//
// When ximm is set the instruction is two words long and the second word is
// the 32-bit immediate operand. Immediate forms ("x" mnemonics) share the
// 7-bit code of their register form; the MSB tells them apart.
namespace clown::isa {

enum class Group : std::uint8_t {
  DataMovement,
  Arithmetic,
  ShiftRotate,
  Logical,
  BitsBytes,
  FlagControl,
  ProcessorControl,
  FlowControl,
  MemoryProtection,
  IO,
};

inline constexpr std::size_t kGroupCount = 10;

std::string_view group_name(Group g);

// The 87 machine instructions, in roster order.
enum class Op : std::uint8_t {
  // Data movement
  Mov, Xmov, Ld, Xld, St, Xst, Push, Xpush, Pop, Lds, Sts, Swap, Lea,
  // Arithmetic
  Add, Xadd, Sub, Xsub, Mul, Xmul, Div, Xdiv, Mod, Xmod, Inc, Dec,
  // Shift / rotate
  Shl, Xshl, Shr, Xshr, Sar, Xsar, Rol, Ror,
  // Logical
  And, Xand, Or, Xior, Eor, Xeor, Not, Test, Xtest, Cmp, Xcmp,
  // Bits and bytes
  Bt, Xbt, Bts, Btr, Btc, Bsf, Bsr, Popcnt,
  // Flag control
  Stc, Clc, Sti, Cli, Pushf, Popf,
  // Processor control
  Nop, Hlt, Stop,
  // Flow control
  Jmp, Xjmp, Jz, Jnz, Jc, Jnc, Js, Jns, Jo, Jno, Call, Xcall, Ret, Int, Iret, Loop, Jmpf, Callf,
  // Memory protection
  Pgon, Pgoff, Tlbinv, Segon, Segoff,
  // I/O
  In, Out, Xout,

  Invalid,
};

inline constexpr std::size_t kOpCount = static_cast<std::size_t>(Op::Invalid);

/// Operand shape of a roster entry. `R` is a general register, `S` a segment
/// register, `I` a 32-bit immediate (second word), `[..]` a memory operand,
/// `(P)` a port number held in imm16, `V` a vector number held in imm16.
enum class Shape : std::uint8_t {
  None,      //
  Rd,        // %rd
  Rs,        // %rs
  RdRs,      // %rd, %rs
  RdImm,     // %rd, I
  Imm,       // I
  RdMemRs,   // %rd, [%rs]
  RdMemImm,  // %rd, [I]
  MemRdRs,   // [%rd], %rs
  MemImmRs,  // [I], %rs
  SegRs,     // %sK, %rs        (K in rd field)
  RdSeg,     // %rd, %sK        (K in rs field)
  SegImm,    // %sK, I          (K in rd field)
  RdPort,    // %rd, (P)
  RsPort,    // %rs, (P)
  ImmPort,   // I, (P)
  Vec,       // V
};

std::string_view shape_text(Shape s);

enum class BusClass : std::uint8_t { None, MemoryReference, IOInstruction };

std::string_view bus_class_name(BusClass c);

struct OpcodeInfo {
  Op op;
  Group group;
  std::uint8_t code;  // 7-bit opcode field
  bool ximm;          // encoded with a second immediate word
  std::string_view mnemonic;
  Shape shape;
  BusClass bus;
  /// Register form this entry promotes from ("mov" for xmov), empty if none.
  std::string_view base_mnemonic;
};

/// The full instruction roster, indexed by Op.
std::span<const OpcodeInfo, kOpCount> roster();

const OpcodeInfo& info(Op op);

/// Looks up a roster entry by its exact mnemonic (case-insensitive).
std::optional<Op> find_mnemonic(std::string_view mnemonic);

/// Entry for a (ximm, code) key, or nullopt if unassigned.
std::optional<Op> lookup(bool ximm, std::uint8_t code);

/// Number of roster entries in a group.
std::size_t group_count(Group g);

/// Machine-readable roster: one line per opcode,
/// "code ximm mnemonic group shape bus".
std::string roster_text();

struct Instruction {
  Op op = Op::Nop;
  std::uint8_t code = 0;  // raw 7-bit field (meaningful for Invalid)
  bool ximm = false;
  std::uint8_t rd = 0;
  std::uint8_t rs = 0;
  std::int32_t imm16 = 0;  // sign-extended 16-bit field
  Word imm32 = 0;          // present iff ximm

  std::size_t length() const { return ximm ? 2 : 1; }

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Builds an instruction for a roster entry, filling code and ximm from it.
Instruction make(Op op, unsigned rd = 0, unsigned rs = 0, std::int32_t imm16 = 0, Word imm32 = 0);

/// Encodes into one or two words. Throws EncodeError naming the bad field.
std::vector<Word> encode(const Instruction& inst);

/// Encodes into `out` (which must hold two words); returns the length.
std::size_t encode_into(const Instruction& inst, std::span<Word, 2> out);

struct Decoded {
  Instruction inst;
  std::size_t length;
};

/// Decodes the instruction starting at words[at]. Unassigned codes yield an
/// Op::Invalid marker. Throws DecodeError if a two-word instruction is cut off.
Decoded decode(std::span<const Word> words, std::size_t at = 0);

/// Decodes a first word alone; imm32 is left zero.
Instruction decode_first(Word word0);

BusClass bus_class(const Instruction& inst);

/// True when the first word announces a second (immediate) word.
constexpr bool has_immediate_word(Word word0) { return (static_cast<UWord>(word0) >> 31) != 0; }

}  // namespace clown::isa
