#include "clown/disasm.hpp"

#include <fmt/format.h>

namespace clown {
namespace {

using isa::Op;
using isa::Shape;

std::string reg(unsigned r) { return fmt::format("%r{}", r); }
std::string seg(unsigned s) { return fmt::format("%s{}", s & 7u); }

std::string hex(Word w) { return fmt::format("0x{:X}", static_cast<UWord>(w)); }

// Addresses and flow targets read better in hex, data in decimal.
bool immediate_is_address(Op op) {
  switch (op) {
    case Op::Xld: case Op::Xst: case Op::Xjmp: case Op::Xcall: case Op::Jz: case Op::Jnz:
    case Op::Jc: case Op::Jnc: case Op::Js: case Op::Jns: case Op::Jo: case Op::Jno:
    case Op::Loop: case Op::Jmpf: case Op::Callf:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string format_instruction(const isa::Instruction& inst) {
  if (inst.op == Op::Invalid) return "(invalid)";
  const auto& e = isa::info(inst.op);
  std::string_view name = e.base_mnemonic.empty() ? e.mnemonic : e.base_mnemonic;
  std::string imm = immediate_is_address(inst.op) ? hex(inst.imm32) : fmt::format("{}", inst.imm32);
  std::string port = fmt::format("(0x{:X})", inst.imm16 & 0xFFFF);

  switch (e.shape) {
    case Shape::None: return std::string(name);
    case Shape::Rd: return fmt::format("{} {}", name, reg(inst.rd));
    case Shape::Rs: return fmt::format("{} {}", name, reg(inst.rs));
    case Shape::RdRs: return fmt::format("{} {}, {}", name, reg(inst.rd), reg(inst.rs));
    case Shape::RdImm: return fmt::format("{} {}, {}", name, reg(inst.rd), imm);
    case Shape::Imm: return fmt::format("{} {}", name, imm);
    case Shape::RdMemRs: return fmt::format("{} {}, [{}]", name, reg(inst.rd), reg(inst.rs));
    case Shape::RdMemImm: return fmt::format("{} {}, [{}]", name, reg(inst.rd), imm);
    case Shape::MemRdRs: return fmt::format("{} [{}], {}", name, reg(inst.rd), reg(inst.rs));
    case Shape::MemImmRs: return fmt::format("{} [{}], {}", name, imm, reg(inst.rs));
    case Shape::SegRs: return fmt::format("{} {}, {}", name, seg(inst.rd), reg(inst.rs));
    case Shape::RdSeg: return fmt::format("{} {}, {}", name, reg(inst.rd), seg(inst.rs));
    case Shape::SegImm: return fmt::format("{} {}, {}", name, seg(inst.rd), imm);
    case Shape::RdPort: return fmt::format("{} {}, {}", name, reg(inst.rd), port);
    case Shape::RsPort: return fmt::format("{} {}, {}", name, reg(inst.rs), port);
    case Shape::ImmPort: return fmt::format("{} {}, {}", name, imm, port);
    case Shape::Vec: return fmt::format("{} {}", name, inst.imm16);
  }
  return std::string(name);
}

namespace {

// Fields the mnemonic does not use must be zero, otherwise re-assembly could
// not reproduce the word and it is shown as data instead.
bool canonical(const isa::Instruction& inst) {
  const auto shape = isa::info(inst.op).shape;
  bool uses_rd = false, uses_rs = false, uses_imm16 = false;
  switch (shape) {
    case Shape::None: case Shape::Imm: break;
    case Shape::Rd: case Shape::RdImm: case Shape::RdMemImm: case Shape::SegImm: uses_rd = true; break;
    case Shape::Rs: case Shape::MemImmRs: uses_rs = true; break;
    case Shape::RdRs: case Shape::RdMemRs: case Shape::MemRdRs: uses_rd = uses_rs = true; break;
    case Shape::SegRs: case Shape::RdSeg: uses_rd = uses_rs = true; break;
    case Shape::RdPort: uses_rd = uses_imm16 = true; break;
    case Shape::RsPort: uses_rs = uses_imm16 = true; break;
    case Shape::ImmPort: case Shape::Vec: uses_imm16 = true; break;
  }
  if (shape == Shape::SegRs && inst.rd > 7) return false;
  if (shape == Shape::RdSeg && inst.rs > 7) return false;
  if (shape == Shape::SegImm && inst.rd > 7) return false;
  if ((shape == Shape::RdPort || shape == Shape::RsPort || shape == Shape::ImmPort) &&
      (inst.imm16 < 0 || inst.imm16 > 255)) {
    return false;
  }
  return (uses_rd || inst.rd == 0) && (uses_rs || inst.rs == 0) && (uses_imm16 || inst.imm16 == 0);
}

}  // namespace

std::string disassemble(std::span<const Word> words, Address origin) {
  std::string out;
  std::size_t i = 0;
  while (i < words.size()) {
    const Address addr = origin + static_cast<Address>(i);
    isa::Instruction inst = isa::decode_first(words[i]);
    const bool complete = !inst.ximm || i + 1 < words.size();
    if (inst.op == Op::Invalid || !complete || !canonical(inst)) {
      const auto raw = static_cast<UWord>(words[i]);
      out += fmt::format("    {:<32}; {:08X}: {:08X}\n", fmt::format(".word 0x{:08X}", raw), addr, raw);
      ++i;
      continue;
    }
    if (inst.ximm) inst.imm32 = words[i + 1];
    std::string text = format_instruction(inst);
    if (inst.ximm) {
      out += fmt::format("    {:<32}; {:08X}: {:08X} {:08X}\n", text, addr, static_cast<UWord>(words[i]),
                         static_cast<UWord>(words[i + 1]));
    } else {
      out += fmt::format("    {:<32}; {:08X}: {:08X}\n", text, addr, static_cast<UWord>(words[i]));
    }
    i += inst.length();
  }
  return out;
}

}  // namespace clown
