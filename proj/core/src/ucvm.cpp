#include "clown/ucvm.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "clown/error.hpp"

namespace clown::ucvm {

Instruction decode(std::span<const Word> program, std::size_t at) {
  const auto w = static_cast<UWord>(at < program.size() ? program[at] : 0);
  Instruction in;
  in.opcode = w >> 28;
  in.a = (w >> 25) & 7u;
  in.b = (w >> 22) & 7u;
  in.field = w & kFieldMask;
  if (double_word(in.opcode)) {
    in.length = 2;
    in.imm = at + 1 < program.size() ? program[at + 1] : 0;
  }
  return in;
}

std::string format(const Instruction& in) {
  switch (static_cast<Opcode>(in.opcode)) {
    case Opcode::Nop: return "NOP";
    case Opcode::Jeq: return fmt::format("JEQ {}", in.field);
    case Opcode::Jmp: return fmt::format("JMP {}", in.field);
    case Opcode::End: return "END";
    case Opcode::Movi: return fmt::format("xMOVI r{}, {}", in.a, in.imm);
    case Opcode::Addi: return fmt::format("xADDI r{}, {}", in.a, in.imm);
    case Opcode::Cmpi: return fmt::format("xCMPI r{}, {}", in.a, in.imm);
    case Opcode::Out: return fmt::format("OUT 0x{:02X}, r{}", in.field, in.a);
    case Opcode::In: return fmt::format("IN 0x{:02X}, r{}", in.field, in.a);
    case Opcode::St: return fmt::format("ST [r{}], r{}", in.a, in.b);
    case Opcode::Ld: return fmt::format("LD [r{}], r{}", in.a, in.b);
    case Opcode::Outi: return fmt::format("xOUTI 0x{:02X}, {}", in.field, in.imm);
  }
  return fmt::format("(reserved {:X}h)", in.opcode);
}

void Vm::load(std::span<const Word> program) {
  if (program.size() > kProgramWords)
    throw Error(fmt::format("uCVM program of {} words exceeds the {}-word store", program.size(), kProgramWords));
  store_.fill(0);
  std::copy(program.begin(), program.end(), store_.begin());
  size_ = program.size();
  st_ = State{};
}

void Vm::start() {
  st_.pc = 0;
  st_.flag = false;
  st_.running = true;
  st_.faulted = false;
}

StepResult Vm::step(Host& host, bool bus_grant) {
  if (!st_.running) return StepResult::Idle;
  const Instruction in = decode(store_, st_.pc);
  if (reserved(in.opcode) || st_.pc >= kProgramWords) {
    st_.running = false;
    st_.faulted = true;
    return StepResult::Fault;
  }
  if (bus_op(in.opcode)) {
    if (!bus_grant) {
      ++stalls_;
      return StepResult::Stalled;
    }
    ++bus_ops_;
  }
  ++executed_;
  std::size_t next = st_.pc + in.length;
  auto& r = st_.r;
  switch (static_cast<Opcode>(in.opcode)) {
    case Opcode::Nop: break;
    case Opcode::Jeq: if (st_.flag) next = in.field; break;
    case Opcode::Jmp: next = in.field; break;
    case Opcode::End: st_.running = false; break;
    case Opcode::Movi: r[in.a] = in.imm; break;
    case Opcode::Addi: r[in.a] = static_cast<Word>(static_cast<UWord>(r[in.a]) + static_cast<UWord>(in.imm)); break;
    case Opcode::Cmpi: st_.flag = r[in.a] == in.imm; break;
    case Opcode::Out: host.port_out(in.field, r[in.a]); break;
    case Opcode::In: r[in.a] = host.port_in(in.field); break;
    case Opcode::St: host.mem_write(static_cast<UWord>(r[in.a]), r[in.b]); break;
    case Opcode::Ld: r[in.b] = host.mem_read(static_cast<UWord>(r[in.a])); break;
    case Opcode::Outi: host.port_out(in.field, in.imm); break;
  }
  st_.pc = next;
  return StepResult::Executed;
}

}  // namespace clown::ucvm
