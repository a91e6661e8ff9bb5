#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "clown/types.hpp"

// Microcontroller VM inside the DMA controller.
//
// Word layout: opcode 31..28 | a 27..25 | b 24..22 | field 21..0
// Double-word instructions (MOVI, ADDI, CMPI, OUTI) carry their immediate in
// the following word. `a` names the register operand of single-register
// forms; `field` holds ports and jump targets.
namespace clown::ucvm {

enum class Opcode : std::uint8_t {
  Nop = 0x0,
  Jeq = 0x1,   // jump to field if flag
  Jmp = 0x2,   // jump to field
  End = 0x3,   // stop the VM
  Movi = 0x4,  // r[a] := imm
  Addi = 0x5,  // r[a] += imm
  Cmpi = 0x6,  // flag := r[a] == imm
  Out = 0x8,   // port(field) := r[a]
  In = 0x9,    // r[a] := port(field)
  St = 0xA,    // mem[r[a]] := r[b]
  Ld = 0xB,    // r[b] := mem[r[a]]
  Outi = 0xC,  // port(field) := imm
};

inline constexpr std::size_t kRegisters = 8;
inline constexpr std::size_t kProgramWords = 64;
inline constexpr UWord kFieldMask = (1u << 22) - 1;

constexpr bool reserved(unsigned op) { return op == 0x7 || op >= 0xD; }
constexpr bool double_word(unsigned op) { return (op >= 0x4 && op <= 0x6) || op == 0xC; }
/// Bus instructions need a bus grant to execute.
constexpr bool bus_op(unsigned op) { return op >= 0x8 && op <= 0xC; }

constexpr Word word(Opcode op, unsigned a = 0, unsigned b = 0, UWord field = 0) {
  return static_cast<Word>((static_cast<UWord>(op) << 28) | ((a & 7u) << 25) | ((b & 7u) << 22) | (field & kFieldMask));
}

struct Instruction {
  unsigned opcode = 0;
  unsigned a = 0;
  unsigned b = 0;
  UWord field = 0;
  Word imm = 0;
  std::size_t length = 1;
};

/// Decodes at `at`; a double-word instruction at the end of the store reads
/// its immediate as 0 (the store is zero-filled to 64 words).
Instruction decode(std::span<const Word> program, std::size_t at);

std::string format(const Instruction& in);

/// What the VM talks to: a port space and physical memory.
class Host {
 public:
  virtual ~Host() = default;
  virtual Word port_in(unsigned port) = 0;
  virtual void port_out(unsigned port, Word value) = 0;
  virtual Word mem_read(Address a) = 0;
  virtual void mem_write(Address a, Word value) = 0;
};

enum class StepResult : std::uint8_t { Idle, Executed, Stalled, Fault };

struct State {
  std::array<Word, kRegisters> r{};
  bool flag = false;
  std::size_t pc = 0;
  bool running = false;
  bool faulted = false;
};

class Vm {
 public:
  /// Throws Error if the program exceeds the 64-word store.
  void load(std::span<const Word> program);
  std::span<const Word> program() const { return store_; }
  std::size_t program_size() const { return size_; }

  void start();
  /// One instruction, or a stall when a bus instruction has no grant.
  StepResult step(Host& host, bool bus_grant);

  const State& state() const { return st_; }
  State& state() { return st_; }
  std::uint64_t executed() const { return executed_; }
  std::uint64_t stalls() const { return stalls_; }
  std::uint64_t bus_ops() const { return bus_ops_; }

 private:
  std::array<Word, kProgramWords> store_{};
  std::size_t size_ = 0;
  State st_;
  std::uint64_t executed_ = 0;
  std::uint64_t stalls_ = 0;
  std::uint64_t bus_ops_ = 0;
};

}  // namespace clown::ucvm
