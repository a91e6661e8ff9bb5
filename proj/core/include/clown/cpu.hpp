#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "clown/isa.hpp"
#include "clown/memory.hpp"
#include "clown/mmu.hpp"
#include "clown/types.hpp"

namespace clown {

namespace flag {
inline constexpr UWord C = 1u << 0;
inline constexpr UWord Z = 1u << 1;
inline constexpr UWord S = 1u << 2;
inline constexpr UWord O = 1u << 3;
inline constexpr UWord I = 1u << 4;
inline constexpr UWord IoplShift = 5;
inline constexpr UWord Iopl = 3u << IoplShift;
inline constexpr UWord Arith = C | Z | S | O;
inline constexpr UWord Visible = 0x7F;
// Frame-only bits of the flags word pushed on interrupt/far-call frames.
inline constexpr UWord FrameCpl = 1u << 7;
inline constexpr UWord FrameInterrupt = 1u << 8;
}  // namespace flag

// Segment register roles.
inline constexpr unsigned kCodeSegment = 0;
inline constexpr unsigned kDataSegment = 1;
inline constexpr unsigned kStackSegment = 2;

struct CpuState {
  std::array<Word, kGprCount> r{};
  std::array<Word, kSegmentCount> s{};
  UWord flags = 0;
  Word pc = 0;
  Word ir = 0;
  unsigned cpl = 0;
  bool halted = false;
  bool stopped = false;

  unsigned iopl() const { return (flags & flag::Iopl) >> flag::IoplShift; }
  bool interrupts_enabled() const { return (flags & flag::I) != 0; }
};

/// Pending IRQ latch plus the stack of vectors being serviced.
struct InterruptController {
  UWord pending = 0;  // bit v set = vector v latched (IRQ vectors only)
  std::vector<std::uint8_t> in_service;
  Address iv_base = 0;

  /// Vector number a new dispatch must beat (32 when idle).
  unsigned top() const { return in_service.empty() ? kVectorCount : in_service.back(); }
};

/// Decoded IV entry.
struct IvEntry {
  UWord raw = 0;
  bool direct() const { return (raw & 1u) != 0; }
  Address entry_point() const { return raw & ~7u; }
  unsigned prot() const { return (raw >> 1) & 3u; }

  static constexpr UWord make_direct(Address isr, unsigned prot) { return (isr & ~7u) | ((prot & 3u) << 1) | 1u; }
};

/// The CPU's view of the I/O bus.
class IoHandler {
 public:
  virtual ~IoHandler() = default;
  virtual Word io_read(unsigned port) = 0;
  virtual void io_write(unsigned port, Word value) = 0;
};

struct CycleReport {
  Word pc = 0;
  isa::Instruction inst{};
  isa::BusClass bus = isa::BusClass::None;
  bool idle = false;      // halted; no instruction executed
  int exception = -1;     // exception raised by this instruction
  int dispatched = -1;    // vector dispatched at the end of the cycle
};

struct CpuStats {
  std::uint64_t instructions = 0;  // including ones that faulted
  std::uint64_t idle_cycles = 0;
  std::uint64_t exceptions = 0;
  std::uint64_t dispatches = 0;
};

class Cpu {
 public:
  Cpu(MemorySystem& mem, Mmu& mmu, IoHandler* io = nullptr);

  void set_io(IoHandler* io) { io_ = io; }

  void reset();

  /// Executes one instruction (or one idle cycle while halted).
  const CycleReport& step();

  /// Interrupt dispatch decision at the end of the cycle.
  void end_of_cycle();

  void raise_irq(unsigned channel);

  CpuState& state() { return st_; }
  const CpuState& state() const { return st_; }
  InterruptController& interrupts() { return ic_; }
  const InterruptController& interrupts() const { return ic_; }
  const CycleReport& last() const { return report_; }
  const CpuStats& stats() const { return stats_; }

 private:
  struct Fault {
    unsigned vector;
    Address linear;
  };

  Address translate(Word offset, unsigned seg, AccessKind access);
  Word load(Word offset, unsigned seg);
  void store(Word offset, unsigned seg, Word v);
  Word fetch(Word offset) {
    if (mmu_->identity()) return mem_->cpu_read(static_cast<UWord>(offset)).value;
    return mem_->cpu_read(translate(offset, kCodeSegment, AccessKind::Fetch)).value;
  }

  void execute(const isa::Instruction& in, Word next_pc);
  void require_kernel() const;
  void require_io() const;
  void dispatch(unsigned vector, Word return_pc);
  [[noreturn]] void double_fault(unsigned vector, const char* why) const;

  MemorySystem* mem_;
  Mmu* mmu_;
  IoHandler* io_;
  CpuState st_;
  InterruptController ic_;
  CycleReport report_;
  CpuStats stats_;

  // Synchronous vector raised during this cycle (exception or int), with
  // the pc to push on the frame.
  int sync_vector_ = -1;
  Word sync_return_pc_ = 0;
};

}  // namespace clown
