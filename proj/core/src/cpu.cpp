#include "clown/cpu.hpp"

#include <bit>
#include <limits>

#include <fmt/format.h>

#include "clown/error.hpp"

namespace clown {

using isa::Op;

namespace {

constexpr UWord zs(Word r) { return (r == 0 ? flag::Z : 0u) | (r < 0 ? flag::S : 0u); }

struct Result {
  Word value;
  UWord flags;  // replacement for the C/Z/S/O bits
};

Result add(Word a, Word b) {
  const std::uint64_t wide = std::uint64_t{static_cast<UWord>(a)} + static_cast<UWord>(b);
  const Word r = static_cast<Word>(static_cast<UWord>(wide));
  UWord f = zs(r);
  if (wide >> 32) f |= flag::C;
  if (((a ^ r) & (b ^ r)) < 0) f |= flag::O;
  return {r, f};
}

Result sub(Word a, Word b) {
  const Word r = static_cast<Word>(static_cast<UWord>(a) - static_cast<UWord>(b));
  UWord f = zs(r);
  if (static_cast<UWord>(a) < static_cast<UWord>(b)) f |= flag::C;
  if (((a ^ b) & (a ^ r)) < 0) f |= flag::O;
  return {r, f};
}

Result mul(Word a, Word b) {
  const std::int64_t wide = std::int64_t{a} * b;
  const Word r = static_cast<Word>(static_cast<UWord>(static_cast<std::uint64_t>(wide)));
  UWord f = zs(r);
  if (wide != r) f |= flag::C | flag::O;
  return {r, f};
}

}  // namespace

Cpu::Cpu(MemorySystem& mem, Mmu& mmu, IoHandler* io) : mem_(&mem), mmu_(&mmu), io_(io) { reset(); }

void Cpu::reset() {
  st_ = CpuState{};
  st_.s[kCodeSegment] = static_cast<Word>(kFlatSegment.raw);
  ic_ = InterruptController{};
  mmu_->set_paging(false);
  mmu_->set_segmentation(false);
  mmu_->tlb_invalidate();
  sync_vector_ = -1;
  report_ = CycleReport{};
}

void Cpu::raise_irq(unsigned channel) {
  if (channel >= kIrqChannels) throw SimFault(fmt::format("IRQ channel {} out of range", channel));
  ic_.pending |= 1u << irq_vector(channel);
}

Address Cpu::translate(Word offset, unsigned seg, AccessKind access) {
  const Translation t = mmu_->translate(offset, seg, access, st_.cpl, st_.s, st_.r[kPageTableBase]);
  if (t.ok()) [[likely]]
    return t.physical;
  if (t.fault == FaultKind::SegmentViolation) throw Fault{static_cast<unsigned>(Vector::SegmentViolation), t.linear};
  throw Fault{static_cast<unsigned>(Vector::PageFault), t.linear};
}

Word Cpu::load(Word offset, unsigned seg) {
  const Address a = mmu_->identity() ? static_cast<UWord>(offset) : translate(offset, seg, AccessKind::Read);
  return mem_->cpu_read(a).value;
}

void Cpu::store(Word offset, unsigned seg, Word v) {
  const Address a = mmu_->identity() ? static_cast<UWord>(offset) : translate(offset, seg, AccessKind::Write);
  mem_->cpu_write(a, v);
}

void Cpu::require_kernel() const {
  if (st_.cpl != 0) throw Fault{static_cast<unsigned>(Vector::PrivilegeViolation), 0};
}

void Cpu::require_io() const {
  if (st_.cpl > st_.iopl()) throw Fault{static_cast<unsigned>(Vector::PrivilegeViolation), 0};
}

const CycleReport& Cpu::step() {
  report_.pc = st_.pc;
  report_.exception = -1;
  report_.dispatched = -1;
  if (st_.halted) {
    report_.idle = true;
    report_.inst = isa::Instruction{};
    report_.bus = isa::BusClass::None;
    ++stats_.idle_cycles;
    return report_;
  }
  report_.idle = false;
  ++stats_.instructions;

  const Word pc = st_.pc;
  try {
    const Word w0 = fetch(pc);
    st_.ir = w0;
    isa::Instruction in = isa::decode_first(w0);
    Word next = pc + 1;
    if (in.ximm) {
      in.imm32 = fetch(pc + 1);
      next = pc + 2;
    }
    report_.inst = in;
    report_.bus = isa::bus_class(in);
    if (in.op == Op::Invalid) throw Fault{static_cast<unsigned>(Vector::InvalidOpcode), 0};
    execute(in, next);
  } catch (const Fault& f) {
    report_.exception = static_cast<int>(f.vector);
    ++stats_.exceptions;
    if (f.vector == static_cast<unsigned>(Vector::PageFault)) st_.r[kFaultAddress] = static_cast<Word>(f.linear);
    // The saved pc points at the faulting instruction so it restarts.
    sync_vector_ = static_cast<int>(f.vector);
    sync_return_pc_ = pc;
  }
  return report_;
}

void Cpu::execute(const isa::Instruction& in, Word next) {
  auto& r = st_.r;
  Word& d = r[in.rd];
  const Word src = in.ximm ? in.imm32 : r[in.rs];
  Word pc = next;
  auto set_flags = [this](UWord f) { st_.flags = (st_.flags & ~flag::Arith) | f; };
  auto jump_if = [&](bool cond) {
    if (cond) pc = in.imm32;
  };

  switch (in.op) {
    // Data movement
    case Op::Mov: case Op::Xmov: d = src; break;
    case Op::Ld: d = load(r[in.rs], kDataSegment); break;
    case Op::Xld: d = load(in.imm32, kDataSegment); break;
    case Op::St: store(r[in.rd], kDataSegment, r[in.rs]); break;
    case Op::Xst: store(in.imm32, kDataSegment, r[in.rs]); break;
    case Op::Push: case Op::Xpush: {
      const Word sp = r[kStackPointer] - 1;
      store(sp, kStackSegment, src);
      r[kStackPointer] = sp;
      break;
    }
    case Op::Pop: {
      const Word v = load(r[kStackPointer], kStackSegment);
      r[kStackPointer] += 1;
      d = v;
      break;
    }
    case Op::Lds: require_kernel(); st_.s[in.rd & 7u] = r[in.rs]; break;
    case Op::Sts: require_kernel(); d = st_.s[in.rs & 7u]; break;
    case Op::Swap: std::swap(d, r[in.rs]); break;
    case Op::Lea: {
      UWord linear = static_cast<UWord>(r[in.rs]);
      if (mmu_->segmentation()) {
        const SegmentDescriptor desc{static_cast<UWord>(st_.s[kDataSegment])};
        if (linear >= desc.limit_words()) throw Fault{static_cast<unsigned>(Vector::SegmentViolation), linear};
        linear += desc.base();
      }
      d = static_cast<Word>(linear);
      break;
    }

    // Arithmetic
    case Op::Add: case Op::Xadd: { auto x = add(d, src); d = x.value; set_flags(x.flags); break; }
    case Op::Sub: case Op::Xsub: { auto x = sub(d, src); d = x.value; set_flags(x.flags); break; }
    case Op::Mul: case Op::Xmul: { auto x = mul(d, src); d = x.value; set_flags(x.flags); break; }
    case Op::Div: case Op::Xdiv: case Op::Mod: case Op::Xmod: {
      if (src == 0) throw Fault{static_cast<unsigned>(Vector::DivideByZero), 0};
      const bool is_div = in.op == Op::Div || in.op == Op::Xdiv;
      if (d == std::numeric_limits<Word>::min() && src == -1) {
        d = is_div ? d : 0;
        set_flags(zs(d) | flag::O);
      } else {
        d = is_div ? d / src : d % src;
        set_flags(zs(d));
      }
      break;
    }
    case Op::Inc: { auto x = add(d, 1); d = x.value; set_flags(x.flags); break; }
    case Op::Dec: { auto x = sub(d, 1); d = x.value; set_flags(x.flags); break; }

    // Shift / rotate. A zero count leaves C alone.
    case Op::Shl: case Op::Xshl: case Op::Shr: case Op::Xshr: case Op::Sar: case Op::Xsar:
    case Op::Rol: case Op::Ror: {
      const unsigned n = static_cast<UWord>(src) & 31u;
      const UWord u = static_cast<UWord>(d);
      UWord res = u;
      UWord carry = st_.flags & flag::C;
      if (n != 0) {
        switch (in.op) {
          case Op::Shl: case Op::Xshl: res = u << n; carry = (u >> (32 - n)) & 1u; break;
          case Op::Shr: case Op::Xshr: res = u >> n; carry = (u >> (n - 1)) & 1u; break;
          case Op::Sar: case Op::Xsar:
            res = static_cast<UWord>(d >> n);
            carry = (u >> (n - 1)) & 1u;
            break;
          case Op::Rol: res = std::rotl(u, static_cast<int>(n)); carry = res & 1u; break;
          default: res = std::rotr(u, static_cast<int>(n)); carry = res >> 31; break;
        }
      }
      d = static_cast<Word>(res);
      set_flags(zs(d) | (carry ? flag::C : 0u));
      break;
    }

    // Logical
    case Op::And: case Op::Xand: d &= src; set_flags(zs(d)); break;
    case Op::Or: case Op::Xior: d |= src; set_flags(zs(d)); break;
    case Op::Eor: case Op::Xeor: d ^= src; set_flags(zs(d)); break;
    case Op::Not: d = ~d; set_flags(zs(d)); break;
    case Op::Test: case Op::Xtest: set_flags(zs(d & src)); break;
    case Op::Cmp: case Op::Xcmp: set_flags(sub(d, src).flags); break;

    // Bits
    case Op::Bt: case Op::Xbt: case Op::Bts: case Op::Btr: case Op::Btc: {
      const UWord mask = 1u << (static_cast<UWord>(src) & 31u);
      const bool was = (static_cast<UWord>(d) & mask) != 0;
      if (in.op == Op::Bts) d = static_cast<Word>(static_cast<UWord>(d) | mask);
      if (in.op == Op::Btr) d = static_cast<Word>(static_cast<UWord>(d) & ~mask);
      if (in.op == Op::Btc) d = static_cast<Word>(static_cast<UWord>(d) ^ mask);
      st_.flags = (st_.flags & ~flag::C) | (was ? flag::C : 0u);
      break;
    }
    case Op::Bsf: case Op::Bsr: {
      const UWord u = static_cast<UWord>(r[in.rs]);
      if (u == 0) {
        st_.flags |= flag::Z;
      } else {
        st_.flags &= ~flag::Z;
        d = in.op == Op::Bsf ? std::countr_zero(u) : 31 - std::countl_zero(u);
      }
      break;
    }
    case Op::Popcnt:
      d = std::popcount(static_cast<UWord>(r[in.rs]));
      st_.flags = (st_.flags & ~flag::Z) | (d == 0 ? flag::Z : 0u);
      break;

    // Flag control
    case Op::Stc: st_.flags |= flag::C; break;
    case Op::Clc: st_.flags &= ~flag::C; break;
    case Op::Sti: require_kernel(); st_.flags |= flag::I; break;
    case Op::Cli: require_kernel(); st_.flags &= ~flag::I; break;
    case Op::Pushf: {
      const Word sp = r[kStackPointer] - 1;
      store(sp, kStackSegment, static_cast<Word>(st_.flags & flag::Visible));
      r[kStackPointer] = sp;
      break;
    }
    case Op::Popf: {
      const UWord v = static_cast<UWord>(load(r[kStackPointer], kStackSegment));
      r[kStackPointer] += 1;
      const UWord writable = st_.cpl == 0 ? flag::Visible : flag::Arith;
      st_.flags = (st_.flags & ~writable) | (v & writable);
      break;
    }

    // Processor control
    case Op::Nop: break;
    case Op::Hlt: require_io(); st_.halted = true; break;
    case Op::Stop: require_kernel(); st_.stopped = true; break;

    // Flow control
    case Op::Jmp: pc = r[in.rs]; break;
    case Op::Xjmp: pc = in.imm32; break;
    case Op::Jz: jump_if(st_.flags & flag::Z); break;
    case Op::Jnz: jump_if(!(st_.flags & flag::Z)); break;
    case Op::Jc: jump_if(st_.flags & flag::C); break;
    case Op::Jnc: jump_if(!(st_.flags & flag::C)); break;
    case Op::Js: jump_if(st_.flags & flag::S); break;
    case Op::Jns: jump_if(!(st_.flags & flag::S)); break;
    case Op::Jo: jump_if(st_.flags & flag::O); break;
    case Op::Jno: jump_if(!(st_.flags & flag::O)); break;
    case Op::Call: case Op::Xcall: {
      const Word sp = r[kStackPointer] - 1;
      store(sp, kStackSegment, next);
      r[kStackPointer] = sp;
      pc = src;
      break;
    }
    case Op::Ret:
      pc = load(r[kStackPointer], kStackSegment);
      r[kStackPointer] += 1;
      break;
    case Op::Int: {
      if (in.imm16 < 0 || in.imm16 >= static_cast<int>(kVectorCount))
        throw Fault{static_cast<unsigned>(Vector::InvalidOpcode), 0};
      const auto n = static_cast<unsigned>(in.imm16);
      const IvEntry e{static_cast<UWord>(mem_->cpu_read(ic_.iv_base + n).value)};
      const bool allowed = e.direct() ? st_.cpl <= e.prot() : st_.cpl == 0;
      if (!allowed || n >= ic_.top()) throw Fault{static_cast<unsigned>(Vector::PrivilegeViolation), 0};
      sync_vector_ = static_cast<int>(n);
      sync_return_pc_ = next;
      break;
    }
    case Op::Iret: {
      require_kernel();
      const Word sp = r[kStackPointer];
      const Word new_pc = load(sp, kStackSegment);
      const Word new_s0 = load(sp + 1, kStackSegment);
      const UWord frame = static_cast<UWord>(load(sp + 2, kStackSegment));
      r[kStackPointer] = sp + 3;
      pc = new_pc;
      st_.s[kCodeSegment] = new_s0;
      st_.flags = frame & flag::Visible;
      st_.cpl = (frame & flag::FrameCpl) ? 1 : 0;
      if ((frame & flag::FrameInterrupt) && !ic_.in_service.empty()) ic_.in_service.pop_back();
      break;
    }
    case Op::Loop: {
      d -= 1;
      if (d != 0) pc = in.imm32;
      break;
    }
    case Op::Jmpf:
      st_.s[kCodeSegment] = st_.s[in.rd & 7u];
      pc = in.imm32;
      break;
    case Op::Callf: {
      const Word sp = r[kStackPointer];
      const UWord frame = (st_.flags & flag::Visible) | (st_.cpl ? flag::FrameCpl : 0u);
      store(sp - 1, kStackSegment, static_cast<Word>(frame));
      store(sp - 2, kStackSegment, st_.s[kCodeSegment]);
      store(sp - 3, kStackSegment, next);
      r[kStackPointer] = sp - 3;
      st_.s[kCodeSegment] = st_.s[in.rd & 7u];
      pc = in.imm32;
      break;
    }

    // Memory protection
    case Op::Pgon: require_kernel(); mmu_->set_paging(true); break;
    case Op::Pgoff: require_kernel(); mmu_->set_paging(false); break;
    case Op::Tlbinv: require_kernel(); mmu_->tlb_invalidate(); break;
    case Op::Segon: require_kernel(); mmu_->set_segmentation(true); break;
    case Op::Segoff: require_kernel(); mmu_->set_segmentation(false); break;

    // I/O
    // Port I/O always occupies the bus.
    case Op::In:
      require_io();
      mem_->bus().note_cpu();
      d = io_ ? io_->io_read(static_cast<unsigned>(in.imm16) & 0xFFu) : 0;
      break;
    case Op::Out: case Op::Xout:
      require_io();
      mem_->bus().note_cpu();
      if (io_) io_->io_write(static_cast<unsigned>(in.imm16) & 0xFFu, src);
      break;

    case Op::Invalid: throw Fault{static_cast<unsigned>(Vector::InvalidOpcode), 0};
  }
  st_.pc = pc;
}

void Cpu::double_fault(unsigned vector, const char* why) const {
  throw SimFault(fmt::format("double fault: vector {} at pc 0x{:X} ({})", vector, static_cast<UWord>(st_.pc), why));
}

void Cpu::end_of_cycle() {
  if (sync_vector_ >= 0) {
    const auto v = static_cast<unsigned>(sync_vector_);
    sync_vector_ = -1;
    if (v >= ic_.top()) double_fault(v, "vector does not outrank the one in service");
    dispatch(v, sync_return_pc_);
    return;
  }
  if (ic_.pending != 0 && st_.interrupts_enabled()) {
    const auto v = static_cast<unsigned>(std::countr_zero(ic_.pending));
    if (v < ic_.top()) {
      ic_.pending &= ~(1u << v);
      dispatch(v, st_.pc);
    }
  }
}

void Cpu::dispatch(unsigned vector, Word return_pc) {
  BusArbiter& bus = mem_->bus();
  bus.set_deferring(true);
  const UWord frame = (st_.flags & flag::Visible) | (st_.cpl ? flag::FrameCpl : 0u) | flag::FrameInterrupt;
  const Word sp = st_.r[kStackPointer];
  IvEntry e;
  try {
    st_.cpl = 0;
    store(sp - 1, kStackSegment, static_cast<Word>(frame));
    store(sp - 2, kStackSegment, st_.s[kCodeSegment]);
    store(sp - 3, kStackSegment, return_pc);
    e.raw = static_cast<UWord>(mem_->cpu_read(ic_.iv_base + vector).value);
  } catch (const Fault& f) {
    bus.set_deferring(false);
    double_fault(vector, f.vector == static_cast<unsigned>(Vector::PageFault) ? "page fault pushing the frame"
                                                                                 : "fault pushing the frame");
  }
  bus.set_deferring(false);

  st_.r[kStackPointer] = sp - 3;
  if (e.direct()) {
    st_.pc = static_cast<Word>(e.entry_point());
  } else {
    st_.s[kCodeSegment] = static_cast<Word>(e.raw);
    st_.pc = 0;
  }
  st_.flags &= ~flag::I;
  st_.halted = false;
  ic_.in_service.push_back(static_cast<std::uint8_t>(vector));
  report_.dispatched = static_cast<int>(vector);
  ++stats_.dispatches;
}

}  // namespace clown
