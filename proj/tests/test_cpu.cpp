#include <doctest.h>
#include <fmt/format.h>

#include <bit>
#include <random>

#include "clown/cpu.hpp"
#include "support.hpp"

using namespace clown;
using isa::Op;

namespace {

Word word0(Op op, unsigned rd = 0, unsigned rs = 0, int imm16 = 0) { return isa::encode(isa::make(op, rd, rs, imm16))[0]; }

// 32-bit two's-complement flags computed with 64-bit arithmetic.
UWord oracle_flags(std::int64_t exact, std::uint64_t unsigned_exact, bool borrow, bool is_sub) {
  const auto r = static_cast<Word>(static_cast<UWord>(unsigned_exact));
  UWord f = 0;
  if (r == 0) f |= flag::Z;
  if (r < 0) f |= flag::S;
  if (is_sub ? borrow : (unsigned_exact >> 32) != 0) f |= flag::C;
  if (exact != r) f |= flag::O;
  return f;
}

std::unique_ptr<System> run_src(const char* src, Cycle limit = 100000) {
  auto sys = test::boot(src);
  test::run_for(*sys, limit);
  return sys;
}

}  // namespace

TEST_CASE("reset state") {
  System sys;
  const CpuState& st = sys.cpu().state();
  CHECK(st.pc == 0);
  CHECK(st.flags == 0);
  CHECK_FALSE(st.interrupts_enabled());
  CHECK(st.cpl == 0);
  CHECK(static_cast<UWord>(st.s[0]) == kFlatSegment.raw);
  for (unsigned i = 1; i < kSegmentCount; ++i) CHECK(st.s[i] == 0);
  for (Word r : st.r) CHECK(r == 0);
  CHECK_FALSE(sys.mmu().paging());
  CHECK_FALSE(sys.mmu().segmentation());
}

TEST_CASE("stop as the first instruction") {
  System sys;
  sys.memory().poke(0, word0(Op::Stop));
  sys.tick();
  CHECK(sys.cpu().state().stopped);
  CHECK(sys.cycle() == 1);
}

TEST_CASE("dec sets Z and clears S") {
  auto sys = run_src("mov %r1, 1\n dec %r1\n stop\n");
  CHECK(sys->cpu().state().r[1] == 0);
  CHECK((sys->cpu().state().flags & flag::Z) != 0);
  CHECK((sys->cpu().state().flags & flag::S) == 0);
}

TEST_CASE("countdown loop takes 2N + 2 cycles") {
  for (int n : {1, 2, 1000}) {
    auto sys = test::boot(fmt::format("mov %r1, {}\nagain: dec %r1\n jnz again\n stop\n", n));
    const auto sum = sys->run();
    CHECK(sum.reason == StopReason::Stopped);
    CHECK(sum.cycles == static_cast<Cycle>(2 * n + 2));
    CHECK(sum.instructions == sum.cycles);
  }
}

TEST_CASE("add and sub flags agree with a 64-bit oracle") {
  MemorySystem mem(1024);
  Mmu mmu(mem);
  Cpu cpu(mem, mmu);
  mem.poke(0, word0(Op::Add, 1, 2));
  mem.poke(1, word0(Op::Sub, 3, 4));
  mem.poke(2, word0(Op::Cmp, 5, 6));

  std::mt19937_64 rng(42);
  const Word special[] = {0, 1, -1, 2, INT32_MIN, INT32_MAX, INT32_MIN + 1, INT32_MAX - 1};
  auto pick = [&]() -> Word {
    if (rng() % 4 == 0) return special[rng() % std::size(special)];
    return static_cast<Word>(static_cast<UWord>(rng()));
  };
  auto& st = cpu.state();
  for (int n = 0; n < 100000; ++n) {
    const Word a = pick(), b = pick();
    const auto ua = static_cast<UWord>(a), ub = static_cast<UWord>(b);

    st.pc = 0;
    st.r[1] = a;
    st.r[2] = b;
    cpu.step();
    const UWord add_f = oracle_flags(std::int64_t{a} + b, std::uint64_t{ua} + ub, false, false);
    REQUIRE(st.r[1] == static_cast<Word>(ua + ub));
    REQUIRE((st.flags & flag::Arith) == add_f);

    st.r[3] = a;
    st.r[4] = b;
    cpu.step();
    const UWord sub_f = oracle_flags(std::int64_t{a} - b, std::uint64_t{ua} - ub, ua < ub, true);
    REQUIRE(st.r[3] == static_cast<Word>(ua - ub));
    REQUIRE((st.flags & flag::Arith) == sub_f);

    st.r[5] = a;
    st.r[6] = b;
    cpu.step();
    REQUIRE(st.r[5] == a);
    REQUIRE((st.flags & flag::Arith) == sub_f);
  }
}

TEST_CASE("register, memory and stack instructions") {
  auto sys = run_src(R"(
        mov  %r1, 5
        mov  %r2, 9
        swap %r1, %r2
        mov  %r3, cell
        st   [%r3], %r1
        ld   %r4, [cell]
        lea  %r5, [%r3]
        push %r4
        push 77
        pop  %r6
        pop  %r7
        mov  %r8, sub1
        call %r8
        call sub1
        stop
sub1:   inc  %r9
        ret
cell:   .word 0
)");
  const auto& r = sys->cpu().state().r;
  CHECK(r[1] == 9);
  CHECK(r[2] == 5);
  CHECK(r[4] == 9);
  CHECK(r[5] == r[3]);
  CHECK(r[6] == 77);
  CHECK(r[7] == 9);
  CHECK(r[9] == 2);
  CHECK(r[kStackPointer] == 0x8000);
}

TEST_CASE("division and remainder") {
  auto sys = run_src(R"(
        mov %r1, -7
        div %r1, 2
        mov %r2, -7
        mod %r2, 2
        mov %r3, 6
        mov %r4, 3
        mod %r3, %r4
        stop
)");
  const auto& st = sys->cpu().state();
  CHECK(st.r[1] == -3);
  CHECK(st.r[2] == -1);
  CHECK(st.r[3] == 0);
  CHECK((st.flags & flag::Z) != 0);
}

TEST_CASE("shifts, rotates and bit instructions") {
  auto sys = run_src(R"(
        mov    %r1, 0x80000001
        shl    %r1, 1
        jnc    bad
        mov    %r2, -16
        sar    %r2, 2
        mov    %r3, -16
        shr    %r3, 28
        mov    %r4, 0x80000001
        mov    %r12, 4
        rol    %r4, %r12
        mov    %r5, 0x0F
        bt     %r5, 3
        jnc    bad
        bt     %r5, 4
        jc     bad
        mov    %r6, 0
        mov    %r12, 6
        bts    %r6, %r12
        mov    %r7, 0x50
        bsf    %r8, %r7
        bsr    %r9, %r7
        popcnt %r10, %r7
        mov    %r11, 3
        mov    %r12, 0
again:  inc    %r12
        loop   %r11, again
        stop
bad:    mov    %r0, -1
        stop
)");
  const auto& r = sys->cpu().state().r;
  CHECK(r[0] == 0);
  CHECK(r[1] == 2);
  CHECK(r[2] == -4);
  CHECK(r[3] == 0xF);
  CHECK(static_cast<UWord>(r[4]) == std::rotl(0x80000001u, 4));
  CHECK(r[6] == 64);
  CHECK(r[8] == 4);
  CHECK(r[9] == 6);
  CHECK(r[10] == 2);
  CHECK(r[11] == 0);
  CHECK(r[12] == 3);
}

TEST_CASE("pushf exposes only the seven visible flags") {
  auto sys = run_src("stc\n sti\n pushf\n pop %r1\n cli\n mov %r2, 0x7FFF\n push %r2\n popf\n pushf\n pop %r3\n stop\n");
  const auto& st = sys->cpu().state();
  CHECK(static_cast<UWord>(st.r[1]) == (flag::C | flag::I));
  CHECK((static_cast<UWord>(st.r[3]) & ~flag::Visible) == 0);
}

TEST_CASE("exceptions dispatch through the vector with the faulting pc") {
  const char* prologue = R"(
        mov  %r1, handler
        or   %r1, 1
        mov  %r2, 0
fill:   st   [%r2], %r1
        inc  %r2
        cmp  %r2, 16
        jnz  fill
)";
  const char* epilogue = R"(
        stop
        .align 8
handler:
        ld   %r9, [%r13]        ; saved pc
        mov  %r10, 1
        stop
)";
  struct Case {
    const char* body;
    int vector;
  };
  const Case cases[] = {
      {"fault: .word 0x7F000000\n", 0},
      {"mov %r3, 0\nfault: div %r4, %r3\n", 1},
      {"fault: mod %r4, 0\n", 1},
  };
  for (const auto& c : cases) {
    CAPTURE(c.body);
    const std::string src = std::string(prologue) + c.body + epilogue;
    auto sys = test::boot(src);
    test::run_for(*sys, 1000);
    const auto exc = sys->events().of_kind(EventKind::Exception);
    REQUIRE(exc.size() == 1);
    CHECK(exc[0].a == c.vector);
    CHECK(sys->cpu().state().r[10] == 1);
    CHECK(sys->cpu().state().r[9] == exc[0].b);  // frame pc is the faulting instruction
  }
}

TEST_CASE("privileged instructions from cpl 1") {
  for (const char* insn : {"cli", "sti", "stop", "pgon", "tlbinv", "segon", "lds %s1, %r1", "sts %r1, %s1", "iret"}) {
    CAPTURE(insn);
    auto sys = test::boot(fmt::format(R"(
        {}
        mov  %r2, 1
        stop
        .align 8
handler:
        mov  %r10, 4
        stop
)",
                                      insn));
    sys->memory().poke(4, static_cast<Word>(IvEntry::make_direct(sys->cpu().state().pc + 8, 0)));
    sys->cpu().state().cpl = 1;
    test::run_for(*sys, 100);
    CHECK(sys->cpu().state().r[10] == 4);
    CHECK(sys->cpu().state().r[2] == 0);
  }
}

TEST_CASE("I/O needs cpl <= IOPL") {
  auto sys = test::boot("out 1, (0x20)\n mov %r2, 1\n stop\n .align 8\nh: mov %r10, 4\n stop\n");
  sys->memory().poke(4, static_cast<Word>(IvEntry::make_direct(0x108, 0)));
  sys->cpu().state().cpl = 1;
  test::run_for(*sys, 100);
  CHECK(sys->cpu().state().r[10] == 4);
  CHECK(sys->terminal().tx().empty());

  auto ok = test::boot("out 65, (0x20)\n stop\n");
  ok->cpu().state().cpl = 1;
  ok->cpu().state().flags |= 1u << flag::IoplShift;
  test::run_for(*ok, 100);
  CHECK(ok->terminal().tx_text() == "A");
}

TEST_CASE("direct IV entry jumps to addr bits times 8") {
  auto sys = test::boot("int 20\n");
  sys->memory().poke(20, 0x00000801);
  sys->tick();
  CHECK(sys->cpu().state().pc == 0x800);
  CHECK(sys->cpu().interrupts().in_service == std::vector<std::uint8_t>{20});
  CHECK(sys->cpu().last().dispatched == 20);
}

TEST_CASE("descriptor IV entry loads %s0 and starts at 0") {
  auto sys = test::boot("int 21\n");
  const auto d = SegmentDescriptor::make(0x2000, 1, false);
  REQUIRE((d.raw & 1u) == 0);
  sys->memory().poke(21, static_cast<Word>(d.raw));
  sys->tick();
  CHECK(static_cast<UWord>(sys->cpu().state().s[0]) == d.raw);
  CHECK(sys->cpu().state().pc == 0);
}

TEST_CASE("iret restores flags, %s0 and pc exactly") {
  auto sys = test::boot(R"(
        stc
        sti
        int   20
after:  stop
        .align 8
isr:    clc
        iret
)");
  sys->memory().poke(20, static_cast<Word>(IvEntry::make_direct(0x108, 0)));
  sys->tick();
  sys->tick();
  const CpuState before = sys->cpu().state();
  sys->tick();  // int
  CHECK(sys->cpu().state().pc == 0x108);
  CHECK_FALSE(sys->cpu().state().interrupts_enabled());
  CHECK(sys->cpu().state().r[kStackPointer] == before.r[kStackPointer] - 3);
  sys->tick();  // clc
  sys->tick();  // iret
  const CpuState& after = sys->cpu().state();
  CHECK(after.flags == before.flags);
  CHECK(after.s[0] == before.s[0]);
  CHECK(after.pc == before.pc + 1);
  CHECK(after.cpl == before.cpl);
  CHECK(after.r[kStackPointer] == before.r[kStackPointer]);
  CHECK(sys->cpu().interrupts().in_service.empty());
}

TEST_CASE("int honours the entry's protection bits") {
  auto sys = test::boot(R"(
        int   20
        stop
        .align 8
isr:    mov   %r9, 20
        stop
        .align 8
priv:   mov   %r9, 4
        stop
)");
  sys->memory().poke(4, static_cast<Word>(IvEntry::make_direct(0x110, 0)));
  sys->memory().poke(20, static_cast<Word>(IvEntry::make_direct(0x108, 0)));
  sys->cpu().state().cpl = 1;
  test::run_for(*sys, 100);
  CHECK(sys->cpu().state().r[9] == 4);

  auto user = test::boot("int 20\n stop\n .align 8\nisr: mov %r9, 20\n stop\n");
  user->memory().poke(20, static_cast<Word>(IvEntry::make_direct(0x108, 1)));
  user->cpu().state().cpl = 1;
  test::run_for(*user, 100);
  CHECK(user->cpu().state().r[9] == 20);
  CHECK(user->cpu().state().cpl == 0);
}

TEST_CASE("nested int then two irets") {
  auto sys = test::boot(R"(
        int   20
        stop
        .align 8
isr20:  int   18
        iret
        .align 8
isr18:  mov   %r5, 1
        iret
)");
  sys->memory().poke(20, static_cast<Word>(IvEntry::make_direct(0x108, 0)));
  sys->memory().poke(18, static_cast<Word>(IvEntry::make_direct(0x110, 0)));
  std::size_t depth = 0;
  for (int i = 0; i < 20 && !sys->cpu().state().stopped; ++i) {
    sys->tick();
    depth = std::max(depth, sys->cpu().interrupts().in_service.size());
  }
  CHECK(sys->cpu().state().stopped);
  CHECK(depth == 2);
  CHECK(sys->cpu().interrupts().in_service.empty());
  CHECK(sys->cpu().state().r[5] == 1);
}

TEST_CASE("IRQ priorities and preemption") {
  // Each ISR re-enables interrupts and spins, so it stays in service.
  auto sys = test::boot(R"(
        sti
idle:   jmp   idle
        .align 8
isr0:   mov   %r1, 1
        iret
        .align 8
isr2:   sti
spin2:  jmp   spin2
        .align 8
isr5:   mov   %r5, 1
        iret
)");
  auto& mem = sys->memory();
  mem.poke(16, static_cast<Word>(IvEntry::make_direct(0x108, 0)));
  mem.poke(18, static_cast<Word>(IvEntry::make_direct(0x110, 0)));
  mem.poke(21, static_cast<Word>(IvEntry::make_direct(0x118, 0)));
  auto& cpu = sys->cpu();
  for (int i = 0; i < 3; ++i) sys->tick();

  cpu.raise_irq(2);
  CHECK(sys->tick().dispatched == 18);
  for (int i = 0; i < 3; ++i) sys->tick();

  cpu.raise_irq(5);  // lower priority than the one in service
  for (int i = 0; i < 10; ++i) CHECK(sys->tick().dispatched == -1);
  CHECK(cpu.interrupts().pending == (1u << 21));
  CHECK(cpu.state().r[5] == 0);

  cpu.raise_irq(0);  // higher priority preempts
  CHECK(sys->tick().dispatched == 16);
  CHECK(cpu.interrupts().in_service == std::vector<std::uint8_t>{18, 16});
  sys->tick();
  sys->tick();  // iret back into isr2
  CHECK(cpu.state().r[1] == 1);
  CHECK(cpu.interrupts().in_service == std::vector<std::uint8_t>{18});
  for (int i = 0; i < 10; ++i) sys->tick();
  CHECK(cpu.state().r[5] == 0);  // still blocked by channel 2
}

TEST_CASE("IRQ is latched, never seen before the next cycle") {
  auto sys = test::boot("sti\nidle: jmp idle\n .align 8\nisr: mov %r1, 1\n iret\n");
  sys->memory().poke(16, static_cast<Word>(IvEntry::make_direct(0x108, 0)));
  sys->tick();
  sys->tick();
  sys->cpu().raise_irq(0);
  const auto& rep = sys->tick();
  CHECK(rep.dispatched == 16);
  CHECK(rep.pc == 0x101);  // the instruction of this cycle was not the ISR
  CHECK(sys->cpu().state().r[1] == 0);
  sys->tick();
  CHECK(sys->cpu().state().r[1] == 1);
}

TEST_CASE("masked IRQ stays pending until sti") {
  auto sys = test::boot("nop\n nop\n sti\n nop\n stop\n .align 8\nisr: mov %r1, 1\n iret\n");
  sys->memory().poke(16, static_cast<Word>(IvEntry::make_direct(0x108, 0)));
  sys->cpu().raise_irq(0);
  CHECK(sys->tick().dispatched == -1);
  CHECK(sys->tick().dispatched == -1);
  CHECK(sys->tick().dispatched == 16);
  test::run_for(*sys, 100);
  CHECK(sys->cpu().state().r[1] == 1);
}

TEST_CASE("hlt idles until an interrupt, then resumes after it") {
  auto sys = test::boot(R"(
        sti
        hlt
        mov   %r3, 1
        stop
        .align 8
isr:    iret
)");
  sys->memory().poke(16, static_cast<Word>(IvEntry::make_direct(0x108, 0)));
  for (int i = 0; i < 12; ++i) sys->tick();
  CHECK(sys->cpu().state().halted);
  CHECK(sys->cpu().stats().idle_cycles == 10);
  sys->cpu().raise_irq(0);
  test::run_for(*sys, 100);
  CHECK(sys->cpu().state().r[3] == 1);
  const auto& s = sys->cpu().stats();
  CHECK(sys->cycle() == s.instructions + s.idle_cycles);
}

TEST_CASE("hlt with interrupts disabled halts forever") {
  auto sys = test::boot("hlt\n");
  const auto sum = test::run_for(*sys, 1000);
  CHECK(sum.reason == StopReason::HaltedForever);
  CHECK(sum.cycles == 1);
}

TEST_CASE("far call and far jump switch %s0") {
  auto sys = test::boot(R"(
        mov   %r1, 0x12345678
        lds   %s3, %r1
        sts   %r2, %s3
        callf %s0, far
        stop
far:    sts   %r4, %s0
        iret
)");
  test::run_for(*sys, 100);
  const auto& st = sys->cpu().state();
  CHECK(st.r[2] == 0x12345678);
  CHECK(static_cast<UWord>(st.r[4]) == kFlatSegment.raw);
  CHECK(st.stopped);
  CHECK(st.r[kStackPointer] == 0x8000);
}
