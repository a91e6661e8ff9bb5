#include <benchmark/benchmark.h>

#include "clown/assembler.hpp"
#include "clown/disasm.hpp"
#include "clown/system.hpp"

using namespace clown;

namespace {

const char* kLoop = R"(
        mov %r1, 100000
again:  dec %r1
        jnz again
        stop
)";

void BM_CountdownLoop(benchmark::State& state) {
  const auto bin = emit_bin(assemble(kLoop), 0x100);
  std::uint64_t insns = 0;
  for (auto _ : state) {
    System sys;
    sys.load_words(bin, 0x100);
    sys.cpu().state().pc = 0x100;
    const auto sum = sys.run();
    insns += sum.instructions;
  }
  state.counters["MIPS"] = benchmark::Counter(static_cast<double>(insns) / 1e6, benchmark::Counter::kIsRate);
}
BENCHMARK(BM_CountdownLoop)->Unit(benchmark::kMillisecond);

void BM_CacheReads(benchmark::State& state) {
  MemorySystem mem(1 << 16);
  const auto span = static_cast<Address>(state.range(0));
  Address a = 0;
  for (auto _ : state) {
    mem.bus().begin_cycle();
    benchmark::DoNotOptimize(mem.cpu_read(a).value);
    mem.bus().end_cycle();
    a = (a + 1) % span;
  }
}
BENCHMARK(BM_CacheReads)->Arg(256)->Arg(4096);

void BM_AssembleAndDisassemble(benchmark::State& state) {
  std::string src;
  for (int i = 0; i < 500; ++i) src += "l" + std::to_string(i) + ": add %r1, " + std::to_string(i) + "\n jnz l0\n";
  for (auto _ : state) {
    const auto bin = emit_bin(assemble(src));
    benchmark::DoNotOptimize(disassemble(bin));
  }
}
BENCHMARK(BM_AssembleAndDisassemble)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
