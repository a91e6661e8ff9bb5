#include <doctest.h>

#include <map>

#include "clown/link.hpp"
#include "support.hpp"

using namespace clown;

namespace {

DiskImage boot_disk() {
  DiskImage d;
  const auto payload = emit_bin(test::assemble_corpus("boot-payload.s"), 0x1000);
  CHECK(d.install(payload) == 1);
  return d;
}

void check_booted(const std::string& loader) {
  auto sys = test::boot_corpus(loader, 0x100, SystemConfig{}, boot_disk());
  const auto sum = test::run_for(*sys, 1'000'000);
  CHECK(sum.reason == StopReason::Stopped);
  CHECK(sys->terminal().tx_text() == "booted\n");
  CHECK(sys->cpu().state().r[10] == 0xB007);
}

}  // namespace

TEST_CASE("programs stay small") {
  const std::map<std::string, std::size_t> budget{{"kputs.s", 60},    {"boot.s", 25},       {"boot-dma.s", 15},
                                                  {"int-timer.s", 60}, {"int-kbd.s", 85},    {"page-table.s", 15},
                                                  {"page-fault.s", 25}, {"file.s", 30}};
  for (const auto& [file, lines] : budget) {
    CAPTURE(file);
    const auto n = test::nloc(test::corpus_dir() / file);
    MESSAGE(file << ": " << n << " lines");
    CHECK(n <= 2 * lines);
  }
}

TEST_CASE("kputs") {
  auto sys = test::boot_corpus("kputs.s");
  CHECK(test::run_for(*sys, 100000).reason == StopReason::Stopped);
  CHECK(sys->terminal().tx_text() == "Hello from Clown!\r\nSpring 2004\r\n");
}

TEST_CASE("kputs links into another program") {
  const auto caller = test::assemble_text(R"(
        .extern kputs
        .entry  start
start:  mov     %r13, 0x8000
        mov     %r1, msg
        call    kputs
        stop
        .segment data, w
msg:    .ascii  "linked\n"
)");
  const std::vector<LinkInput> in{{"caller", caller}, {"kputs", test::assemble_corpus("kputs.s")}};
  const auto m = link(in);
  System sys;
  const auto entry = sys.load_module(m, 0x100);
  REQUIRE(entry);
  CHECK(*entry == 0x100);
  sys.cpu().state().pc = static_cast<Word>(*entry);
  CHECK(sys.run({.max_cycles = 100000}).reason == StopReason::Stopped);
  CHECK(sys.terminal().tx_text() == "linked\r\n");
}

TEST_CASE("boot by polling") { check_booted("boot.s"); }

TEST_CASE("boot through DMA") {
  check_booted("boot-dma.s");
  auto sys = test::boot_corpus("boot-dma.s", 0x100, SystemConfig{}, boot_disk());
  test::run_for(*sys, 1'000'000);
  CHECK(sys->events().of_kind(EventKind::DmaComplete).size() == 1);
  CHECK(sys->dma().transfers() == 1);
}

TEST_CASE("int-timer") {
  auto sys = test::boot_corpus("int-timer.s");
  CHECK(test::run_for(*sys, 100000).reason == StopReason::Stopped);
  CHECK(sys->terminal().tx_text() == "12345 ticks\n");
  const auto irqs = sys->events().of_kind(EventKind::IrqRaised);
  REQUIRE(irqs.size() == 5);
  for (std::size_t i = 1; i < irqs.size(); ++i) CHECK(irqs[i].cycle - irqs[i - 1].cycle == 1000);
  CHECK(sys->cpu().stats().idle_cycles > 4000);
}

TEST_CASE("int-kbd") {
  auto sys = test::boot_corpus("int-kbd.s");
  sys->set_script(InputScript::parse("3000 0x78\n9000 0x71\n"));
  CHECK(test::run_for(*sys, 100000).reason == StopReason::Stopped);
  const auto out = sys->terminal().tx_text();
  CHECK(out == "xq\ncounter=19 ticks=17 keys=2\n");
  CHECK(std::count(out.begin(), out.end(), 'x') == 1);
}

TEST_CASE("int-kbd counter invariant under key storms") {
  for (Cycle gap : {1, 7, 40, 333}) {
    CAPTURE(gap);
    auto sys = test::boot_corpus("int-kbd.s");
    std::string script;
    Cycle at = 2000;
    for (int k = 0; k < 30; ++k, at += gap) script += std::to_string(at) + " 97\n";
    script += std::to_string(at + 500) + " 113\n";
    sys->set_script(InputScript::parse(script));
    REQUIRE(test::run_for(*sys, 1'000'000).reason == StopReason::Stopped);
    const auto out = sys->terminal().tx_text();
    unsigned counter = 0, ticks = 0, keys = 0;
    const auto pos = out.find("counter=");
    REQUIRE(pos != std::string::npos);
    REQUIRE(std::sscanf(out.c_str() + pos, "counter=%u ticks=%u keys=%u", &counter, &ticks, &keys) == 3);
    CHECK(keys == 31);
    CHECK(counter == ticks + keys);
  }
}

TEST_CASE("page-table") {
  auto sys = test::boot_corpus("page-table.s");
  CHECK(test::run_for(*sys, 100000).reason == StopReason::Stopped);
  sys->memory().flush();
  CHECK(sys->memory().peek(0x50 * 128 + 5) == 0x1234);
  CHECK(sys->cpu().state().r[2] == 0x1234);
}

TEST_CASE("page-fault") {
  auto sys = test::boot_corpus("page-fault.s");
  CHECK(test::run_for(*sys, 100000).reason == StopReason::Stopped);
  CHECK(sys->cpu().state().r[5] == 4);
  const auto faults = sys->events().of_kind(EventKind::Exception);
  CHECK(faults.size() == 4);
  for (const auto& e : faults) CHECK(e.a == 3);
  // Every faulting store restarts at the same instruction.
  for (const auto& e : faults) CHECK(e.b == faults[0].b);
}

TEST_CASE("file") {
  DiskImage d;
  auto put = [&](Word blk, Word next, const std::string& text) {
    std::vector<Word> b(kBlockWords);
    b[0] = next;
    b[1] = static_cast<Word>(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) b[2 + i] = text[i];
    d.write_blocks(static_cast<std::uint32_t>(blk / 16), static_cast<std::uint32_t>(blk % 16), b);
  };
  put(5, 17, "one ");
  put(17, 3, "two ");
  put(3, -1, "three\n");
  auto sys = test::boot_corpus("file.s", 0x100, SystemConfig{}, d);
  CHECK(test::run_for(*sys, 1'000'000).reason == StopReason::Stopped);
  CHECK(sys->terminal().tx_text() == "one two three\n");
  CHECK(sys->events().of_kind(EventKind::DiskComplete).size() == 3);
}
