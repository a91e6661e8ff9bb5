#include <doctest.h>

#include <random>

#include "clown/mmu.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace clown;

namespace {

struct Rig {
  MemorySystem mem{1 << 16};
  Mmu mmu{mem};
  std::array<Word, kSegmentCount> segs{};
  Word pt = 0x8000;

  Translation go(Word offset, AccessKind a = AccessKind::Read, unsigned seg = 1, unsigned cpl = 0) {
    return mmu.translate(offset, seg, a, cpl, segs, pt);
  }
  void map(UWord vpn, UWord frame, bool w = true, bool u = true) {
    mem.poke(static_cast<Address>(pt) + vpn, static_cast<Word>(PageTableEntry::make(frame, true, w, u).raw));
  }
};

}  // namespace

TEST_CASE("identity with both mechanisms off") {
  Rig r;
  for (UWord a = 0; a < (1u << 20); a += 7) {
    const auto t = r.go(static_cast<Word>(a));
    REQUIRE(t.ok());
    REQUIRE(t.physical == a);
  }
  CHECK(r.go(0x1234).physical == 0x1234);
}

TEST_CASE("segment base and limit") {
  Rig r;
  r.mmu.set_segmentation(true);
  r.segs[1] = static_cast<Word>(SegmentDescriptor::make(0x1000, 1, true).raw);
  CHECK(r.go(0x10).physical == 0x1010);
  CHECK(r.go(0x3FF).physical == 0x13FF);
  CHECK(r.go(0x400).fault == FaultKind::SegmentViolation);
  CHECK(r.go(-1).fault == FaultKind::SegmentViolation);

  r.segs[2] = static_cast<Word>(SegmentDescriptor::make(0x2000, 4, false).raw);
  CHECK(r.go(5, AccessKind::Read, 2).physical == 0x2005);
  CHECK(r.go(5, AccessKind::Write, 2).fault == FaultKind::SegmentViolation);

  r.mmu.set_segmentation(false);  // one big implicit segment again
  CHECK(r.go(0x400).physical == 0x400);
  CHECK(r.go(5, AccessKind::Write, 2).physical == 5);
}

TEST_CASE("descriptor layout") {
  const auto d = SegmentDescriptor::make(0x12340, 7, true);
  CHECK(d.base() == 0x12340);
  CHECK(d.limit_words() == 7 * 1024);
  CHECK(d.writable());
  CHECK((d.raw & 1u) == 0);
  CHECK(SegmentDescriptor{0x801}.base() == 16);
}

TEST_CASE("absent page faults with the linear address") {
  Rig r;
  r.mmu.set_paging(true);
  const auto t = r.go(0x2345);
  CHECK(t.fault == FaultKind::PageFault);
  CHECK(t.linear == 0x2345);
}

TEST_CASE("page walk, protection and A/D bits") {
  Rig r;
  r.mmu.set_paging(true);
  r.map(3, 0x50, false, false);
  auto t = r.go(3 * 128 + 9);
  CHECK(t.physical == 0x50 * 128 + 9);
  PageTableEntry pte{static_cast<UWord>(r.mem.peek(static_cast<Address>(r.pt) + 3))};
  CHECK(pte.accessed());
  CHECK_FALSE(pte.dirty());
  CHECK(r.go(3 * 128, AccessKind::Write).fault == FaultKind::PageFault);
  CHECK(r.go(3 * 128, AccessKind::Read, 1, 1).fault == FaultKind::PageFault);  // kernel-only page

  r.map(4, 0x60, true, true);
  CHECK(r.go(4 * 128 + 1, AccessKind::Write, 1, 1).physical == 0x60 * 128 + 1);
  pte.raw = static_cast<UWord>(r.mem.peek(static_cast<Address>(r.pt) + 4));
  CHECK(pte.dirty());
}

TEST_CASE("TLB: stale entries until tlbinv") {
  Rig r;
  r.mmu.set_paging(true);
  r.map(7, 0x20);
  CHECK(r.go(7 * 128).physical == 0x20 * 128);
  const auto walks = r.mmu.stats().walks;
  CHECK(r.go(7 * 128 + 1).physical == 0x20 * 128 + 1);
  CHECK(r.mmu.stats().walks == walks);  // served from the TLB

  r.map(7, 0x30);
  CHECK(r.go(7 * 128).physical == 0x20 * 128);  // stale
  r.mmu.tlb_invalidate();
  CHECK(r.go(7 * 128).physical == 0x30 * 128);
  CHECK(r.mmu.stats().walks == walks + 1);

  // vpn 7 and 23 share a direct-mapped slot.
  r.map(23, 0x40);
  CHECK(r.go(23 * 128).physical == 0x40 * 128);
  CHECK(r.go(7 * 128).physical == 0x30 * 128);
  CHECK(r.mmu.stats().walks == walks + 3);
}

TEST_CASE("enabling paging does not flush the TLB") {
  Rig r;
  r.mmu.set_paging(true);
  r.map(2, 0x11);
  r.go(2 * 128);
  r.mmu.set_paging(false);
  r.map(2, 0x12);
  r.mmu.set_paging(true);
  CHECK(r.go(2 * 128).physical == 0x11 * 128);
}

TEST_CASE("identity page table changes nothing") {
  Rig r;
  for (UWord v = 0; v < 256; ++v) r.map(v, v);
  r.mmu.set_paging(true);
  for (UWord a = 0; a < 256 * 128; a += 13) CHECK(r.go(static_cast<Word>(a)).physical == a);
}

TEST_CASE("random configurations agree with the brute-force oracle") {
  std::mt19937_64 rng(0x3A3A);
  Rig r;
  const auto peek = [&](Address a) { return r.mem.peek(a); };
  int checked = 0;
  while (checked < 100000) {
    oracle::MmuCase c;
    c.segmentation = rng() % 2;
    c.paging = rng() % 2;
    for (auto& s : c.segments) {
      const UWord base = static_cast<UWord>(rng() % 1024) * 8;
      const unsigned limit = rng() % 10;
      s = static_cast<Word>(SegmentDescriptor::make(base, limit, rng() % 2).raw | (rng() % 2));
    }
    c.page_table = rng() % 20 == 0 ? static_cast<Word>(r.mem.size() - 40) : static_cast<Word>(0x8000 + rng() % 0x1000);
    for (UWord v = 0; v < 160; ++v) {
      const Address a = static_cast<Address>(c.page_table) + v;
      if (a >= r.mem.size()) break;
      r.mem.poke(a, static_cast<Word>(static_cast<UWord>(rng() % 512) << 8 | static_cast<UWord>(rng() % 32)));
    }
    r.mmu.set_segmentation(c.segmentation);
    r.mmu.set_paging(c.paging);
    r.mmu.tlb_invalidate();
    // Several accesses per table so TLB hits are exercised too.
    for (int k = 0; k < 5; ++k, ++checked) {
      c.offset = rng() % 8 == 0 ? static_cast<Word>(rng()) : static_cast<Word>(rng() % 12000);
      c.seg = rng() % kSegmentCount;
      c.access = static_cast<AccessKind>(rng() % 3);
      c.cpl = rng() % 2;
      const auto want = oracle::translate(c, peek, r.mem.size());
      const auto got = r.mmu.translate(c.offset, c.seg, c.access, c.cpl, c.segments, c.page_table);
      REQUIRE(got.fault == want.fault);
      if (want.ok()) REQUIRE(got.physical == want.physical);
      if (want.fault == FaultKind::PageFault) REQUIRE(got.linear == want.linear);
    }
  }
}

TEST_CASE("TLB transparency on a paging program") {
  auto run = [](bool tlb) {
    auto sys = test::boot_corpus("page-fault.s");
    sys->mmu().set_tlb_enabled(tlb);
    const auto sum = test::run_for(*sys, 1'000'000);
    REQUIRE(sum.reason == StopReason::Stopped);
    sys->memory().flush();
    return std::tuple{sys->cpu().state().r, sys->terminal().tx(),
                      std::vector<Word>(sys->memory().ram().words().begin(), sys->memory().ram().words().end()),
                      sys->mmu().stats()};
  };
  const auto [r1, tx1, ram1, s1] = run(true);
  const auto [r2, tx2, ram2, s2] = run(false);
  CHECK(r1 == r2);
  CHECK(tx1 == tx2);
  CHECK(ram1 == ram2);
  CHECK(s1.tlb_hits > 0);
  CHECK(s2.tlb_hits == 0);
  CHECK(s2.walks > s1.walks);
}
