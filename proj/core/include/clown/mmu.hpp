#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>

#include "clown/memory.hpp"
#include "clown/types.hpp"

namespace clown {

/// One-word segment descriptor, used both in segment registers and in
/// descriptor-mode interrupt vector entries.
///
///   31..10  base / 8     (bases are 8-word aligned)
///    9..2   limit        (in 1024-word units)
///    1      writable
///    0      ignored here (the IV mode bit)
struct SegmentDescriptor {
  UWord raw = 0;

  static constexpr SegmentDescriptor make(Address base, unsigned limit_kwords, bool writable) {
    return {((base / 8) << 10) | ((limit_kwords & 0xFFu) << 2) | (writable ? 2u : 0u)};
  }

  constexpr Address base() const { return (raw >> 10) * 8; }
  constexpr UWord limit_words() const { return ((raw >> 2) & 0xFFu) * 1024; }
  constexpr bool writable() const { return (raw & 2u) != 0; }
};

/// Descriptor loaded into %s0 at reset: base 0, largest limit, writable.
inline constexpr SegmentDescriptor kFlatSegment = SegmentDescriptor::make(0, 0xFF, true);

/// Page-table entry. Pages are kBlockWords (128) words.
///
///   31..8 frame   4 dirty   3 accessed   2 user   1 writable   0 present
struct PageTableEntry {
  UWord raw = 0;

  static constexpr UWord kPresent = 1u << 0;
  static constexpr UWord kWritable = 1u << 1;
  static constexpr UWord kUser = 1u << 2;
  static constexpr UWord kAccessed = 1u << 3;
  static constexpr UWord kDirty = 1u << 4;

  static constexpr PageTableEntry make(UWord frame, bool present, bool writable, bool user) {
    return {(frame << 8) | (present ? kPresent : 0u) | (writable ? kWritable : 0u) | (user ? kUser : 0u)};
  }

  constexpr UWord frame() const { return raw >> 8; }
  constexpr bool present() const { return (raw & kPresent) != 0; }
  constexpr bool writable() const { return (raw & kWritable) != 0; }
  constexpr bool user() const { return (raw & kUser) != 0; }
  constexpr bool accessed() const { return (raw & kAccessed) != 0; }
  constexpr bool dirty() const { return (raw & kDirty) != 0; }
};

enum class AccessKind : std::uint8_t { Read, Write, Fetch };

enum class FaultKind : std::uint8_t { None, SegmentViolation, PageFault };

struct Translation {
  Address physical = 0;
  FaultKind fault = FaultKind::None;
  Address linear = 0;  // faulting linear address for page faults

  bool ok() const { return fault == FaultKind::None; }
};

struct TlbEntry {
  bool valid = false;
  UWord vpn = 0;
  UWord frame = 0;
  bool writable = false;
  bool user = false;
  bool dirty = false;
};

/// 16-entry direct-mapped translation look-aside buffer, indexed by vpn mod 16.
class Tlb {
 public:
  static constexpr std::size_t kEntries = 16;

  const TlbEntry* probe(UWord vpn) const {
    const auto& e = entries_[vpn % kEntries];
    return e.valid && e.vpn == vpn ? &e : nullptr;
  }
  void fill(const TlbEntry& e) { entries_[e.vpn % kEntries] = e; }
  void invalidate() {
    for (auto& e : entries_) e.valid = false;
  }
  const TlbEntry& entry(std::size_t i) const { return entries_[i]; }

 private:
  std::array<TlbEntry, kEntries> entries_{};
};

struct MmuStats {
  std::uint64_t tlb_hits = 0;
  std::uint64_t walks = 0;
};

struct MmuEvent {
  Word offset;
  unsigned segment;
  AccessKind access;
  Address linear;
  Translation result;
  bool tlb_hit;
};

/// Segmentation followed by single-level paging. The page table is a linear
/// array of PTEs at physical address %r14, one word per virtual page; walks
/// read it through the cache like any other CPU memory access.
class Mmu {
 public:
  explicit Mmu(MemorySystem& mem) : mem_(&mem) {}

  bool paging() const { return paging_; }
  bool segmentation() const { return segmentation_; }
  /// Does not flush the TLB; software must issue tlbinv.
  void set_paging(bool on) { paging_ = on; }
  void set_segmentation(bool on) { segmentation_ = on; }

  void tlb_invalidate() { tlb_.invalidate(); }
  const Tlb& tlb() const { return tlb_; }
  /// Bypassing the TLB makes every paged access walk the table.
  void set_tlb_enabled(bool on) { tlb_enabled_ = on; }

  Translation translate(Word offset, unsigned seg, AccessKind access, unsigned cpl,
                        std::span<const Word, kSegmentCount> segments, Word page_table_base);

  /// Identity fast path check for the common case.
  bool identity() const { return !paging_ && !segmentation_; }

  const MmuStats& stats() const { return stats_; }
  void set_trace(std::function<void(const MmuEvent&)> hook) { trace_ = std::move(hook); }

 private:
  Translation walk(Address linear, AccessKind access, unsigned cpl, Word page_table_base, bool& tlb_hit);

  MemorySystem* mem_;
  Tlb tlb_;
  bool paging_ = false;
  bool segmentation_ = false;
  bool tlb_enabled_ = true;
  MmuStats stats_;
  std::function<void(const MmuEvent&)> trace_;
};

}  // namespace clown
