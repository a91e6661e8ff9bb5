#include "clown/mmu.hpp"

namespace clown {

Translation Mmu::translate(Word offset, unsigned seg, AccessKind access, unsigned cpl,
                           std::span<const Word, kSegmentCount> segments, Word page_table_base) {
  Translation t;
  Address linear = static_cast<UWord>(offset);
  bool tlb_hit = false;

  if (segmentation_) {
    const SegmentDescriptor d{static_cast<UWord>(segments[seg & 7u])};
    if (linear >= d.limit_words() || (access == AccessKind::Write && !d.writable())) {
      t.fault = FaultKind::SegmentViolation;
      t.linear = linear;
    } else {
      linear += d.base();
    }
  }

  if (t.ok()) {
    if (paging_) {
      t = walk(linear, access, cpl, page_table_base, tlb_hit);
    } else {
      t.physical = linear;
      t.linear = linear;
    }
  }

  if (trace_) trace_(MmuEvent{offset, seg, access, t.linear, t, tlb_hit});
  return t;
}

Translation Mmu::walk(Address linear, AccessKind access, unsigned cpl, Word page_table_base, bool& tlb_hit) {
  const UWord vpn = linear / kBlockWords;
  const UWord page_offset = linear % kBlockWords;
  const bool write = access == AccessKind::Write;

  Translation fault;
  fault.fault = FaultKind::PageFault;
  fault.linear = linear;

  if (tlb_enabled_) {
    if (const TlbEntry* e = tlb_.probe(vpn)) {
      if ((cpl != 0 && !e->user) || (write && !e->writable)) return fault;
      if (!write || e->dirty) {
        ++stats_.tlb_hits;
        tlb_hit = true;
        return {e->frame * static_cast<UWord>(kBlockWords) + page_offset, FaultKind::None, linear};
      }
      // First write through a clean entry: walk again to set the dirty bit.
    }
  }

  ++stats_.walks;
  const Address pte_addr = static_cast<UWord>(page_table_base) + vpn;
  if (pte_addr < static_cast<UWord>(page_table_base) || !mem_->ram().contains(pte_addr)) return fault;

  PageTableEntry pte{static_cast<UWord>(mem_->cpu_read(pte_addr).value)};
  if (!pte.present() || (cpl != 0 && !pte.user()) || (write && !pte.writable())) return fault;

  UWord updated = pte.raw | PageTableEntry::kAccessed | (write ? PageTableEntry::kDirty : 0u);
  if (updated != pte.raw) {
    mem_->cpu_write(pte_addr, static_cast<Word>(updated));
    pte.raw = updated;
  }

  if (tlb_enabled_) tlb_.fill({true, vpn, pte.frame(), pte.writable(), pte.user(), pte.dirty()});
  return {pte.frame() * static_cast<UWord>(kBlockWords) + page_offset, FaultKind::None, linear};
}

}  // namespace clown
