#include "clown/memory.hpp"

#include <fmt/format.h>

namespace clown {

PhysicalMemory::PhysicalMemory(std::size_t words) : words_(words, 0) {}

void PhysicalMemory::throw_out_of_range(Address a) const {
  throw SimFault(fmt::format("physical address 0x{:X} outside memory of 0x{:X} words", a, words_.size()));
}

void BusArbiter::begin_cycle() {
  cpu_used_ = carried_;
  carried_frame_ = carried_;
  carried_ = false;
  dma_used_ = false;
  granted_ = false;
}

void BusArbiter::end_cycle() {
  ++stats_.cycles;
  if (cpu_used_) ++stats_.cpu_cycles;
  if (dma_used_) ++stats_.dma_cycles;
  if (cpu_used_ && dma_used_) ++stats_.conflicts;
  if (!granted_) ++stats_.dma_denied;
}

bool BusArbiter::bus_free_for_dma(isa::BusClass cls) const {
  // Strict mode adds the instruction-class rule on top of actual bus use:
  // a fetch miss or call/ret stack traffic still occupies the bus.
  if (mode_ == BusMode::StrictLiteral && cls != isa::BusClass::None) return false;
  return !cpu_used_;
}

void BusArbiter::note_dma() {
  if (!granted_) throw SimFault("DMA bus transaction without a bus grant");
  dma_used_ = true;
}

MemorySystem::MemorySystem(std::size_t words, bool cache_enabled, BusMode mode)
    : ram_(words), cache_enabled_(cache_enabled), bus_(mode) {
  if (words % Cache::kLineWords != 0) {
    throw SimFault(fmt::format("memory size {} is not a multiple of the cache line size", words));
  }
}

void MemorySystem::write_back(std::size_t index) {
  auto& l = cache_.line(index);
  const Address base = Cache::line_base(l.tag, index);
  for (std::size_t k = 0; k < Cache::kLineWords; ++k) ram_.write(base + static_cast<Address>(k), l.data[k]);
  l.dirty = false;
  ++stats_.writebacks;
}

CacheLine* MemorySystem::miss(Address a) {
  const Address base = a - a % Cache::kLineWords;
  if (!ram_.contains(base, Cache::kLineWords)) ram_.read(a);  // throws with the address
  ++stats_.misses;
  bus_.note_cpu();
  const std::size_t i = Cache::line_index(a);
  auto& l = cache_.line(i);
  if (l.valid && l.dirty) write_back(i);
  for (std::size_t k = 0; k < Cache::kLineWords; ++k) l.data[k] = ram_.read(base + static_cast<Address>(k));
  l.valid = true;
  l.dirty = false;
  l.tag = Cache::tag_of(a);
  return &l;
}

Word MemorySystem::dma_read(Address a) {
  bus_.note_dma();
  if (cache_enabled_ && cache_.holds(a)) {
    const std::size_t i = Cache::line_index(a);
    if (cache_.line(i).dirty) write_back(i);
  }
  return ram_.read(a);
}

void MemorySystem::dma_write(Address a, Word v) {
  bus_.note_dma();
  ram_.read(a);  // range check before touching the cache
  if (cache_enabled_ && cache_.holds(a)) {
    const std::size_t i = Cache::line_index(a);
    if (cache_.line(i).dirty) write_back(i);
    cache_.line(i).valid = false;
  }
  ram_.write(a, v);
}

std::size_t MemorySystem::flush() {
  std::size_t n = 0;
  for (std::size_t i = 0; i < Cache::kLines; ++i) {
    auto& l = cache_.line(i);
    if (l.valid && l.dirty) {
      write_back(i);
      ++n;
    }
  }
  return n;
}

Word MemorySystem::peek(Address a) const {
  if (cache_enabled_ && cache_.holds(a)) return cache_.line(Cache::line_index(a)).data[a % Cache::kLineWords];
  return ram_.read(a);
}

void MemorySystem::poke(Address a, Word v) {
  ram_.write(a, v);
  if (cache_enabled_ && cache_.holds(a)) {
    auto& l = cache_.line(Cache::line_index(a));
    l.data[a % Cache::kLineWords] = v;
  }
}

}  // namespace clown
