#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "clown/error.hpp"
#include "clown/isa.hpp"
#include "clown/types.hpp"

namespace clown {

/// One bank of word-addressed RAM. Accesses outside the bank are simulator
/// faults, never CPU exceptions.
class PhysicalMemory {
 public:
  explicit PhysicalMemory(std::size_t words = kDefaultMemoryWords);

  std::size_t size() const { return words_.size(); }
  bool contains(Address a, std::size_t n = 1) const { return a < words_.size() && n <= words_.size() - a; }

  Word read(Address a) const {
    check(a);
    return words_[a];
  }
  void write(Address a, Word v) {
    check(a);
    words_[a] = v;
  }

  std::span<Word> words() { return words_; }
  std::span<const Word> words() const { return words_; }

 private:
  void check(Address a) const {
    if (a >= words_.size()) [[unlikely]]
      throw_out_of_range(a);
  }
  [[noreturn]] void throw_out_of_range(Address a) const;

  std::vector<Word> words_;
};

enum class BusMode : std::uint8_t {
  /// The DMA engine gets the bus whenever the CPU did not actually use it
  /// (cache hits leave the bus idle).
  CacheAware,
  /// The DMA engine gets the bus only after instructions that are neither
  /// memory references nor I/O instructions, regardless of the cache.
  StrictLiteral,
};

struct BusStats {
  std::uint64_t cycles = 0;
  std::uint64_t cpu_cycles = 0;   // cycles in which the CPU held the bus
  std::uint64_t dma_cycles = 0;   // cycles in which the DMA engine held the bus
  std::uint64_t conflicts = 0;    // cycles in which both did (must stay 0)
  std::uint64_t dma_denied = 0;   // cycles in which the DMA engine was refused
};

/// Decides, once per cycle, whether the DMA engine may perform a bus
/// transaction, and counts who actually used the bus.
class BusArbiter {
 public:
  explicit BusArbiter(BusMode mode = BusMode::CacheAware) : mode_(mode) {}

  BusMode mode() const { return mode_; }
  void set_mode(BusMode m) { mode_ = m; }

  void begin_cycle();
  void end_cycle();

  /// CPU-side transaction. While deferral is on (interrupt dispatch at the
  /// end of a cycle) the transaction is charged to the next cycle.
  void note_cpu() {
    if (deferring_)
      carried_ = true;
    else
      cpu_used_ = true;
  }
  void set_deferring(bool on) { deferring_ = on; }

  bool cpu_used_bus() const { return cpu_used_; }
  /// True when this cycle's CPU bus use was carried over from a dispatch.
  bool carried_frame() const { return carried_frame_; }

  /// Grant decision for this cycle given the CPU instruction's class.
  bool bus_free_for_dma(isa::BusClass cls) const;

  void set_grant(bool g) { granted_ = g; }
  bool granted() const { return granted_; }

  /// DMA-side transaction; throws SimFault if the bus was not granted.
  void note_dma();
  bool dma_used_bus() const { return dma_used_; }

  const BusStats& stats() const { return stats_; }

 private:
  BusMode mode_;
  bool cpu_used_ = false;
  bool dma_used_ = false;
  bool granted_ = false;
  bool deferring_ = false;
  bool carried_ = false;
  bool carried_frame_ = false;
  BusStats stats_;
};

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t writebacks = 0;
};

struct CacheLine {
  bool valid = false;
  bool dirty = false;
  UWord tag = 0;
  std::array<Word, 4> data{};
};

/// Single-level direct-mapped write-back cache: 64 lines of 4 words.
/// Word address a maps to line (a / 4) mod 64 with tag a / 256.
class Cache {
 public:
  static constexpr std::size_t kLines = 64;
  static constexpr std::size_t kLineWords = 4;

  static constexpr std::size_t line_index(Address a) { return (a / kLineWords) % kLines; }
  static constexpr UWord tag_of(Address a) { return a / (kLineWords * kLines); }
  static constexpr Address line_base(UWord tag, std::size_t index) {
    return static_cast<Address>((tag * kLines + index) * kLineWords);
  }

  CacheLine& line(std::size_t i) { return lines_[i]; }
  const CacheLine& line(std::size_t i) const { return lines_[i]; }

  bool holds(Address a) const {
    const auto& l = lines_[line_index(a)];
    return l.valid && l.tag == tag_of(a);
  }

 private:
  std::array<CacheLine, kLines> lines_{};
};

struct MemAccess {
  Word value;
  bool used_bus;
};

/// RAM + cache + bus. CPU accesses go through the cache; DMA accesses snoop it
/// (a DMA read sees dirty cached data, a DMA write invalidates the line).
class MemorySystem {
 public:
  explicit MemorySystem(std::size_t words = kDefaultMemoryWords, bool cache_enabled = true,
                        BusMode mode = BusMode::CacheAware);

  MemAccess cpu_read(Address a) {
    if (cache_enabled_) {
      const std::size_t i = Cache::line_index(a);
      auto& l = cache_.line(i);
      if (l.valid && l.tag == Cache::tag_of(a)) [[likely]] {
        ++stats_.hits;
        return {l.data[a % Cache::kLineWords], false};
      }
      return {miss(a)->data[a % Cache::kLineWords], true};
    }
    bus_.note_cpu();
    return {ram_.read(a), true};
  }

  bool cpu_write(Address a, Word v) {
    if (cache_enabled_) {
      const std::size_t i = Cache::line_index(a);
      auto& l = cache_.line(i);
      if (l.valid && l.tag == Cache::tag_of(a)) {
        ++stats_.hits;
        l.data[a % Cache::kLineWords] = v;
        l.dirty = true;
        return false;
      }
      CacheLine* filled = miss(a);
      filled->data[a % Cache::kLineWords] = v;
      filled->dirty = true;
      return true;
    }
    bus_.note_cpu();
    ram_.write(a, v);
    return true;
  }

  /// Snooping DMA accesses; the arbiter must have granted the bus.
  Word dma_read(Address a);
  void dma_write(Address a, Word v);

  /// Writes every dirty line back and cleans it; returns the number written.
  std::size_t flush();

  /// Reads the coherent value without touching statistics or the bus.
  Word peek(Address a) const;
  /// Writes RAM and any cached copy, bypassing statistics (image loading, test setup).
  void poke(Address a, Word v);

  PhysicalMemory& ram() { return ram_; }
  const PhysicalMemory& ram() const { return ram_; }
  const Cache& cache() const { return cache_; }
  bool cache_enabled() const { return cache_enabled_; }
  const CacheStats& stats() const { return stats_; }
  BusArbiter& bus() { return bus_; }
  const BusArbiter& bus() const { return bus_; }
  std::size_t size() const { return ram_.size(); }

 private:
  CacheLine* miss(Address a);
  void write_back(std::size_t index);

  PhysicalMemory ram_;
  Cache cache_;
  bool cache_enabled_;
  CacheStats stats_;
  BusArbiter bus_;
};

}  // namespace clown
