#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "clown/cpu.hpp"
#include "clown/devices.hpp"
#include "clown/disk_image.hpp"
#include "clown/dma.hpp"
#include "clown/events.hpp"
#include "clown/memory.hpp"
#include "clown/mmu.hpp"
#include "clown/object.hpp"

namespace clown {

struct DeviceMap {
  unsigned iobase;
  unsigned irq;
};

struct SystemConfig {
  std::size_t mem_words = kDefaultMemoryWords;
  bool cache_enabled = true;
  BusMode bus_mode = BusMode::CacheAware;
  DeviceMap timer{0x10, 0};
  DeviceMap terminal{0x20, 1};
  DeviceMap disk{0x30, 2};
  DeviceMap dma{0x40, 3};
  /// Geometry for emit_config_header; a System takes it from its disk image.
  DiskGeometry geometry{};
  /// Target simulated MIPS; 0 runs unthrottled.
  double throttle_mips = 0;
  /// Keep the full event list (the hash is always maintained).
  bool keep_events = false;

  /// Throws Error on overlapping device windows, bad IRQs, or a negative throttle.
  void validate() const;
};

/// `#define` lines for every device base and IRQ channel of `cfg`.
std::string emit_config_header(const SystemConfig& cfg);

/// Scripted keystrokes: "cycle key" per line, '#' comments allowed.
struct InputScript {
  struct Entry {
    Cycle cycle;
    Word key;
  };
  std::vector<Entry> entries;

  static InputScript parse(std::string_view text, const std::string& name = "<script>");
  static InputScript load(const std::filesystem::path& path);
};

struct TraceRecord {
  Cycle cycle;
  Word pc;
  bool idle;
  isa::Instruction inst;
  isa::BusClass bus;
  int exception;
  int dispatched;
};

/// One line per cycle: cycle, pc, disassembly, bus class, vector.
std::string format_trace(const TraceRecord& r);

enum class StopReason : std::uint8_t { Stopped, MaxCycles, Breakpoint, HaltedForever, Cancelled };
std::string_view stop_reason_name(StopReason r);

struct RunLimits {
  std::optional<Cycle> max_cycles;
  std::optional<Word> breakpoint;
};

struct RunSummary {
  StopReason reason = StopReason::Stopped;
  Cycle cycles = 0;
  std::uint64_t instructions = 0;
  double seconds = 0;
  double mips() const { return seconds > 0 ? static_cast<double>(instructions) / seconds / 1e6 : 0; }
};

/// A loaded range, for overlap diagnostics.
struct LoadedRange {
  std::string name;
  Address begin;
  Address end;
};

class System : private InterruptSink {
 public:
  explicit System(const SystemConfig& cfg = {}, DiskImage disk = DiskImage{});
  System(const System&) = delete;
  System& operator=(const System&) = delete;

  /// One clock cycle of the whole machine.
  const CycleReport& tick();
  RunSummary run(const RunLimits& limits = {});

  /// Copies a raw image to `base`; refuses overlaps with earlier loads.
  void load_words(std::span<const Word> words, Address base, const std::string& name = "<image>");
  /// Places a linked module from `base` and returns its entry address, if any.
  std::optional<Address> load_module(const ObjectModule& m, Address base, const std::string& name = "<exe>",
                                     const std::map<std::string, Address>& overrides = {});
  const std::vector<LoadedRange>& loaded() const { return loaded_; }

  void set_script(InputScript script);
  /// Thread-safe; the key is injected at the next cycle boundary.
  void post_key(Word key);
  /// Thread-safe; makes run() return with Cancelled at the next boundary.
  void cancel() { cancel_.store(true, std::memory_order_relaxed); }

  void set_trace(std::function<void(const TraceRecord&)> hook) { trace_ = std::move(hook); }

  Cycle cycle() const { return cycle_; }
  const SystemConfig& config() const { return cfg_; }
  Cpu& cpu() { return cpu_; }
  const Cpu& cpu() const { return cpu_; }
  MemorySystem& memory() { return mem_; }
  const MemorySystem& memory() const { return mem_; }
  Mmu& mmu() { return mmu_; }
  IoBus& io() { return io_; }
  Timer& timer() { return timer_; }
  Terminal& terminal() { return terminal_; }
  Disk& disk() { return disk_; }
  DiskImage& disk_image() { return image_; }
  DmaController& dma() { return dma_; }
  EventLog& events() { return log_; }
  const EventLog& events() const { return log_; }

 private:
  void raise_irq(unsigned channel) override;
  void inject_due();
  void throttle(std::uint64_t instructions, std::chrono::steady_clock::time_point start);

  SystemConfig cfg_;
  Cycle cycle_ = 0;
  EventLog log_;
  MemorySystem mem_;
  Mmu mmu_;
  IoBus io_;
  Cpu cpu_;
  DiskImage image_;
  Timer timer_;
  Terminal terminal_;
  Disk disk_;
  DmaController dma_;

  InputScript script_;
  std::size_t script_pos_ = 0;
  std::mutex host_mu_;
  std::vector<Word> host_keys_;
  std::atomic<bool> host_pending_{false};
  std::atomic<bool> cancel_{false};

  std::vector<LoadedRange> loaded_;
  std::function<void(const TraceRecord&)> trace_;
};

}  // namespace clown
