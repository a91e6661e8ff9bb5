#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "clown/cpu.hpp"
#include "clown/disk_image.hpp"
#include "clown/events.hpp"
#include "clown/types.hpp"

namespace clown {

class InterruptSink {
 public:
  virtual ~InterruptSink() = default;
  virtual void raise_irq(unsigned channel) = 0;
};

/// A port-mapped peripheral occupying ports [iobase, iobase + port_count).
class Device {
 public:
  Device(std::string name, unsigned iobase, unsigned irq, unsigned port_count);
  virtual ~Device() = default;

  const std::string& name() const { return name_; }
  unsigned iobase() const { return iobase_; }
  unsigned irq() const { return irq_; }
  unsigned port_count() const { return port_count_; }

  void attach(InterruptSink* sink, EventLog* log) {
    sink_ = sink;
    log_ = log;
  }

  virtual Word read(unsigned offset, Cycle now) = 0;
  virtual void write(unsigned offset, Word value, Cycle now) = 0;
  virtual void tick(Cycle /*now*/) {}

 protected:
  void interrupt(Cycle now);
  void log(Cycle now, EventKind k, Word a = 0, Word b = 0) {
    if (log_) log_->record(now, k, a, b);
  }

 private:
  std::string name_;
  unsigned iobase_;
  unsigned irq_;
  unsigned port_count_;
  InterruptSink* sink_ = nullptr;
  EventLog* log_ = nullptr;
};

/// Interval / single-shot timer.
///
///   +0  command/data: in Idle or Armed, 1 resets (stops) the timer and
///       other values are ignored; in Reset, a positive value loads the
///       counter and arms it
///   +1  mode: bit0 interval (reload on expiry), bit1 IRQ mask
///   +2  remaining count (read)
class Timer : public Device {
 public:
  enum class Phase : std::uint8_t { Idle, Reset, Armed };

  static constexpr unsigned kPorts = 3;
  static constexpr Word kModeInterval = 1;
  static constexpr Word kModeMasked = 2;

  Timer(unsigned iobase, unsigned irq) : Device("timer", iobase, irq, kPorts) {}

  Word read(unsigned offset, Cycle now) override;
  void write(unsigned offset, Word value, Cycle now) override;
  void tick(Cycle now) override;

  Phase phase() const { return phase_; }
  Word counter() const { return counter_; }
  std::uint64_t expirations() const { return expirations_; }

 private:
  Phase phase_ = Phase::Idle;
  Word counter_ = 0;
  Word reload_ = 0;
  Word mode_ = 0;
  Cycle armed_at_ = 0;
  std::uint64_t expirations_ = 0;
};

/// Console terminal. Output is always ready; input keys queue until read.
/// The device never echoes.
///
///   +0  data: write emits a word, read pops a key (0 when empty)
///   +1  status: bit0 key ready, bit1 overflow (cleared by reading)
///   +2  control: bit0 keyboard IRQ enable
class Terminal : public Device {
 public:
  static constexpr unsigned kPorts = 3;
  static constexpr std::size_t kQueueCap = 1024;

  Terminal(unsigned iobase, unsigned irq) : Device("terminal", iobase, irq, kPorts) {}

  Word read(unsigned offset, Cycle now) override;
  void write(unsigned offset, Word value, Cycle now) override;

  /// Host side: a key arriving at a cycle boundary.
  void inject_key(Word key, Cycle now);

  const std::vector<Word>& tx() const { return tx_; }
  /// tx words as text (low 8 bits of each word).
  std::string tx_text() const;
  std::size_t rx_pending() const { return rx_.size(); }
  bool irq_enabled() const { return (control_ & 1) != 0; }

  void set_output(std::function<void(Word)> out) { output_ = std::move(out); }

 private:
  std::deque<Word> rx_;
  std::vector<Word> tx_;
  bool overflow_ = false;
  Word control_ = 0;
  std::function<void(Word)> output_;
};

/// Cycles to move the head across `distance` tracks: 0 for no movement,
/// otherwise linear between t2t (one track) and max_seek (T-1 tracks).
Cycle seek_time(const DiskGeometry& g, std::uint32_t distance);

/// Cycles from `at` until the start of `sector` passes under the head.
Cycle rotational_wait(const DiskGeometry& g, Cycle at, std::uint32_t sector);

/// Hard disk controller with one request in flight and a one-block buffer.
///
///   +0  command: 1 SEEK, 2 READ, 3 WRITE, 4 reset buffer cursor
///   +1  track     +2  sector (writing resets the cursor)
///   +3  read: status bit0 busy, bit1 done, bit2 error; write: bit0 IRQ enable
///   +4  buffer data window, auto-incrementing
class Disk : public Device {
 public:
  enum class Command : std::uint8_t { None = 0, Seek = 1, Read = 2, Write = 3, ResetCursor = 4 };
  static constexpr unsigned kPorts = 5;
  static constexpr Word kBusy = 1, kDone = 2, kError = 4;

  Disk(unsigned iobase, unsigned irq, DiskImage& image);

  Word read(unsigned offset, Cycle now) override;
  void write(unsigned offset, Word value, Cycle now) override;
  void tick(Cycle now) override;

  bool busy() const { return op_ != Command::None; }
  Word status() const;
  Cycle completion() const { return completion_; }
  std::uint32_t head_track() const { return head_; }
  std::uint32_t angle(Cycle now) const { return static_cast<std::uint32_t>(now % image_->geometry().rotation()); }
  const std::array<Word, kBlockWords>& buffer() const { return buffer_; }
  std::uint64_t blocks_written() const { return blocks_written_; }
  std::uint64_t blocks_read() const { return blocks_read_; }
  DiskImage& image() { return *image_; }

  /// Schedules a command as if written to the command port; returns the
  /// completion cycle. Exposed for timing tests.
  Cycle schedule(Command cmd, std::uint32_t track, std::uint32_t sector, Cycle now) const;

 private:
  void issue(Word cmd, Cycle now);
  void finish(Cycle now);

  DiskImage* image_;
  std::uint32_t head_ = 0;
  Word track_reg_ = 0;
  Word sector_reg_ = 0;
  Command op_ = Command::None;
  std::uint32_t op_track_ = 0;
  std::uint32_t op_sector_ = 0;
  Cycle completion_ = 0;
  bool done_ = false;
  bool error_ = false;
  bool irq_enabled_ = false;
  std::array<Word, kBlockWords> buffer_{};
  std::array<Word, kBlockWords> latch_{};
  std::size_t cursor_ = 0;
  std::uint64_t blocks_written_ = 0;
  std::uint64_t blocks_read_ = 0;
};

/// Routes port accesses to devices; unknown ports read 0 and ignore writes.
class IoBus : public IoHandler {
 public:
  explicit IoBus(const Cycle* clock, EventLog* log = nullptr) : clock_(clock), log_(log) {}

  /// Throws SimFault if the device's window overlaps another or leaves 0-255.
  void attach(Device& d);

  Word io_read(unsigned port) override;
  void io_write(unsigned port, Word value) override;

  Device* device_at(unsigned port) const { return port < kPortCount ? map_[port] : nullptr; }
  const std::vector<Device*>& devices() const { return devices_; }
  std::uint64_t unknown_accesses() const { return unknown_; }

 private:
  const Cycle* clock_;
  EventLog* log_;
  std::array<Device*, kPortCount> map_{};
  std::vector<Device*> devices_;
  std::uint64_t unknown_ = 0;
};

}  // namespace clown
