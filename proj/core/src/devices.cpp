#include "clown/devices.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "clown/error.hpp"

namespace clown {

std::string_view event_name(EventKind k) {
  switch (k) {
    case EventKind::IrqRaised: return "irq";
    case EventKind::Dispatch: return "dispatch";
    case EventKind::Exception: return "exception";
    case EventKind::TerminalTx: return "tty-tx";
    case EventKind::KeyInjected: return "key";
    case EventKind::TimerExpired: return "timer";
    case EventKind::DiskIssue: return "disk-issue";
    case EventKind::DiskComplete: return "disk-done";
    case EventKind::DiskError: return "disk-error";
    case EventKind::DmaStart: return "dma-start";
    case EventKind::DmaComplete: return "dma-done";
    case EventKind::DmaFault: return "dma-fault";
    case EventKind::UnknownPort: return "unknown-port";
    case EventKind::Stop: return "stop";
  }
  return "?";
}

Device::Device(std::string name, unsigned iobase, unsigned irq, unsigned port_count)
    : name_(std::move(name)), iobase_(iobase), irq_(irq), port_count_(port_count) {
  if (irq >= kIrqChannels) throw SimFault(fmt::format("{}: IRQ channel {} out of range", name_, irq));
}

void Device::interrupt(Cycle now) {
  log(now, EventKind::IrqRaised, static_cast<Word>(irq_));
  if (sink_) sink_->raise_irq(irq_);
}

// ---- Timer ----

Word Timer::read(unsigned offset, Cycle) {
  switch (offset) {
    case 0: return static_cast<Word>(phase_);
    case 1: return mode_;
    case 2: return counter_;
    default: return 0;
  }
}

void Timer::write(unsigned offset, Word value, Cycle now) {
  switch (offset) {
    case 0:
      if (phase_ == Phase::Reset) {
        if (value > 0) {
          counter_ = reload_ = value;
          armed_at_ = now;
          phase_ = Phase::Armed;
        }
      } else if (value == 1) {
        phase_ = Phase::Reset;
        counter_ = 0;
      }
      break;
    case 1: mode_ = value & (kModeInterval | kModeMasked); break;
    default: break;
  }
}

void Timer::tick(Cycle now) {
  // The arming cycle itself does not count, so expiry lands N cycles later.
  if (phase_ != Phase::Armed || now <= armed_at_) return;
  if (--counter_ > 0) return;
  ++expirations_;
  log(now, EventKind::TimerExpired, reload_);
  if (!(mode_ & kModeMasked)) interrupt(now);
  if (mode_ & kModeInterval) {
    counter_ = reload_;
  } else {
    phase_ = Phase::Idle;
  }
}

// ---- Terminal ----

Word Terminal::read(unsigned offset, Cycle) {
  switch (offset) {
    case 0: {
      if (rx_.empty()) return 0;
      const Word k = rx_.front();
      rx_.pop_front();
      return k;
    }
    case 1: {
      const Word s = (rx_.empty() ? 0 : 1) | (overflow_ ? 2 : 0);
      overflow_ = false;
      return s;
    }
    case 2: return control_;
    default: return 0;
  }
}

void Terminal::write(unsigned offset, Word value, Cycle now) {
  switch (offset) {
    case 0:
      tx_.push_back(value);
      log(now, EventKind::TerminalTx, value);
      if (output_) output_(value);
      break;
    case 2: control_ = value & 1; break;
    default: break;
  }
}

void Terminal::inject_key(Word key, Cycle now) {
  if (rx_.size() >= kQueueCap) {
    rx_.pop_front();
    overflow_ = true;
  }
  rx_.push_back(key);
  log(now, EventKind::KeyInjected, key);
  if (irq_enabled()) interrupt(now);
}

std::string Terminal::tx_text() const {
  std::string s;
  s.reserve(tx_.size());
  for (Word w : tx_) s.push_back(static_cast<char>(w & 0xFF));
  return s;
}

// ---- Disk ----

Cycle seek_time(const DiskGeometry& g, std::uint32_t distance) {
  if (distance == 0) return 0;
  if (g.tracks <= 2) return g.t2t;
  const std::uint64_t span = g.max_seek - g.t2t;
  const std::uint64_t den = g.tracks - 2;
  // Round half up: (2·span·(d-1) + den) / (2·den).
  return g.t2t + (2 * span * (distance - 1) + den) / (2 * den);
}

Cycle rotational_wait(const DiskGeometry& g, Cycle at, std::uint32_t sector) {
  const Cycle r = g.rotation();
  const Cycle start = Cycle{sector} * (g.sector_time + g.gap);
  return (start + r - at % r) % r;
}

Disk::Disk(unsigned iobase, unsigned irq, DiskImage& image) : Device("disk", iobase, irq, kPorts), image_(&image) {}

Word Disk::status() const { return (busy() ? kBusy : 0) | (done_ ? kDone : 0) | (error_ ? kError : 0); }

Word Disk::read(unsigned offset, Cycle) {
  switch (offset) {
    case 0: return static_cast<Word>(op_);
    case 1: return track_reg_;
    case 2: return sector_reg_;
    case 3: return status();
    case 4: {
      const Word w = buffer_[cursor_];
      cursor_ = (cursor_ + 1) % kBlockWords;
      return w;
    }
    default: return 0;
  }
}

void Disk::write(unsigned offset, Word value, Cycle now) {
  switch (offset) {
    case 0: issue(value, now); break;
    case 1: track_reg_ = value; break;
    case 2:
      sector_reg_ = value;
      cursor_ = 0;
      break;
    case 3: irq_enabled_ = (value & 1) != 0; break;
    case 4:
      buffer_[cursor_] = value;
      cursor_ = (cursor_ + 1) % kBlockWords;
      break;
    default: break;
  }
}

Cycle Disk::schedule(Command cmd, std::uint32_t track, std::uint32_t sector, Cycle now) const {
  const auto& g = image_->geometry();
  const std::uint32_t distance = track > head_ ? track - head_ : head_ - track;
  const Cycle arrive = now + seek_time(g, distance);
  if (cmd == Command::Seek) return arrive;
  return arrive + rotational_wait(g, arrive, sector) + g.sector_time;
}

void Disk::issue(Word cmd, Cycle now) {
  if (cmd == static_cast<Word>(Command::ResetCursor)) {
    cursor_ = 0;
    return;
  }
  const auto& g = image_->geometry();
  const bool known = cmd >= 1 && cmd <= 3;
  const bool in_range = track_reg_ >= 0 && static_cast<UWord>(track_reg_) < g.tracks &&
                        (cmd == static_cast<Word>(Command::Seek) ||
                         (sector_reg_ >= 0 && static_cast<UWord>(sector_reg_) < g.sectors));
  if (busy() || !known || !in_range) {
    // A rejected request never disturbs the one in flight.
    error_ = true;
    log(now, EventKind::DiskError, cmd);
    return;
  }
  op_ = static_cast<Command>(cmd);
  op_track_ = static_cast<std::uint32_t>(track_reg_);
  op_sector_ = static_cast<std::uint32_t>(sector_reg_);
  done_ = false;
  error_ = false;
  if (op_ == Command::Write) latch_ = buffer_;
  completion_ = schedule(op_, op_track_, op_sector_, now);
  log(now, EventKind::DiskIssue, cmd, static_cast<Word>(completion_));
  if (completion_ <= now) finish(now);
}

void Disk::tick(Cycle now) {
  if (busy() && now >= completion_) finish(now);
}

void Disk::finish(Cycle now) {
  head_ = op_track_;
  const auto& g = image_->geometry();
  if (op_ == Command::Read) {
    const auto blk = image_->block(op_track_, op_sector_);
    std::copy(blk.begin(), blk.end(), buffer_.begin());
    cursor_ = 0;
    ++blocks_read_;
  } else if (op_ == Command::Write) {
    auto blk = image_->block(op_track_, op_sector_);
    std::copy(latch_.begin(), latch_.end(), blk.begin());
    ++blocks_written_;
  }
  const Word cmd = static_cast<Word>(op_);
  op_ = Command::None;
  done_ = true;
  log(now, EventKind::DiskComplete, cmd, static_cast<Word>(op_track_ * g.sectors + op_sector_));
  if (irq_enabled_) interrupt(now);
}

// ---- IoBus ----

void IoBus::attach(Device& d) {
  if (d.iobase() + d.port_count() > kPortCount)
    throw SimFault(fmt::format("{}: ports 0x{:X}-0x{:X} exceed the 256-port space", d.name(), d.iobase(),
                               d.iobase() + d.port_count() - 1));
  for (unsigned p = d.iobase(); p < d.iobase() + d.port_count(); ++p) {
    if (map_[p])
      throw SimFault(fmt::format("{} at 0x{:X} overlaps {} at port 0x{:X}", d.name(), d.iobase(), map_[p]->name(), p));
  }
  for (unsigned p = d.iobase(); p < d.iobase() + d.port_count(); ++p) map_[p] = &d;
  devices_.push_back(&d);
}

Word IoBus::io_read(unsigned port) {
  if (Device* d = device_at(port)) return d->read(port - d->iobase(), *clock_);
  ++unknown_;
  if (log_) log_->record(*clock_, EventKind::UnknownPort, static_cast<Word>(port), 0);
  return 0;
}

void IoBus::io_write(unsigned port, Word value) {
  if (Device* d = device_at(port)) {
    d->write(port - d->iobase(), value, *clock_);
    return;
  }
  ++unknown_;
  if (log_) log_->record(*clock_, EventKind::UnknownPort, static_cast<Word>(port), 1);
}

}  // namespace clown
