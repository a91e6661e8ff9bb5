#include "clown/dma.hpp"

namespace clown {

using ucvm::Opcode;
using ucvm::word;

std::vector<Word> default_firmware(unsigned disk_iobase) {
  const UWord d = disk_iobase;
  const UWord cmd = d + 0, track = d + 1, sector = d + 2, status = d + 3, data = d + 4;
  constexpr UWord kWriteLoop = 22, kPoll = 9, kReadLoop = 13;
  return {
      word(Opcode::In, 1, 0, dma_port::Track),      //  0
      word(Opcode::Out, 1, 0, track),               //  1
      word(Opcode::In, 1, 0, dma_port::Sector),     //  2
      word(Opcode::Out, 1, 0, sector),              //  3  also rewinds the disk buffer
      word(Opcode::In, 0, 0, dma_port::Command),    //  4  r0 = 2 or 3
      word(Opcode::Cmpi, 0), 3,                     //  5
      word(Opcode::Jeq, 0, 0, kWriteLoop),          //  7
      // disk -> memory
      word(Opcode::Out, 0, 0, cmd),                 //  8  READ
      word(Opcode::In, 4, 0, status),               //  9  poll while busy
      word(Opcode::Cmpi, 4), Disk::kBusy,           // 10
      word(Opcode::Jeq, 0, 0, kPoll),               // 12
      word(Opcode::In, 4, 0, data),                 // 13
      word(Opcode::In, 2, 0, dma_port::Address),    // 14
      word(Opcode::St, 2, 4),                       // 15
      word(Opcode::In, 3, 0, dma_port::Count),      // 16
      word(Opcode::Cmpi, 3), 0,                     // 17
      word(Opcode::Jeq, 0, 0, kReadLoop),           // 19
      word(Opcode::Out, 0, 0, dma_port::Complete),  // 20  after the disk read finished
      word(Opcode::End),                            // 21
      // memory -> disk
      word(Opcode::In, 2, 0, dma_port::Address),    // 22
      word(Opcode::Ld, 2, 4),                       // 23
      word(Opcode::Out, 4, 0, data),                // 24
      word(Opcode::In, 3, 0, dma_port::Count),      // 25
      word(Opcode::Cmpi, 3), 0,                     // 26
      word(Opcode::Jeq, 0, 0, kWriteLoop),          // 28
      word(Opcode::Out, 0, 0, cmd),                 // 29  WRITE
      word(Opcode::Out, 0, 0, dma_port::Complete),  // 30  before the disk write finishes
      word(Opcode::End),                            // 31
  };
}

DmaController::DmaController(unsigned iobase, unsigned irq, MemorySystem& mem, IoBus& bus, const Disk* disk)
    : Device("dma", iobase, irq, kPorts), mem_(&mem), bus_(&bus), disk_(disk) {
  vm_.load(default_firmware(disk ? disk->iobase() : 0x30));
}

Word DmaController::read(unsigned offset, Cycle) {
  switch (offset) {
    case 0: return direction_;
    case 1: return mem_addr_;
    case 2: return track_;
    case 3: return sector_;
    case 4: return 0;
    case 5: return status();
    default: return 0;
  }
}

void DmaController::write(unsigned offset, Word value, Cycle now) {
  switch (offset) {
    case 0: direction_ = value & 1; break;
    case 1: mem_addr_ = value; break;
    case 2: track_ = value; break;
    case 3: sector_ = value; break;
    case 4:
      if (value != 1) break;
      if (busy_) {
        error_ = true;
        break;
      }
      busy_ = true;
      done_ = false;
      error_ = false;
      start_pending_ = true;
      addr_counter_ = mem_addr_;
      remaining_ = static_cast<Word>(kBlockWords);
      log(now, EventKind::DmaStart, direction_, mem_addr_);
      break;
    case 5: irq_enabled_ = (value & 1) != 0; break;
    default: break;
  }
}

ucvm::StepResult DmaController::step(bool bus_grant, Cycle now) {
  now_ = now;
  if (start_pending_ && !vm_.state().running && !(disk_ && disk_->busy())) {
    start_pending_ = false;
    vm_.start();
  }
  const auto r = vm_.step(*this, bus_grant);
  if (r == ucvm::StepResult::Fault) {
    busy_ = false;
    error_ = true;
    log(now, EventKind::DmaFault, static_cast<Word>(vm_.state().pc));
    if (irq_enabled_) interrupt(now);
  }
  return r;
}

Word DmaController::port_in(unsigned port) {
  if (port >= dma_port::FirstSystem) {
    mem_->bus().note_dma();
    return bus_->io_read(port);
  }
  switch (port) {
    case dma_port::Command: return direction_ == 0 ? 2 : 3;
    case dma_port::Address: return addr_counter_++;
    case dma_port::Track: return track_;
    case dma_port::Sector: return sector_;
    case dma_port::Count: return --remaining_ <= 0 ? 1 : 0;
    case dma_port::Direction: return direction_;
    default: return 0;
  }
}

void DmaController::port_out(unsigned port, Word value) {
  if (port >= dma_port::FirstSystem) {
    mem_->bus().note_dma();
    bus_->io_write(port, value);
    return;
  }
  if (port == dma_port::Complete) {
    busy_ = false;
    done_ = true;
    ++transfers_;
    log(now_, EventKind::DmaComplete, direction_);
    if (irq_enabled_) interrupt(now_);
  }
}

Word DmaController::mem_read(Address a) { return mem_->dma_read(a); }

void DmaController::mem_write(Address a, Word value) { mem_->dma_write(a, value); }

}  // namespace clown
