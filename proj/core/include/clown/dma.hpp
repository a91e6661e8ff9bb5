#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "clown/devices.hpp"
#include "clown/memory.hpp"
#include "clown/ucvm.hpp"

namespace clown {

/// Internal uCVM ports of the DMA mailbox. Ports from 0x10 up reach the
/// system I/O bus.
namespace dma_port {
inline constexpr unsigned Command = 0x00;   // in: disk command for the direction (2 READ, 3 WRITE)
inline constexpr unsigned Address = 0x01;   // in: next memory address (post-increment)
inline constexpr unsigned Track = 0x02;     // in
inline constexpr unsigned Sector = 0x03;    // in
inline constexpr unsigned Complete = 0x04;  // out: transfer done, raise IRQ
inline constexpr unsigned Count = 0x05;     // in: 1 on the last of 128 words, else 0
inline constexpr unsigned Direction = 0x06; // in
inline constexpr unsigned FirstSystem = 0x10;
}  // namespace dma_port

/// Shipped firmware moving one block between the disk at `disk_iobase` and
/// memory, in either direction.
std::vector<Word> default_firmware(unsigned disk_iobase);

/// DMA controller: host-visible mailbox plus the uCVM running its firmware.
///
///   +0 direction (0 disk->memory, 1 memory->disk)   +1 memory address
///   +2 track   +3 sector   +4 command (1 = go)
///   +5 read: status bit0 busy, bit1 done, bit2 error; write: bit0 IRQ enable
class DmaController : public Device, private ucvm::Host {
 public:
  static constexpr unsigned kPorts = 6;
  static constexpr Word kBusy = 1, kDone = 2, kError = 4;

  /// `disk` is the drive the firmware programs; a start waits until it is idle.
  DmaController(unsigned iobase, unsigned irq, MemorySystem& mem, IoBus& bus, const Disk* disk);

  void load_firmware(std::span<const Word> program) { vm_.load(program); }

  Word read(unsigned offset, Cycle now) override;
  void write(unsigned offset, Word value, Cycle now) override;

  /// One uCVM step with this cycle's bus grant.
  ucvm::StepResult step(bool bus_grant, Cycle now);

  bool busy() const { return busy_; }
  Word status() const { return (busy_ ? kBusy : 0) | (done_ ? kDone : 0) | (error_ ? kError : 0); }
  const ucvm::Vm& vm() const { return vm_; }
  std::uint64_t transfers() const { return transfers_; }

 private:
  Word port_in(unsigned port) override;
  void port_out(unsigned port, Word value) override;
  Word mem_read(Address a) override;
  void mem_write(Address a, Word value) override;

  MemorySystem* mem_;
  IoBus* bus_;
  const Disk* disk_;
  ucvm::Vm vm_;
  Cycle now_ = 0;

  Word direction_ = 0;
  Word mem_addr_ = 0;
  Word track_ = 0;
  Word sector_ = 0;
  bool busy_ = false;
  bool done_ = false;
  bool error_ = false;
  bool irq_enabled_ = false;
  bool start_pending_ = false;
  Word addr_counter_ = 0;
  Word remaining_ = 0;
  std::uint64_t transfers_ = 0;
};

}  // namespace clown
