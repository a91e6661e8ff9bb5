#pragma once

#include <cstddef>
#include <cstdint>

namespace clown {

/// The machine's only data type: a signed 32-bit word. It is also the unit
/// of addressing; there is no byte addressing anywhere in the system.
using Word = std::int32_t;
using UWord = std::uint32_t;

/// Physical or linear word address.
using Address = std::uint32_t;

/// Simulated time, in machine cycles.
using Cycle = std::uint64_t;

/// One page, one disk block and one DMA transfer are all this many words.
inline constexpr std::size_t kBlockWords = 128;

inline constexpr std::size_t kGprCount = 16;
inline constexpr std::size_t kSegmentCount = 8;
inline constexpr std::size_t kIrqChannels = 16;
inline constexpr std::size_t kVectorCount = 32;
inline constexpr std::size_t kPortCount = 256;

inline constexpr std::size_t kDefaultMemoryWords = std::size_t{1} << 20;

// Register conventions.
inline constexpr unsigned kStackPointer = 13;
inline constexpr unsigned kPageTableBase = 14;
inline constexpr unsigned kFaultAddress = 15;

// Exception vectors; IRQ channel n is vector 16 + n.
enum class Vector : std::uint8_t {
  InvalidOpcode = 0,
  DivideByZero = 1,
  SegmentViolation = 2,
  PageFault = 3,
  PrivilegeViolation = 4,
};
inline constexpr unsigned kFirstIrqVector = 16;

constexpr unsigned irq_vector(unsigned channel) { return kFirstIrqVector + channel; }

}  // namespace clown
