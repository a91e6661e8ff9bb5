#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "clown/types.hpp"

namespace clown {

enum class EventKind : std::uint8_t {
  IrqRaised,     // a = channel
  Dispatch,      // a = vector, b = new pc
  Exception,     // a = vector, b = faulting pc
  TerminalTx,    // a = word
  KeyInjected,   // a = key
  TimerExpired,  // a = reload value
  DiskIssue,     // a = command, b = completion cycle
  DiskComplete,  // a = command, b = track * sectors + sector
  DiskError,     // a = command
  DmaStart,      // a = direction, b = memory address
  DmaComplete,   // a = direction
  DmaFault,      // a = uCVM pc
  UnknownPort,   // a = port, b = 1 for writes
  Stop,
};

std::string_view event_name(EventKind k);

struct Event {
  Cycle cycle;
  EventKind kind;
  Word a;
  Word b;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Append-only record of observable machine events. The running FNV-1a hash
/// covers every event even when storage is disabled, so long runs can still
/// be compared for determinism.
class EventLog {
 public:
  void record(Cycle cycle, EventKind kind, Word a = 0, Word b = 0) {
    const Event e{cycle, kind, a, b};
    mix(cycle);
    mix(static_cast<std::uint64_t>(kind));
    mix(static_cast<UWord>(a));
    mix(static_cast<UWord>(b));
    if (keep_) events_.push_back(e);
    if (hook_) hook_(e);
  }

  std::uint64_t hash() const { return hash_; }
  const std::vector<Event>& events() const { return events_; }
  void set_keep(bool keep) { keep_ = keep; }
  void set_hook(std::function<void(const Event&)> hook) { hook_ = std::move(hook); }

  std::vector<Event> of_kind(EventKind k) const {
    std::vector<Event> out;
    for (const auto& e : events_)
      if (e.kind == k) out.push_back(e);
    return out;
  }

 private:
  void mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xFF;
      hash_ *= 0x100000001B3ull;
    }
  }

  std::uint64_t hash_ = 0xCBF29CE484222325ull;
  bool keep_ = true;
  std::vector<Event> events_;
  std::function<void(const Event&)> hook_;
};

}  // namespace clown
