#include "clown/system.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "clown/disasm.hpp"
#include "clown/error.hpp"
#include "clown/expr.hpp"
#include "clown/link.hpp"

namespace clown {

void SystemConfig::validate() const {
  struct Window {
    const char* name;
    DeviceMap map;
    unsigned ports;
  };
  const Window w[] = {{"timer", timer, Timer::kPorts},
                      {"terminal", terminal, Terminal::kPorts},
                      {"disk", disk, Disk::kPorts},
                      {"dma", dma, DmaController::kPorts}};
  for (std::size_t i = 0; i < std::size(w); ++i) {
    if (w[i].map.iobase + w[i].ports > kPortCount)
      throw Error(fmt::format("{} window 0x{:X}+{} exceeds the port space", w[i].name, w[i].map.iobase, w[i].ports));
    if (w[i].map.irq >= kIrqChannels) throw Error(fmt::format("{} IRQ {} out of range", w[i].name, w[i].map.irq));
    for (std::size_t j = 0; j < i; ++j) {
      const bool disjoint = w[i].map.iobase + w[i].ports <= w[j].map.iobase ||
                            w[j].map.iobase + w[j].ports <= w[i].map.iobase;
      if (!disjoint)
        throw Error(fmt::format("{} window 0x{:X} overlaps {} window 0x{:X}", w[i].name, w[i].map.iobase, w[j].name,
                                w[j].map.iobase));
    }
  }
  if (!(throttle_mips >= 0)) throw Error("throttle must be >= 0");
  if (mem_words == 0 || mem_words > (std::size_t{1} << 30)) throw Error("memory size out of range");
  geometry.validate();
}

std::string emit_config_header(const SystemConfig& cfg) {
  std::string out = "/* device map of the simulated machine */\n";
  auto dev = [&](const char* name, const DeviceMap& m) {
    out += fmt::format("#define IOBASE_{} 0x{:02X}\n", name, m.iobase);
    out += fmt::format("#define IRQ_{} {}\n", name, m.irq);
    out += fmt::format("#define VEC_{} {}\n", name, irq_vector(m.irq));
  };
  dev("TIMER", cfg.timer);
  dev("TTY", cfg.terminal);
  dev("DISK", cfg.disk);
  dev("DMA", cfg.dma);
  out += fmt::format("#define DISK_TRACKS {}\n", cfg.geometry.tracks);
  out += fmt::format("#define DISK_SECTORS {}\n", cfg.geometry.sectors);
  return out;
}

InputScript InputScript::parse(std::string_view text, const std::string& name) {
  InputScript s;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string c, k, extra;
    if (!(ls >> c)) continue;
    if (!(ls >> k) || (ls >> extra)) throw Error(fmt::format("{}:{}: expected 'cycle key'", name, n));
    const auto cyc = as::parse_number(c);
    std::optional<std::int64_t> key;
    if (k.size() == 3 && k.front() == '\'' && k.back() == '\'')
      key = static_cast<unsigned char>(k[1]);
    else
      key = as::parse_number(k);
    if (!cyc || !key) throw Error(fmt::format("{}:{}: malformed number", name, n));
    if (!s.entries.empty() && static_cast<Cycle>(*cyc) < s.entries.back().cycle)
      throw Error(fmt::format("{}:{}: cycles must not decrease", name, n));
    s.entries.push_back({static_cast<Cycle>(*cyc), static_cast<Word>(*key)});
  }
  return s;
}

InputScript InputScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open script {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string format_trace(const TraceRecord& r) {
  std::string text = r.idle ? "(idle)" : format_instruction(r.inst);
  std::string line = fmt::format("{:>10} {:08X}  {:<30} {}", r.cycle, static_cast<UWord>(r.pc), text,
                                 r.idle ? "-" : isa::bus_class_name(r.bus));
  if (r.exception >= 0) line += fmt::format(" exc={}", r.exception);
  if (r.dispatched >= 0) line += fmt::format(" int={}", r.dispatched);
  return line;
}

std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::Stopped: return "stop";
    case StopReason::MaxCycles: return "max-cycles";
    case StopReason::Breakpoint: return "breakpoint";
    case StopReason::HaltedForever: return "halted with interrupts disabled";
    case StopReason::Cancelled: return "cancelled";
  }
  return "?";
}

namespace {
const SystemConfig& checked(const SystemConfig& c) {
  c.validate();
  return c;
}
}  // namespace

System::System(const SystemConfig& cfg, DiskImage disk)
    : cfg_(checked(cfg)),
      mem_(cfg.mem_words, cfg.cache_enabled, cfg.bus_mode),
      mmu_(mem_),
      io_(&cycle_, &log_),
      cpu_(mem_, mmu_, &io_),
      image_(std::move(disk)),
      timer_(cfg.timer.iobase, cfg.timer.irq),
      terminal_(cfg.terminal.iobase, cfg.terminal.irq),
      disk_(cfg.disk.iobase, cfg.disk.irq, image_),
      dma_(cfg.dma.iobase, cfg.dma.irq, mem_, io_, &disk_) {
  cfg_.geometry = image_.geometry();  // the image is authoritative
  log_.set_keep(cfg.keep_events);
  for (Device* d : std::initializer_list<Device*>{&timer_, &terminal_, &disk_, &dma_}) {
    d->attach(this, &log_);
    io_.attach(*d);
  }
  dma_.load_firmware(default_firmware(cfg.disk.iobase));
}

void System::raise_irq(unsigned channel) { cpu_.raise_irq(channel); }

void System::set_script(InputScript script) {
  script_ = std::move(script);
  script_pos_ = 0;
  while (script_pos_ < script_.entries.size() && script_.entries[script_pos_].cycle < cycle_) ++script_pos_;
}

void System::post_key(Word key) {
  std::lock_guard lock(host_mu_);
  host_keys_.push_back(key);
  host_pending_.store(true, std::memory_order_release);
}

void System::inject_due() {
  while (script_pos_ < script_.entries.size() && script_.entries[script_pos_].cycle <= cycle_) {
    terminal_.inject_key(script_.entries[script_pos_++].key, cycle_);
  }
  if (host_pending_.load(std::memory_order_acquire)) {
    std::vector<Word> keys;
    {
      std::lock_guard lock(host_mu_);
      keys.swap(host_keys_);
      host_pending_.store(false, std::memory_order_relaxed);
    }
    for (Word k : keys) terminal_.inject_key(k, cycle_);
  }
}

const CycleReport& System::tick() {
  BusArbiter& bus = mem_.bus();
  bus.begin_cycle();
  const CycleReport& rep = cpu_.step();
  if (rep.exception >= 0) log_.record(cycle_, EventKind::Exception, rep.exception, rep.pc);

  const bool grant = bus.bus_free_for_dma(rep.bus);
  bus.set_grant(grant);
  dma_.step(grant, cycle_);

  timer_.tick(cycle_);
  terminal_.tick(cycle_);
  disk_.tick(cycle_);

  inject_due();

  cpu_.end_of_cycle();
  if (rep.dispatched >= 0) log_.record(cycle_, EventKind::Dispatch, rep.dispatched, cpu_.state().pc);
  bus.end_cycle();

  if (trace_) trace_({cycle_, rep.pc, rep.idle, rep.inst, rep.bus, rep.exception, rep.dispatched});
  ++cycle_;
  return rep;
}

void System::throttle(std::uint64_t instructions, std::chrono::steady_clock::time_point start) {
  const auto due = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                               std::chrono::duration<double>(static_cast<double>(instructions) /
                                                             (cfg_.throttle_mips * 1e6)));
  if (due > std::chrono::steady_clock::now()) std::this_thread::sleep_until(due);
}

RunSummary System::run(const RunLimits& limits) {
  using clock = std::chrono::steady_clock;
  RunSummary sum;
  const Cycle first = cycle_;
  const std::uint64_t first_inst = cpu_.stats().instructions;
  const auto start = clock::now();
  const bool throttled = cfg_.throttle_mips > 0;
  const Cycle limit = limits.max_cycles ? first + *limits.max_cycles : ~Cycle{0};
  constexpr Cycle kPoll = 4096;

  for (;;) {
    const CpuState& st = cpu_.state();
    if (st.stopped) {
      sum.reason = StopReason::Stopped;
      break;
    }
    if (cycle_ >= limit) {
      sum.reason = StopReason::MaxCycles;
      break;
    }
    if (limits.breakpoint && !st.halted && st.pc == *limits.breakpoint && cycle_ != first) {
      sum.reason = StopReason::Breakpoint;
      break;
    }
    if (st.halted && !st.interrupts_enabled() && cpu_.interrupts().pending == 0 && !dma_.busy() && !disk_.busy()) {
      sum.reason = StopReason::HaltedForever;
      break;
    }
    if ((cycle_ & (kPoll - 1)) == 0) {
      if (cancel_.load(std::memory_order_relaxed)) {
        cancel_.store(false, std::memory_order_relaxed);
        sum.reason = StopReason::Cancelled;
        break;
      }
      if (throttled) throttle(cpu_.stats().instructions - first_inst, start);
    }
    tick();
  }
  if (sum.reason == StopReason::Stopped || sum.reason == StopReason::HaltedForever)
    log_.record(cycle_, EventKind::Stop, static_cast<Word>(sum.reason));
  sum.cycles = cycle_ - first;
  sum.instructions = cpu_.stats().instructions - first_inst;
  sum.seconds = std::chrono::duration<double>(clock::now() - start).count();
  return sum;
}

void System::load_words(std::span<const Word> words, Address base, const std::string& name) {
  if (words.empty()) return;
  if (!mem_.ram().contains(base, words.size()))
    throw Error(fmt::format("{}: [0x{:X}, 0x{:X}) does not fit in {} words of memory", name, base,
                            static_cast<std::uint64_t>(base) + words.size(), mem_.size()));
  const Address end = base + static_cast<Address>(words.size());
  for (const auto& r : loaded_) {
    if (base < r.end && r.begin < end)
      throw Error(fmt::format("{} [0x{:X}, 0x{:X}) overlaps {} [0x{:X}, 0x{:X})", name, base, end, r.name, r.begin,
                              r.end));
  }
  for (std::size_t i = 0; i < words.size(); ++i) mem_.poke(base + static_cast<Address>(i), words[i]);
  loaded_.push_back({name, base, end});
}

std::optional<Address> System::load_module(const ObjectModule& m, Address base, const std::string& name,
                                           const std::map<std::string, Address>& overrides) {
  const Layout l = layout(m, base, overrides);
  const Image img = relocate(m, l);
  // Load per segment so gaps between overridden bases stay free.
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const Address b = l.bases[i];
    const auto n = m.segments[i].words.size();
    load_words(std::span<const Word>(img.words).subspan(b - img.base, n), b,
               fmt::format("{}:{}", name, m.segments[i].name));
  }
  return img.entry;
}

}  // namespace clown
