// clown: load images into the simulated machine and run it, with the host
// terminal bound to the simulated one.

#include <poll.h>
#include <termios.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cli_util.hpp"
#include "clown/disasm.hpp"
#include "clown/exe.hpp"
#include "clown/system.hpp"
#include "clown/words_io.hpp"

using namespace clown;

namespace {

constexpr int kDetachKey = 0x1D;  // Ctrl-]

// Raw, non-echoing host terminal for the lifetime of the object.
class RawTerminal {
 public:
  RawTerminal() {
    if (tcgetattr(STDIN_FILENO, &saved_) != 0) return;
    termios raw = saved_;
    raw.c_lflag &= static_cast<tcflag_t>(~(ICANON | ECHO | ISIG));
    raw.c_iflag &= static_cast<tcflag_t>(~(IXON | ICRNL));
    raw.c_cc[VMIN] = 1;
    raw.c_cc[VTIME] = 0;
    active_ = tcsetattr(STDIN_FILENO, TCSANOW, &raw) == 0;
  }
  ~RawTerminal() {
    if (active_) tcsetattr(STDIN_FILENO, TCSANOW, &saved_);
  }
  RawTerminal(const RawTerminal&) = delete;
  RawTerminal& operator=(const RawTerminal&) = delete;

 private:
  termios saved_{};
  bool active_ = false;
};

// Feeds host keystrokes into the machine until told to stop.
class Console {
 public:
  explicit Console(System& sys) : sys_(sys), reader_([this] { loop(); }) {}
  ~Console() {
    done_ = true;
    reader_.join();
  }
  Console(const Console&) = delete;
  Console& operator=(const Console&) = delete;

 private:
  void loop() {
    while (!done_) {
      pollfd p{STDIN_FILENO, POLLIN, 0};
      if (poll(&p, 1, 50) <= 0) continue;
      unsigned char c;
      if (read(STDIN_FILENO, &c, 1) != 1) return;
      if (c == kDetachKey) {
        sys_.cancel();
        return;
      }
      sys_.post_key(c);
    }
  }

  System& sys_;
  std::atomic<bool> done_{false};
  std::thread reader_;
};

struct LoadSpec {
  std::string file;
  std::optional<Address> base;
};

LoadSpec parse_load(const std::string& arg) {
  const auto at = arg.rfind('@');
  if (at == std::string::npos) return {arg, std::nullopt};
  std::string hex = arg.substr(at + 1);
  if (hex.rfind("0x", 0) != 0 && hex.rfind("0X", 0) != 0) hex = "0x" + hex;
  return {arg.substr(0, at), cli::number(hex, "load base")};
}

// Accepts "--trace,mmu,bus" as well as "--trace=mmu,bus".
std::vector<std::string> normalize_args(int argc, char** argv) {
  std::vector<std::string> out;
  for (int i = argc - 1; i >= 1; --i) {
    std::string a = argv[i];
    if (a.rfind("--trace,", 0) == 0) a = "--trace=cpu" + a.substr(7);
    out.push_back(a);
  }
  return out;  // CLI11 wants them reversed
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clown - cycle-level simulator of the Clown machine"};
  SystemConfig cfg;
  std::string mem_text, disk_path, pc_text, script_path, emit_config, max_text, firmware_path;
  std::vector<std::string> loads;
  std::string trace;
  bool strict = false, cache_stats = false, no_cache = false, no_console = false, trace_mmu = false;

  app.add_option("--mem", mem_text, "memory size in words");
  app.add_option("--disk", disk_path, "disk image (written back on exit)");
  app.add_option("--dma-firmware", firmware_path, "raw word file replacing the built-in DMA firmware");
  app.add_option("--load", loads, "bin or exe image, optionally file@hexbase (repeatable)")->allow_extra_args(false);
  app.add_option("--pc", pc_text, "initial program counter");
  app.add_flag("--strict-bus", strict, "grant DMA only after non-memory, non-I/O instructions");
  app.add_flag("--no-cache", no_cache, "disable the data cache");
  app.add_option("--throttle", cfg.throttle_mips, "target simulated MIPS (0 = unlimited)")->check(CLI::NonNegativeNumber);
  app.add_option("--max-cycles", max_text, "stop after N cycles");
  app.add_option("--trace", trace, "per-cycle trace to stderr; extra channels: mmu, bus")
      ->expected(0, 1)
      ->default_str("cpu");
  app.add_flag("--trace-mmu", trace_mmu, "trace address translations");
  app.add_option("--script", script_path, "keystroke script: 'cycle key' lines");
  app.add_flag("--cache-stats", cache_stats, "print cache, bus and TLB statistics");
  app.add_option("--emit-config", emit_config, "write the device map as a C header");
  app.add_flag("--no-console", no_console, "do not read keystrokes from the host terminal");
  auto dev = [&](const char* name, DeviceMap& m) {
    app.add_option(fmt::format("--{}-iobase", name), m.iobase, fmt::format("{} I/O base port", name));
    app.add_option(fmt::format("--{}-irq", name), m.irq, fmt::format("{} IRQ channel", name));
  };
  dev("timer", cfg.timer);
  dev("tty", cfg.terminal);
  dev("disk", cfg.disk);
  dev("dma", cfg.dma);

  try {
    app.parse(normalize_args(argc, argv));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  return cli::guarded("clown", [&] {
    bool trace_cpu = false, trace_bus = false;
    if (app.count("--trace") > 0) {
      trace_cpu = true;
      std::istringstream channels(trace);
      for (std::string t; std::getline(channels, t, ',');) {
        if (t == "mmu") trace_mmu = true;
        else if (t == "bus") trace_bus = true;
        else if (t != "cpu" && !t.empty()) throw Error(fmt::format("unknown trace channel '{}'", t));
      }
    }
    if (!mem_text.empty()) cfg.mem_words = cli::number(mem_text, "memory size");
    cfg.bus_mode = strict ? BusMode::StrictLiteral : BusMode::CacheAware;
    cfg.cache_enabled = !no_cache;
    cfg.validate();

    if (!emit_config.empty()) {
      std::ofstream out(emit_config);
      if (!out) throw Error(fmt::format("cannot write {}", emit_config));
      out << emit_config_header(cfg);
      if (loads.empty()) return 0;
    }
    if (loads.empty()) throw Error("nothing to run (use --load)");

    DiskImage image;
    if (!disk_path.empty()) {
      if (std::filesystem::exists(disk_path)) image = DiskImage::load(disk_path);
      cfg.geometry = image.geometry();
    }
    System sys(cfg, std::move(image));
    if (!firmware_path.empty()) sys.dma().load_firmware(read_words(firmware_path));

    std::optional<Address> entry;
    for (const auto& l : loads) {
      const LoadSpec spec = parse_load(l);
      const auto words = read_words(spec.file);
      if (is_exe(words)) {
        const ObjectModule m = read_exe_words(words);
        if (auto e = sys.load_module(m, spec.base.value_or(0), spec.file)) entry = e;
      } else {
        sys.load_words(words, spec.base.value_or(0), spec.file);
      }
    }
    Word pc = static_cast<Word>(entry.value_or(sys.loaded().front().begin));
    if (!pc_text.empty()) pc = static_cast<Word>(cli::number(pc_text, "pc"));
    sys.cpu().state().pc = pc;

    if (!script_path.empty()) sys.set_script(InputScript::load(script_path));

    sys.terminal().set_output([](Word w) {
      std::putchar(static_cast<unsigned char>(w & 0xFF));
      std::fflush(stdout);
    });
    if (trace_cpu || trace_bus) {
      sys.set_trace([&sys, trace_cpu, trace_bus](const TraceRecord& r) {
        std::string line = trace_cpu ? format_trace(r) : fmt::format("{:>10}", r.cycle);
        if (trace_bus) {
          const auto& b = sys.memory().bus();
          line += fmt::format("  bus cpu={} dma={} grant={}", b.cpu_used_bus() ? 1 : 0, b.dma_used_bus() ? 1 : 0,
                              b.granted() ? 1 : 0);
        }
        fmt::print(stderr, "{}\n", line);
      });
    }
    if (trace_mmu) {
      sys.mmu().set_trace([&sys](const MmuEvent& e) {
        static constexpr const char* kAccess[] = {"read", "write", "fetch"};
        static constexpr const char* kFault[] = {"ok", "segment-violation", "page-fault"};
        fmt::print(stderr, "{:>10}  mmu %s{}:{:08X} {} linear {:08X} -> {:08X} {}{}\n", sys.cycle(), e.segment,
                   static_cast<UWord>(e.offset), kAccess[static_cast<int>(e.access)], e.linear, e.result.physical,
                   kFault[static_cast<int>(e.result.fault)], e.tlb_hit ? " tlb" : "");
      });
    }

    RunLimits limits;
    if (!max_text.empty()) limits.max_cycles = cli::number(max_text, "max cycles");

    RunSummary sum;
    {
      const bool interactive = !no_console && script_path.empty() && isatty(STDIN_FILENO);
      std::optional<RawTerminal> raw;
      std::optional<Console> console;
      if (interactive) {
        raw.emplace();
        console.emplace(sys);
      }
      sum = sys.run(limits);
    }

    fmt::print(stderr, "\n[clown] {} after {} cycles, {} instructions, {:.2f} MIPS\n", stop_reason_name(sum.reason),
               sum.cycles, sum.instructions, sum.mips());
    if (cache_stats) {
      const auto& c = sys.memory().stats();
      const auto& b = sys.memory().bus().stats();
      const auto& t = sys.mmu().stats();
      const auto total = c.hits + c.misses;
      fmt::print(stderr, "[clown] cache hits {} misses {} writebacks {} hit-rate {:.4f}\n", c.hits, c.misses,
                 c.writebacks, total ? static_cast<double>(c.hits) / static_cast<double>(total) : 0.0);
      fmt::print(stderr, "[clown] bus cycles {} cpu {} dma {} denied {} conflicts {}\n", b.cycles, b.cpu_cycles,
                 b.dma_cycles, b.dma_denied, b.conflicts);
      fmt::print(stderr, "[clown] tlb hits {} walks {}\n", t.tlb_hits, t.walks);
    }
    fmt::print(stderr, "[clown] event-log hash {:016X}\n", sys.events().hash());
    if (!disk_path.empty()) {
      sys.memory().flush();
      sys.disk_image().save(disk_path);
    }
    return 0;
  });
}
