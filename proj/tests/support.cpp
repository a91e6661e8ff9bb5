#include "support.hpp"

#include <fstream>
#include <sstream>

#include "clown/link.hpp"

namespace clown::test {

std::filesystem::path corpus_dir() { return CLOWN_CORPUS_DIR; }
std::filesystem::path docs_dir() { return CLOWN_DOCS_DIR; }

PreprocessOptions config_options(const SystemConfig& cfg) {
  PreprocessOptions pp;
  const std::string header = emit_config_header(cfg);
  pp.resolver = [header](const std::string& name, const std::string&) -> std::optional<std::string> {
    if (name == "config.h") return header;
    std::ifstream in(corpus_dir() / name);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return pp;
}

ObjectModule assemble_text(std::string_view src, const SystemConfig& cfg) {
  return assemble(src, "<test>", config_options(cfg));
}

std::vector<Word> assemble_bin(std::string_view src, Address base, const SystemConfig& cfg) {
  return emit_bin(assemble_text(src, cfg), base);
}

ObjectModule assemble_corpus(const std::string& file, const SystemConfig& cfg) {
  std::ifstream in(corpus_dir() / file);
  if (!in) throw Error("missing corpus file " + file);
  std::stringstream ss;
  ss << in.rdbuf();
  return assemble(ss.str(), file, config_options(cfg));
}

std::size_t nloc(const std::filesystem::path& file) {
  std::ifstream in(file);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == ';' || line.compare(first, 2, "//") == 0) continue;
    ++n;
  }
  return n;
}

namespace {
std::unique_ptr<System> boot_module(const ObjectModule& m, Address base, SystemConfig cfg, DiskImage disk) {
  cfg.keep_events = true;
  auto sys = std::make_unique<System>(cfg, std::move(disk));
  const auto entry = sys->load_module(m, base);
  sys->cpu().state().pc = static_cast<Word>(entry.value_or(base));
  sys->cpu().state().r[kStackPointer] = 0x8000;
  return sys;
}
}  // namespace

std::unique_ptr<System> boot(std::string_view src, Address base, SystemConfig cfg, DiskImage disk) {
  return boot_module(assemble_text(src, cfg), base, cfg, std::move(disk));
}

std::unique_ptr<System> boot_corpus(const std::string& file, Address base, SystemConfig cfg, DiskImage disk) {
  return boot_module(assemble_corpus(file, cfg), base, cfg, std::move(disk));
}

RunSummary run_for(System& sys, Cycle limit) {
  RunLimits l;
  l.max_cycles = limit;
  return sys.run(l);
}

isa::Instruction random_instruction(const isa::OpcodeInfo& e, std::mt19937_64& rng) {
  auto reg = [&] { return static_cast<unsigned>(rng() % 16); };
  auto seg = [&] { return static_cast<unsigned>(rng() % 8); };
  auto imm = [&] { return static_cast<Word>(static_cast<UWord>(rng())); };
  auto port = [&] { return static_cast<int>(rng() % 256); };
  unsigned rd = 0, rs = 0;
  int imm16 = 0;
  Word imm32 = 0;
  switch (e.shape) {
    case isa::Shape::None: break;
    case isa::Shape::Rd: rd = reg(); break;
    case isa::Shape::Rs: rs = reg(); break;
    case isa::Shape::RdRs: case isa::Shape::RdMemRs: case isa::Shape::MemRdRs: rd = reg(); rs = reg(); break;
    case isa::Shape::RdImm: case isa::Shape::RdMemImm: rd = reg(); imm32 = imm(); break;
    case isa::Shape::Imm: imm32 = imm(); break;
    case isa::Shape::MemImmRs: rs = reg(); imm32 = imm(); break;
    case isa::Shape::SegRs: rd = seg(); rs = reg(); break;
    case isa::Shape::RdSeg: rd = reg(); rs = seg(); break;
    case isa::Shape::SegImm: rd = seg(); imm32 = imm(); break;
    case isa::Shape::RdPort: rd = reg(); imm16 = port(); break;
    case isa::Shape::RsPort: rs = reg(); imm16 = port(); break;
    case isa::Shape::ImmPort: imm32 = imm(); imm16 = port(); break;
    case isa::Shape::Vec: imm16 = static_cast<int>(rng() % 32); break;
  }
  return isa::make(e.op, rd, rs, imm16, imm32);
}

}  // namespace clown::test
