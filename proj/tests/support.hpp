#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "clown/assembler.hpp"
#include "clown/system.hpp"

namespace clown::test {

std::filesystem::path corpus_dir();
std::filesystem::path docs_dir();

/// Preprocessor options that serve "config.h" from emit_config_header(cfg)
/// and everything else from the corpus directory.
PreprocessOptions config_options(const SystemConfig& cfg = {});

ObjectModule assemble_text(std::string_view src, const SystemConfig& cfg = {});
std::vector<Word> assemble_bin(std::string_view src, Address base, const SystemConfig& cfg = {});
ObjectModule assemble_corpus(const std::string& file, const SystemConfig& cfg = {});

/// Non-blank lines that are not comment-only.
std::size_t nloc(const std::filesystem::path& file);

/// A machine with `src` assembled and loaded at `base`, pc at the entry
/// (or at `base` without one) and the stack pointer at 0x8000.
std::unique_ptr<System> boot(std::string_view src, Address base = 0x100, SystemConfig cfg = {}, DiskImage disk = DiskImage());

/// Loads a corpus program the same way.
std::unique_ptr<System> boot_corpus(const std::string& file, Address base = 0x100, SystemConfig cfg = {},
                                    DiskImage disk = DiskImage());

/// Legal random operands for one roster entry: register, segment, port and
/// vector fields are drawn only where its operand shape uses them.
isa::Instruction random_instruction(const isa::OpcodeInfo& e, std::mt19937_64& rng);

/// Ticks until the CPU stops or `limit` cycles pass; returns the summary.
RunSummary run_for(System& sys, Cycle limit);

}  // namespace clown::test
