#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clown/error.hpp"
#include "clown/object.hpp"
#include "clown/preprocess.hpp"

namespace clown {

struct ListingLine {
  SourceLocation loc;
  std::string segment;
  std::uint32_t offset = 0;
  std::vector<Word> words;
  std::string text;
};

struct Assembly {
  ObjectModule module;
  std::vector<ListingLine> listing;
};

/// Two-pass assembly of already preprocessed text (which may carry
/// `#line` markers). Throws AsmError with the original location.
Assembly assemble_preprocessed(std::string_view text, const std::string& filename);

/// Preprocess + assemble.
Assembly assemble_source(std::string_view text, const std::string& filename, const PreprocessOptions& pp = {});
Assembly assemble_file(const std::filesystem::path& path, const PreprocessOptions& pp = {});

/// Convenience: the module only.
ObjectModule assemble(std::string_view text, const std::string& filename = "<input>",
                      const PreprocessOptions& pp = {});

/// Headerless image: segments placed from `base` (8-word aligned after the
/// first) with every relocation applied. With `entry_disp`, verifies that
/// the .entry label sits at base + entry_disp. Throws LinkError on
/// externals or an entry mismatch.
std::vector<Word> emit_bin(const ObjectModule& m, Address base = 0, std::optional<Address> entry_disp = {});

std::string format_listing(const Assembly& a);

/// Name of the local symbol marking the start of segment `name`; relocations
/// against labels refer to it with the label's offset as addend.
std::string section_symbol(const std::string& segment_name);

}  // namespace clown
