#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clown {

/// Returns the contents of an included file, or nullopt if not found.
/// `from` is the including file's name.
using IncludeResolver = std::function<std::optional<std::string>(const std::string& name, const std::string& from)>;

struct PreprocessOptions {
  std::vector<std::filesystem::path> include_dirs;
  std::map<std::string, std::string> defines;
  /// When set, replaces file-system lookup (used by tests and the runner's
  /// generated config.h).
  IncludeResolver resolver;
};

/// C-style preprocessing pass: #include, object-like #define/#undef,
/// #ifdef/#ifndef/#else/#endif, and removal of `;`, `//` and `/* */`
/// comments. The output keeps one line per input line and carries
/// `#line N "file"` markers wherever the origin changes, so later passes can
/// report original locations. Throws AsmError.
std::string preprocess(std::string_view text, const std::string& filename, const PreprocessOptions& opts = {});

}  // namespace clown
