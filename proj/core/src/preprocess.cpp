#include "clown/preprocess.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "clown/error.hpp"

namespace clown {

std::string to_string(const SourceLocation& loc) {
  if (loc.column > 0) return fmt::format("{}:{}:{}", loc.file, loc.line, loc.column);
  return fmt::format("{}:{}", loc.file, loc.line);
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Copies a quoted literal starting at text[i] (the opening quote) into out.
std::size_t copy_quoted(std::string_view text, std::size_t i, std::string& out) {
  const char q = text[i];
  out.push_back(text[i++]);
  while (i < text.size() && text[i] != '\n') {
    const char c = text[i++];
    out.push_back(c);
    if (c == '\\' && i < text.size() && text[i] != '\n') {
      out.push_back(text[i++]);
    } else if (c == q) {
      break;
    }
  }
  return i;
}

// Removes ; // and /* */ comments, keeping newlines so line numbers hold.
std::string strip_comments(std::string_view text, const std::string& file) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  int line = 1;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '"' || c == '\'') {
      i = copy_quoted(text, i, out);
    } else if (c == ';' || (c == '/' && i + 1 < text.size() && text[i + 1] == '/')) {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
      const int start = line;
      i += 2;
      out.push_back(' ');
      for (;;) {
        if (i >= text.size()) throw AsmError({file, start, 0}, "unterminated block comment");
        if (text[i] == '*' && i + 1 < text.size() && text[i + 1] == '/') {
          i += 2;
          break;
        }
        if (text[i] == '\n') {
          out.push_back('\n');
          ++line;
        }
        ++i;
      }
    } else {
      if (c == '\n') ++line;
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

struct Conditional {
  bool parent_active;
  bool taking;
  bool seen_else;
  SourceLocation where;
};

class Preprocessor {
 public:
  explicit Preprocessor(const PreprocessOptions& opts) : opts_(opts), macros_(opts.defines) {}

  void run(std::string_view text, const std::string& file, int depth) {
    if (depth > 32) throw AsmError({file, 1, 0}, "#include nested too deeply");
    marker(1, file);
    const std::string clean = strip_comments(text, file);
    std::vector<Conditional> conds;
    auto active = [&] { return conds.empty() || (conds.back().parent_active && conds.back().taking); };

    std::istringstream lines(clean);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      ++n;
      const std::string_view t = trim(line);
      if (t.empty() || t.front() != '#') {
        out_ += active() ? expand(line) : std::string();
        out_ += '\n';
        continue;
      }
      const SourceLocation loc{file, n, 1};
      std::string_view rest = trim(t.substr(1));
      std::size_t k = 0;
      while (k < rest.size() && ident_char(rest[k])) ++k;
      const std::string dir(rest.substr(0, k));
      rest = trim(rest.substr(k));

      if (dir == "ifdef" || dir == "ifndef") {
        const std::string name = word(rest, loc, dir);
        const bool defined = macros_.count(name) != 0;
        conds.push_back({active(), dir == "ifdef" ? defined : !defined, false, loc});
      } else if (dir == "else") {
        if (conds.empty() || conds.back().seen_else) throw AsmError(loc, "#else without matching #ifdef");
        conds.back().taking = !conds.back().taking;
        conds.back().seen_else = true;
      } else if (dir == "endif") {
        if (conds.empty()) throw AsmError(loc, "#endif without matching #ifdef");
        conds.pop_back();
      } else if (!active()) {
        // Other directives in skipped blocks are ignored.
      } else if (dir == "define") {
        std::size_t e = 0;
        while (e < rest.size() && ident_char(rest[e])) ++e;
        if (e == 0 || !ident_start(rest[0])) throw AsmError(loc, "#define needs a macro name");
        if (e < rest.size() && rest[e] == '(') throw AsmError(loc, "function-like macros are not supported");
        macros_[std::string(rest.substr(0, e))] = std::string(trim(rest.substr(e)));
      } else if (dir == "undef") {
        macros_.erase(word(rest, loc, dir));
      } else if (dir == "include") {
        include(rest, loc, depth);
        marker(n + 1, file);
        continue;
      } else {
        throw AsmError(loc, fmt::format("unknown directive #{}", dir));
      }
      out_ += '\n';
    }
    if (!conds.empty()) throw AsmError(conds.back().where, "unterminated conditional (missing #endif)");
  }

  std::string take() { return std::move(out_); }

 private:
  void marker(int line, const std::string& file) { out_ += fmt::format("#line {} \"{}\"\n", line, file); }

  static std::string word(std::string_view rest, const SourceLocation& loc, const std::string& dir) {
    std::size_t e = 0;
    while (e < rest.size() && ident_char(rest[e])) ++e;
    if (e == 0) throw AsmError(loc, fmt::format("#{} needs a macro name", dir));
    return std::string(rest.substr(0, e));
  }

  void include(std::string_view rest, const SourceLocation& loc, int depth) {
    if (rest.size() < 2 || !((rest.front() == '"' && rest.back() == '"') || (rest.front() == '<' && rest.back() == '>')))
      throw AsmError(loc, "#include expects \"file\" or <file>");
    const std::string name(rest.substr(1, rest.size() - 2));
    if (opts_.resolver) {
      if (auto text = opts_.resolver(name, loc.file)) {
        run(*text, name, depth + 1);
        return;
      }
    }
    std::vector<std::filesystem::path> candidates;
    candidates.push_back(std::filesystem::path(loc.file).parent_path() / name);
    for (const auto& d : opts_.include_dirs) candidates.push_back(d / name);
    for (const auto& p : candidates) {
      std::ifstream in(p, std::ios::binary);
      if (!in) continue;
      std::stringstream ss;
      ss << in.rdbuf();
      run(ss.str(), p.lexically_normal().string(), depth + 1);
      return;
    }
    throw AsmError(loc, fmt::format("include file \"{}\" not found", name));
  }

  std::string expand(std::string_view line, std::set<std::string>* active_names = nullptr) {
    std::set<std::string> local;
    auto& busy = active_names ? *active_names : local;
    std::string out;
    std::size_t i = 0;
    while (i < line.size()) {
      const char c = line[i];
      if (c == '"' || c == '\'') {
        i = copy_quoted(line, i, out);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        while (i < line.size() && ident_char(line[i])) out.push_back(line[i++]);
      } else if (ident_start(c)) {
        const std::size_t s = i;
        while (i < line.size() && ident_char(line[i])) ++i;
        const std::string id(line.substr(s, i - s));
        const bool sigil = s > 0 && (line[s - 1] == '%' || line[s - 1] == '.');
        auto it = macros_.find(id);
        if (!sigil && it != macros_.end() && !busy.count(id)) {
          busy.insert(id);
          out += expand(it->second, &busy);
          busy.erase(id);
        } else {
          out += id;
        }
      } else {
        out.push_back(c);
        ++i;
      }
    }
    return out;
  }

  const PreprocessOptions& opts_;
  std::map<std::string, std::string> macros_;
  std::string out_;
};

}  // namespace

std::string preprocess(std::string_view text, const std::string& filename, const PreprocessOptions& opts) {
  Preprocessor pp(opts);
  pp.run(text, filename, 0);
  return pp.take();
}

}  // namespace clown
