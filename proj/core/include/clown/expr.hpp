#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clown/error.hpp"

namespace clown::as {

enum class Tok : std::uint8_t { Ident, Number, String, Reg, Seg, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;     // identifier, punctuation, or decoded string
  std::int64_t value = 0;  // number / register index
  int column = 0;
};

/// Splits one source line into tokens. Numbers accept 0x1F, 1Fh, 0o17, 017,
/// 17q, 255, 255d; character literals ('A', '\n') become numbers.
std::vector<Token> tokenize(std::string_view line, const SourceLocation& loc);

/// Parses a numeric literal; nullopt if malformed or wider than 32 bits.
std::optional<std::int64_t> parse_number(std::string_view text);

/// Expression value: a constant plus, optionally, the address of a segment
/// start or of an external symbol.
struct Value {
  enum class Kind : std::uint8_t { Absolute, Segment, External };
  std::int64_t k = 0;
  Kind kind = Kind::Absolute;
  std::uint32_t segment = 0;
  std::string external;

  static Value of(std::int64_t v) {
    Value r;
    r.k = v;
    return r;
  }
  bool absolute() const { return kind == Kind::Absolute; }
};

struct ExprEnv {
  /// Resolves a symbol; nullopt if unknown.
  std::function<std::optional<Value>(const std::string&)> lookup;
  /// Value of `$`.
  Value here;
  /// In the sizing pass unknown symbols evaluate to 0 instead of failing.
  bool lenient = false;
};

/// Evaluates the expression in tokens[pos...], advancing pos. C precedence:
/// unary - ~ +, then * / %, + -, << >>, &, ^, |.
Value eval(std::span<const Token> tokens, std::size_t& pos, const ExprEnv& env, const SourceLocation& loc);

}  // namespace clown::as
