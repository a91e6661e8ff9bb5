#include "clown/expr.hpp"

#include <cctype>

#include <fmt/format.h>

namespace clown::as {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::optional<std::int64_t> digits(std::string_view s, int base) {
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c == '_') continue;
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'z') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'Z') d = c - 'A' + 10;
    else return std::nullopt;
    if (d >= base) return std::nullopt;
    v = v * static_cast<unsigned>(base) + static_cast<unsigned>(d);
    if (v > 0xFFFFFFFFull) return std::nullopt;
  }
  return static_cast<std::int64_t>(v);
}

SourceLocation at(const SourceLocation& loc, int column) { return {loc.file, loc.line, column}; }

// Decodes one possibly escaped character at s[i]; advances i.
char unescape(std::string_view s, std::size_t& i, const SourceLocation& loc, int column) {
  char c = s[i++];
  if (c != '\\') return c;
  if (i >= s.size()) throw AsmError(at(loc, column), "dangling escape");
  c = s[i++];
  switch (c) {
    case 'n': return '\n';
    case 't': return '\t';
    case 'r': return '\r';
    case '0': return '\0';
    case '\\': return '\\';
    case '\'': return '\'';
    case '"': return '"';
    default: throw AsmError(at(loc, column), fmt::format("unknown escape \\{}", c));
  }
}

}  // namespace

std::optional<std::int64_t> parse_number(std::string_view t) {
  if (t.empty() || !std::isdigit(static_cast<unsigned char>(t[0]))) return std::nullopt;
  if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) return digits(t.substr(2), 16);
  if (t.size() > 2 && t[0] == '0' && (t[1] == 'o' || t[1] == 'O')) return digits(t.substr(2), 8);
  const char last = static_cast<char>(std::tolower(static_cast<unsigned char>(t.back())));
  if (t.size() > 1 && last == 'h') return digits(t.substr(0, t.size() - 1), 16);
  if (t.size() > 1 && last == 'q') return digits(t.substr(0, t.size() - 1), 8);
  if (t.size() > 1 && last == 'd') return digits(t.substr(0, t.size() - 1), 10);
  if (t.size() > 1 && t[0] == '0') return digits(t.substr(1), 8);
  return digits(t, 10);
}

std::vector<Token> tokenize(std::string_view s, const SourceLocation& loc) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    const int col = static_cast<int>(i) + 1;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      const std::size_t b = i;
      while (i < s.size() && ident_char(s[i])) ++i;
      const auto text = s.substr(b, i - b);
      const auto v = parse_number(text);
      if (!v) throw AsmError(at(loc, col), fmt::format("malformed number '{}'", text));
      out.push_back({Tok::Number, std::string(text), *v, col});
    } else if (ident_start(c) || c == '.') {
      const std::size_t b = i++;
      while (i < s.size() && ident_char(s[i])) ++i;
      out.push_back({Tok::Ident, std::string(s.substr(b, i - b)), 0, col});
    } else if (c == '%') {
      std::size_t b = ++i;
      while (i < s.size() && ident_char(s[i])) ++i;
      const std::string name(s.substr(b, i - b));
      const char kind = name.empty() ? '\0' : static_cast<char>(std::tolower(static_cast<unsigned char>(name[0])));
      const auto n = name.size() > 1 ? digits(name.substr(1), 10) : std::nullopt;
      if (kind == 'r' && n && *n < 16) {
        out.push_back({Tok::Reg, name, *n, col});
      } else if (kind == 's' && n && *n < 8) {
        out.push_back({Tok::Seg, name, *n, col});
      } else {
        throw AsmError(at(loc, col), fmt::format("unknown register %{}", name));
      }
    } else if (c == '\'') {
      ++i;
      if (i >= s.size()) throw AsmError(at(loc, col), "unterminated character literal");
      const char v = unescape(s, i, loc, col);
      if (i >= s.size() || s[i] != '\'') throw AsmError(at(loc, col), "unterminated character literal");
      ++i;
      out.push_back({Tok::Number, "'", static_cast<unsigned char>(v), col});
    } else if (c == '"') {
      ++i;
      std::string text;
      for (;;) {
        if (i >= s.size()) throw AsmError(at(loc, col), "unterminated string");
        if (s[i] == '"') {
          ++i;
          break;
        }
        text.push_back(unescape(s, i, loc, col));
      }
      out.push_back({Tok::String, std::move(text), 0, col});
    } else if ((c == '<' || c == '>') && i + 1 < s.size() && s[i + 1] == c) {
      out.push_back({Tok::Punct, std::string(2, c), 0, col});
      i += 2;
    } else if (std::string_view("+-*/%&|^~()[],:$").find(c) != std::string_view::npos) {
      out.push_back({Tok::Punct, std::string(1, c), 0, col});
      ++i;
    } else {
      throw AsmError(at(loc, col), fmt::format("unexpected character '{}'", c));
    }
  }
  out.push_back({Tok::End, "", 0, static_cast<int>(s.size()) + 1});
  return out;
}

namespace {

class Parser {
 public:
  Parser(std::span<const Token> t, std::size_t& pos, const ExprEnv& env, const SourceLocation& loc)
      : t_(t), pos_(pos), env_(env), loc_(loc) {}

  Value parse() { return binary(0); }

 private:
  const Token& peek() const { return t_[pos_]; }
  bool punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  SourceLocation here() const { return at(loc_, peek().column); }

  static int precedence(std::string_view op) {
    if (op == "|") return 1;
    if (op == "^") return 2;
    if (op == "&") return 3;
    if (op == "<<" || op == ">>") return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "%") return 6;
    return -1;
  }

  Value binary(int min_prec) {
    Value lhs = unary();
    for (;;) {
      if (peek().kind != Tok::Punct) return lhs;
      const std::string op = peek().text;
      const int p = precedence(op);
      if (p < 0 || p < min_prec) return lhs;
      const SourceLocation where = here();
      ++pos_;
      Value rhs = binary(p + 1);
      lhs = apply(op, lhs, rhs, where);
    }
  }

  Value apply(const std::string& op, const Value& a, const Value& b, const SourceLocation& where) {
    // Forward references read as 0 in the sizing pass; mixed operands are
    // checked for real once every label is known.
    if (env_.lenient && (!a.absolute() || !b.absolute())) {
      Value r = a.absolute() ? b : a;
      r.k = 0;
      return r;
    }
    if (op == "+") {
      if (!a.absolute() && !b.absolute()) throw AsmError(where, "cannot add two addresses");
      Value r = a.absolute() ? b : a;
      r.k = a.k + b.k;
      return r;
    }
    if (op == "-") {
      if (b.absolute()) {
        Value r = a;
        r.k = a.k - b.k;
        return r;
      }
      if (a.kind == Value::Kind::Segment && b.kind == Value::Kind::Segment && a.segment == b.segment)
        return Value::of(a.k - b.k);
      throw AsmError(where, "address difference is not a constant");
    }
    if (!a.absolute() || !b.absolute()) throw AsmError(where, fmt::format("operator '{}' needs constant operands", op));
    const std::int64_t x = a.k, y = b.k;
    if ((op == "/" || op == "%") && y == 0) throw AsmError(where, "division by zero in expression");
    if (op == "*") return Value::of(x * y);
    if (op == "/") return Value::of(x / y);
    if (op == "%") return Value::of(x % y);
    if (op == "<<") return Value::of(static_cast<std::int64_t>(static_cast<std::uint64_t>(x) << (y & 63)));
    if (op == ">>") return Value::of(x >> (y & 63));
    if (op == "&") return Value::of(x & y);
    if (op == "^") return Value::of(x ^ y);
    return Value::of(x | y);
  }

  Value unary() {
    if (punct("-") || punct("~") || punct("+")) {
      const std::string op = peek().text;
      const SourceLocation where = here();
      ++pos_;
      Value v = unary();
      if (op == "+") return v;
      if (!v.absolute()) throw AsmError(where, fmt::format("unary '{}' needs a constant", op));
      return Value::of(op == "-" ? -v.k : ~v.k);
    }
    return primary();
  }

  Value primary() {
    const Token& tok = peek();
    if (tok.kind == Tok::Number) {
      ++pos_;
      return Value::of(tok.value);
    }
    if (punct("$")) {
      ++pos_;
      return env_.here;
    }
    if (punct("(")) {
      ++pos_;
      Value v = binary(0);
      if (!punct(")")) throw AsmError(here(), "expected ')'");
      ++pos_;
      return v;
    }
    if (tok.kind == Tok::Ident && tok.text[0] != '.') {
      ++pos_;
      if (auto v = env_.lookup(tok.text)) return *v;
      if (env_.lenient) return Value::of(0);
      throw AsmError(at(loc_, tok.column), fmt::format("undefined symbol '{}'", tok.text));
    }
    if (tok.kind == Tok::End) throw AsmError(here(), "expected an expression");
    throw AsmError(here(), fmt::format("unexpected '{}' in expression", tok.text));
  }

  std::span<const Token> t_;
  std::size_t& pos_;
  const ExprEnv& env_;
  const SourceLocation& loc_;
};

}  // namespace

Value eval(std::span<const Token> tokens, std::size_t& pos, const ExprEnv& env, const SourceLocation& loc) {
  return Parser(tokens, pos, env, loc).parse();
}

}  // namespace clown::as
