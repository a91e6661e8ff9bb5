#pragma once

#include <cstdio>
#include <exception>
#include <string>

#include <fmt/format.h>

#include "clown/error.hpp"
#include "clown/expr.hpp"
#include "clown/types.hpp"

namespace clown::cli {

/// Numbers on the command line use the assembler's literal syntax.
inline std::uint32_t number(const std::string& text, const char* what) {
  const auto v = as::parse_number(text);
  if (!v) throw Error(fmt::format("bad {} '{}'", what, text));
  return static_cast<std::uint32_t>(*v);
}

template <class F>
int guarded(const char* tool, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    fmt::print(stderr, "{}: error: {}\n", tool, e.what());
    return 1;
  }
}

}  // namespace clown::cli
