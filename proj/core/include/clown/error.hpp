#pragma once

#include <stdexcept>
#include <string>

namespace clown {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An instruction field does not fit its encoding slot.
class EncodeError : public Error {
 public:
  using Error::Error;
};

/// A word sequence cannot be decoded (e.g. a truncated two-word instruction).
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Source location carried by preprocessor and assembler diagnostics.
struct SourceLocation {
  std::string file;
  int line = 0;
  int column = 0;
};

std::string to_string(const SourceLocation& loc);

class AsmError : public Error {
 public:
  AsmError(SourceLocation loc, const std::string& message)
      : Error(to_string(loc) + ": " + message), loc_(std::move(loc)), message_(message) {}

  const SourceLocation& location() const { return loc_; }
  const std::string& message() const { return message_; }

 private:
  SourceLocation loc_;
  std::string message_;
};

/// Malformed exe file, disk image or raw word file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class LinkError : public Error {
 public:
  using Error::Error;
};

/// A condition that stops the simulator itself (not a CPU exception):
/// physical access out of range, double fault, bad configuration.
class SimFault : public Error {
 public:
  using Error::Error;
};

}  // namespace clown
