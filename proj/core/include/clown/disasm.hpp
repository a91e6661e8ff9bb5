#pragma once

#include <span>
#include <string>

#include "clown/isa.hpp"

namespace clown {

/// Renders one decoded instruction in assembler syntax. Immediate forms are
/// printed with their register-form mnemonic ("mov %r1, 10000000"), which the
/// assembler promotes back to the same encoding.
std::string format_instruction(const isa::Instruction& inst);

/// One line per instruction; the address and raw words follow as a `;`
/// comment so the output can be fed straight back to the assembler.
/// Unassigned words are rendered as `.word` literals.
std::string disassemble(std::span<const Word> words, Address origin = 0);

}  // namespace clown
