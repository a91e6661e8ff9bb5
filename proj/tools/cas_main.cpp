// cas: preprocess and assemble one source file into a bin or exe image.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cli_util.hpp"
#include "clown/assembler.hpp"
#include "clown/disasm.hpp"
#include "clown/exe.hpp"
#include "clown/isa.hpp"
#include "clown/words_io.hpp"

using namespace clown;

int main(int argc, char** argv) {
  CLI::App app{"cas - assembler for the Clown machine"};
  std::string input, output, format = "exe", base_text = "0", entry_text, listing;
  std::vector<std::string> include_dirs, defines;
  bool roster = false, disasm = false;

  app.add_option("file", input, "source file (.s), or a bin file with --disasm");
  app.add_option("-I", include_dirs, "add an include directory (repeatable)")->allow_extra_args(false);
  app.add_option("-D", defines, "predefine NAME or NAME=VALUE (repeatable)")->allow_extra_args(false);
  app.add_option("-o", output, "output file (default: input with .bin/.exe)");
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"bin", "exe"}));
  app.add_option("--base", base_text, "load base for bin output");
  app.add_option("--entry-disp", entry_text, "require .entry at base + N (bin only)");
  app.add_option("--listing", listing, "write a listing file");
  app.add_flag("--roster", roster, "print the instruction roster and exit");
  app.add_flag("--disasm", disasm, "disassemble a bin file to stdout");
  CLI11_PARSE(app, argc, argv);

  return cli::guarded("cas", [&] {
    if (roster) {
      std::cout << isa::roster_text();
      return 0;
    }
    if (input.empty()) throw Error("no input file");
    const Address base = cli::number(base_text, "base");
    if (disasm) {
      std::cout << disassemble(read_words(input), base);
      return 0;
    }

    PreprocessOptions pp;
    for (const auto& d : include_dirs) pp.include_dirs.emplace_back(d);
    for (const auto& d : defines) {
      const auto eq = d.find('=');
      pp.defines[d.substr(0, eq)] = eq == std::string::npos ? "1" : d.substr(eq + 1);
    }
    const Assembly a = assemble_file(input, pp);

    if (output.empty()) output = std::filesystem::path(input).replace_extension("." + format).string();
    if (format == "bin") {
      std::optional<Address> disp;
      if (!entry_text.empty()) disp = cli::number(entry_text, "entry displacement");
      write_words(output, emit_bin(a.module, base, disp));
    } else {
      if (!entry_text.empty()) throw Error("--entry-disp only applies to bin output");
      save_exe(output, a.module);
    }
    if (!listing.empty()) {
      std::ofstream out(listing);
      if (!out) throw Error(fmt::format("cannot write {}", listing));
      out << format_listing(a);
    }
    return 0;
  });
}
