// clink: merge exe modules, resolve globals, emit a linked exe or a bin.

#include <CLI11.hpp>

#include "cli_util.hpp"
#include "clown/exe.hpp"
#include "clown/link.hpp"
#include "clown/words_io.hpp"

using namespace clown;

int main(int argc, char** argv) {
  CLI::App app{"clink - linker for Clown exe modules"};
  std::vector<std::string> inputs, bases;
  std::string output = "a.out", format = "exe", base_text = "0";

  app.add_option("files", inputs, "exe modules")->required();
  app.add_option("-o", output, "output file");
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"bin", "exe"}));
  app.add_option("--base", bases, "N for the whole image, or seg=N to pin a segment (repeatable)")->allow_extra_args(false);
  CLI11_PARSE(app, argc, argv);

  return cli::guarded("clink", [&] {
    std::vector<LinkInput> mods;
    for (const auto& f : inputs) mods.push_back({f, load_exe(f)});
    const ObjectModule linked = link(mods);

    Address base = 0;
    std::map<std::string, Address> overrides;
    for (const auto& b : bases) {
      const auto eq = b.find('=');
      if (eq == std::string::npos)
        base = cli::number(b, "base");
      else
        overrides[b.substr(0, eq)] = cli::number(b.substr(eq + 1), "base");
    }

    if (format == "bin") {
      write_words(output, link_image(linked, base, overrides).words);
    } else {
      if (!overrides.empty() || base != 0) (void)layout(linked, base, overrides);  // validate only
      save_exe(output, linked);
    }
    return 0;
  });
}
