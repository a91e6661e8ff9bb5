// clown-fmt: create disk images, install raw images on them, dump blocks.

#include <iostream>

#include <CLI11.hpp>

#include "cli_util.hpp"
#include "clown/disk_image.hpp"
#include "clown/words_io.hpp"

using namespace clown;

int main(int argc, char** argv) {
  CLI::App app{"clown-fmt - disk formatter"};
  app.require_subcommand(1);

  DiskGeometry g;
  std::string image;

  auto* fresh = app.add_subcommand("new", "write a zero-filled image");
  fresh->add_option("image", image)->required();
  fresh->add_option("--tracks", g.tracks);
  fresh->add_option("--sectors", g.sectors);
  fresh->add_option("--t2t", g.t2t, "track-to-track seek cycles");
  fresh->add_option("--max-seek", g.max_seek, "full-stroke seek cycles");
  fresh->add_option("--sector-time", g.sector_time, "cycles per sector");
  fresh->add_option("--gap", g.gap, "inter-sector gap cycles");

  std::string file;
  std::uint32_t track = 0, sector = 0;
  auto* install = app.add_subcommand("install", "copy a bin file onto the disk, from track 0 sector 0 by default");
  install->add_option("image", image)->required();
  install->add_option("file", file)->required();
  install->add_option("--track", track);
  install->add_option("--sector", sector);

  std::size_t count = 1;
  auto* dump = app.add_subcommand("dump", "print the geometry and blocks");
  dump->add_option("image", image)->required();
  dump->add_option("--track", track);
  dump->add_option("--sector", sector);
  dump->add_option("--count", count, "number of blocks");

  CLI11_PARSE(app, argc, argv);

  return cli::guarded("clown-fmt", [&] {
    if (*fresh) {
      DiskImage(g).save(image);
    } else if (*install) {
      DiskImage d = DiskImage::load(image);
      const auto n = d.install(read_words(file), track, sector);
      d.save(image);
      fmt::print("{}: {} block{} at track {} sector {}\n", file, n, n == 1 ? "" : "s", track, sector);
    } else {
      const DiskImage d = DiskImage::load(image);
      const auto& geo = d.geometry();
      fmt::print("tracks {} sectors {} sector_time {} gap {} t2t {} max_seek {}\n", geo.tracks, geo.sectors,
                 geo.sector_time, geo.gap, geo.t2t, geo.max_seek);
      const auto words = d.read_blocks(track, sector, count);
      for (std::size_t i = 0; i < words.size(); i += 8) {
        if (i % kBlockWords == 0) {
          const auto b = d.block_index(track, sector) + i / kBlockWords;
          fmt::print("block {} (track {} sector {})\n", b, b / geo.sectors, b % geo.sectors);
        }
        fmt::print("  {:04X}:", i % kBlockWords);
        for (std::size_t k = i; k < i + 8 && k < words.size(); ++k) fmt::print(" {:08X}", static_cast<UWord>(words[k]));
        fmt::print("\n");
      }
    }
    return 0;
  });
}
