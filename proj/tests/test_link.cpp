#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "clown/disk_image.hpp"
#include "clown/error.hpp"
#include "clown/exe.hpp"
#include "clown/link.hpp"
#include "clown/words_io.hpp"
#include "support.hpp"

using namespace clown;

namespace {

ObjectModule random_module(std::mt19937_64& rng) {
  ObjectModule m;
  m.flags = rng() % 2;
  const auto nseg = 1 + rng() % 4;
  for (std::size_t s = 0; s < nseg; ++s) {
    Segment seg;
    seg.name = "seg" + std::to_string(s);
    seg.writable = rng() % 2;
    seg.executable = rng() % 2;
    seg.words.resize(rng() % 40);
    for (auto& w : seg.words) w = static_cast<Word>(rng());
    m.segments.push_back(seg);
  }
  const auto nsym = rng() % 6;
  for (std::size_t i = 0; i < nsym; ++i) {
    Symbol sym;
    sym.name = "sym_" + std::to_string(i) + std::string(rng() % 5, 'x');
    if (rng() % 4) sym.segment = static_cast<std::uint32_t>(rng() % nseg);
    sym.value = static_cast<Word>(rng() % 100);
    sym.global = rng() % 2;
    m.symbols.push_back(sym);
  }
  if (nsym) {
    for (std::size_t i = 0, n = rng() % 5; i < n; ++i) {
      const auto seg = static_cast<std::uint32_t>(rng() % nseg);
      if (m.segments[seg].words.empty()) continue;
      m.relocations.push_back({seg, static_cast<std::uint32_t>(rng() % m.segments[seg].words.size()),
                               static_cast<std::uint32_t>(rng() % nsym), RelocType::AbsoluteWord});
    }
  }
  if (rng() % 2) m.entry = EntryPoint{static_cast<std::uint32_t>(rng() % nseg), 0};
  return m;
}

const char* kLib = R"(
        .global puts
puts:   ld      %r2, [%r1]
        test    %r2, %r2
        jz      out
        out     %r2, (0x20)
        inc     %r1
        jmp     puts
out:    ret
)";

const char* kApp = R"(
        .extern puts
        .entry  main
main:   mov     %r1, msg
        call    puts
        stop
        .segment data
msg:    .ascii  "ok"
)";

std::string link_error(std::vector<LinkInput> in) {
  try {
    link(in);
  } catch (const LinkError& e) {
    return e.what();
  }
  FAIL("link succeeded");
  return {};
}

}  // namespace

TEST_CASE("exe round trip") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto m = random_module(rng);
    REQUIRE(read_exe_words(write_exe_words(m)) == m);
    REQUIRE(read_exe(write_exe(m)) == m);
  }
  ObjectModule empty;
  CHECK(write_exe_words(empty).size() == kExeHeaderWords + 1);
  CHECK(read_exe_words(write_exe_words(empty)) == empty);
}

TEST_CASE("exe corruption is reported with an offset") {
  const auto good = write_exe_words(test::assemble_text(kApp));
  CHECK(is_exe(good));
  auto bad = good;
  bad[0] ^= 1;
  CHECK_FALSE(is_exe(bad));
  try {
    read_exe_words(bad);
    FAIL("accepted bad magic");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
  }
  CHECK_THROWS_AS(read_exe_words(std::span<const Word>(good).first(good.size() - 1)), FormatError);
  std::vector<std::uint8_t> odd(write_exe(test::assemble_text(kApp)));
  odd.pop_back();
  CHECK_THROWS_AS(read_exe(odd), FormatError);
}

TEST_CASE("linking resolves externals") {
  std::vector<LinkInput> in{{"app", test::assemble_text(kApp)}, {"lib", test::assemble_text(kLib)}};
  const auto linked = link(in);
  CHECK((linked.flags & ObjectModule::kLinked) != 0);
  CHECK_FALSE(linked.has_externals());
  const auto img = link_image(linked, 0x100);
  REQUIRE(img.entry);
  CHECK(*img.entry == 0x100);

  // app code: mov (2) call (2) stop (1) -> 5 words, lib code follows at an 8-word boundary
  const auto puts_at = 0x100 + align_up(5);
  const auto call = isa::decode(img.words, 2);
  CHECK(call.inst.op == isa::Op::Xcall);
  CHECK(static_cast<Address>(call.inst.imm32) == puts_at);

  System fresh;
  fresh.load_module(linked, 0x100, "linked");
  fresh.cpu().state().pc = 0x100;
  fresh.cpu().state().r[13] = 0x8000;
  fresh.run({.max_cycles = 10000});
  CHECK(fresh.terminal().tx_text() == "ok");
}

TEST_CASE("relocation moves exactly the relocated words") {
  const auto m = link(std::vector<LinkInput>{{"app", test::assemble_text(kApp)}, {"lib", test::assemble_text(kLib)}});
  const auto a = link_image(m, 0x100);
  const Address delta = 0x2340;
  const auto b = link_image(m, 0x100 + delta);
  REQUIRE(a.words.size() == b.words.size());
  const auto lay = layout(m, 0x100);
  std::set<std::size_t> sites;
  for (const auto& r : m.relocations) sites.insert(lay.bases[r.segment] - 0x100 + r.offset);
  CHECK_FALSE(sites.empty());
  for (std::size_t i = 0; i < a.words.size(); ++i) {
    CAPTURE(i);
    if (sites.count(i))
      CHECK(b.words[i] - a.words[i] == static_cast<Word>(delta));
    else
      CHECK(b.words[i] == a.words[i]);
  }
}

TEST_CASE("link diagnostics") {
  const auto dup = link_error({{"one.exe", test::assemble_text(".global f\nf: ret\n")},
                               {"two.exe", test::assemble_text(".global f\nf: nop\n ret\n")}});
  CHECK(dup.find("one.exe") != std::string::npos);
  CHECK(dup.find("two.exe") != std::string::npos);

  const auto missing = link_error({{"m", test::assemble_text(".extern a, b\n call a\n call b\n")}});
  CHECK(missing.find('a') != std::string::npos);
  CHECK(missing.find(" b") != std::string::npos);

  const auto m = test::assemble_text("nop\n .segment data, w\n .word 1, 2, 3\n");
  CHECK_NOTHROW(layout(m, 0, {{"code", 0x10}, {"data", 0x11}}));
  const auto ok = layout(m, 0, {{"data", 0x400}});
  CHECK(ok.bases[0] == 0);
  CHECK(ok.bases[1] == 0x400);
  CHECK_THROWS_AS(layout(m, 0, {{"code", 0x10}, {"data", 0x10}}), LinkError);
}

TEST_CASE("same-named segments merge in input order") {
  const auto m = link(std::vector<LinkInput>{{"a", test::assemble_text(".word 1, 2, 3\n")},
                                             {"b", test::assemble_text(".word 4\n")}});
  REQUIRE(m.segments.size() == 1);
  CHECK(m.segments[0].words == std::vector<Word>{1, 2, 3, 0, 0, 0, 0, 0, 4});
}

TEST_CASE("disk image geometry and blocks") {
  DiskImage img;
  CHECK(img.to_words().size() == 9 + 64 * 16 * 128);
  std::vector<Word> two(2 * kBlockWords);
  for (std::size_t i = 0; i < two.size(); ++i) two[i] = static_cast<Word>(i + 1);
  img.write_blocks(3, 15, two);  // wraps onto track 4 sector 0
  CHECK(img.block(3, 15)[0] == 1);
  CHECK(img.block(4, 0)[0] == 129);
  CHECK(img.read_blocks(3, 15, 2) == two);
  CHECK(img.block_index(4, 0) == 4 * 16);

  DiskImage inst;
  std::vector<Word> payload(130, 7);
  CHECK(inst.install(payload) == 2);
  CHECK(inst.block(0, 1)[1] == 7);
  CHECK(inst.block(0, 1)[2] == 0);

  const auto path = std::filesystem::temp_directory_path() / "clown_disk_test.img";
  img.save(path);
  CHECK(DiskImage::load(path) == img);
  auto words = read_words(path);
  words[0] = 0;
  write_words(path, words);
  CHECK_THROWS_AS(DiskImage::load(path), FormatError);
  std::filesystem::remove(path);

  CHECK_THROWS(img.write_blocks(63, 15, two));
  CHECK(DiskImage::from_words(img.to_words()) == img);
}
