#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "clown/error.hpp"
#include "clown/isa.hpp"
#include "support.hpp"

using namespace clown;
using namespace clown::isa;

namespace {

// Independent bit packing of the first instruction word.
UWord pack(bool ximm, unsigned code, unsigned rd, unsigned rs, int imm16) {
  return (ximm ? 0x80000000u : 0u) | (code << 24) | (rd << 20) | (rs << 16) | (static_cast<UWord>(imm16) & 0xFFFFu);
}

}  // namespace

TEST_CASE("group cardinalities") {
  const std::size_t expected[kGroupCount] = {13, 12, 8, 11, 8, 6, 3, 18, 5, 3};
  std::size_t total = 0;
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    CAPTURE(group_name(static_cast<Group>(g)));
    CHECK(group_count(static_cast<Group>(g)) == expected[g]);
    total += group_count(static_cast<Group>(g));
  }
  CHECK(total == 87);
  CHECK(roster().size() == 87);
  CHECK(group_count(Group::FlowControl) == 18);
  CHECK(group_count(Group::BitsBytes) == 8);
}

TEST_CASE("roster keys are distinct and consistent") {
  std::set<std::pair<bool, unsigned>> keys;
  std::set<std::string_view> names;
  for (const auto& e : roster()) {
    CHECK(e.code < 128);
    CHECK(keys.insert({e.ximm, e.code}).second);
    CHECK(names.insert(e.mnemonic).second);
    CHECK(lookup(e.ximm, e.code) == e.op);
    CHECK(find_mnemonic(e.mnemonic) == e.op);
    CHECK(&info(e.op) == &e);
  }
  CHECK(info(Op::Nop).code == 0);
  CHECK(find_mnemonic("MOV") == Op::Mov);
}

TEST_CASE("encode examples") {
  CHECK(encode(make(Op::Mov, 1, 2)) == std::vector<Word>{0x01120000});
  CHECK(encode(make(Op::Xmov, 1, 0, 0, 10000000)) ==
        std::vector<Word>{static_cast<Word>(0x81100000u), 0x00989680});
  CHECK(encode(make(Op::Nop)) == std::vector<Word>{0});
}

TEST_CASE("decode examples") {
  const std::vector<Word> nop{0};
  auto d = decode(nop);
  CHECK(d.inst.op == Op::Nop);
  CHECK(d.length == 1);

  const std::vector<Word> xmov{static_cast<Word>(0x81100000u), 0x00989680};
  d = decode(xmov);
  CHECK(d.inst.op == Op::Xmov);
  CHECK(d.length == 2);
  CHECK(d.inst.rd == 1);
  CHECK(d.inst.imm32 == 10000000);

  const std::vector<Word> bad{0x7F000000};
  d = decode(bad);
  CHECK(d.inst.op == Op::Invalid);
  CHECK(d.inst.code == 0x7F);
}

TEST_CASE("truncated two-word instruction") {
  const std::vector<Word> cut{static_cast<Word>(0x81100000u)};
  CHECK_THROWS_AS(decode(cut), DecodeError);
}

TEST_CASE("encode rejects fields that do not fit") {
  auto i = make(Op::Mov, 1, 2);
  i.rd = 16;
  CHECK_THROWS_AS(encode(i), EncodeError);
  i = make(Op::Mov, 1, 2);
  i.rs = 99;
  CHECK_THROWS_AS(encode(i), EncodeError);
  i = make(Op::In, 1, 0, 0);
  i.imm16 = 40000;
  CHECK_THROWS_AS(encode(i), EncodeError);
  try {
    i.imm16 = -40000;
    encode(i);
    FAIL("no error");
  } catch (const EncodeError& e) {
    CHECK(std::string(e.what()).find("imm16") != std::string::npos);
  }
}

TEST_CASE("bus classes") {
  CHECK(bus_class(make(Op::Ld, 1, 2)) == BusClass::MemoryReference);
  CHECK(bus_class(make(Op::St, 1, 2)) == BusClass::MemoryReference);
  CHECK(bus_class(make(Op::Push, 0, 1)) == BusClass::MemoryReference);
  CHECK(bus_class(make(Op::Pop, 1)) == BusClass::MemoryReference);
  CHECK(bus_class(make(Op::Out, 0, 1, 0x10)) == BusClass::IOInstruction);
  CHECK(bus_class(make(Op::In, 1, 0, 0x10)) == BusClass::IOInstruction);
  CHECK(bus_class(make(Op::Add, 1, 2)) == BusClass::None);
  CHECK(bus_class(make(Op::Lea, 1, 2)) == BusClass::None);
}

TEST_CASE("round trip over random fields") {
  std::mt19937_64 rng(0xC10A);
  std::uniform_int_distribution<unsigned> reg(0, 15);
  std::uniform_int_distribution<int> i16(-32768, 32767);
  std::uniform_int_distribution<std::int64_t> i32(INT32_MIN, INT32_MAX);
  const auto ros = roster();
  for (int n = 0; n < 100000; ++n) {
    const auto& e = ros[rng() % ros.size()];
    const Instruction in = make(e.op, reg(rng), reg(rng), i16(rng), e.ximm ? static_cast<Word>(i32(rng)) : 0);
    const auto words = encode(in);
    REQUIRE(words.size() == (e.ximm ? 2u : 1u));
    // Encoded MSB equals ximm and the fields sit where the layout says.
    REQUIRE(static_cast<UWord>(words[0]) == pack(e.ximm, e.code, in.rd, in.rs, in.imm16));
    const auto d = decode(words);
    REQUIRE(d.inst == in);
    REQUIRE(d.length == words.size());
    if (!e.ximm) REQUIRE(decode_first(words[0]) == in);
  }
}

TEST_CASE("every unassigned code decodes to the invalid marker") {
  for (unsigned x = 0; x < 2; ++x) {
    for (unsigned code = 0; code < 128; ++code) {
      const Word w0 = static_cast<Word>(pack(x != 0, code, 3, 4, 5));
      const std::vector<Word> words{w0, 7};
      const auto d = decode(words);
      CHECK(has_immediate_word(w0) == (x != 0));
      CHECK(d.length == (x ? 2u : 1u));
      if (auto op = lookup(x != 0, static_cast<std::uint8_t>(code)))
        CHECK(d.inst.op == *op);
      else
        CHECK(d.inst.op == Op::Invalid);
    }
  }
}

TEST_CASE("roster text matches the checked-in table") {
  std::ifstream in(test::docs_dir() / "roster.txt");
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  CHECK(text == roster_text());
  // One header line plus one line per opcode.
  CHECK(std::count(text.begin(), text.end(), '\n') == 88);
}
