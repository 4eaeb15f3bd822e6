#include <doctest.h>

#include <random>
#include <set>

#include "atmsim/cell.hpp"
#include "atmsim/errors.hpp"
#include "oracles.hpp"

using namespace atmsim;

namespace {

CellHeader random_header(std::mt19937_64& g, InterfaceKind kind) {
  CellHeader h;
  h.gfc = kind == InterfaceKind::UNI ? static_cast<std::uint8_t>(g() & 0xF) : 0;
  h.vpi = static_cast<std::uint16_t>(g() % (max_vpi(kind) + 1u));
  h.vci = static_cast<std::uint16_t>(g());
  h.pti = Pti::from_bits(static_cast<std::uint8_t>(g() & 7));
  h.clp = (g() & 1) != 0;
  return h;
}

HeaderBytes flip(HeaderBytes b, unsigned bit) {
  b[bit / 8] ^= static_cast<std::uint8_t>(0x80u >> (bit % 8));
  return b;
}

}  // namespace

TEST_SUITE("cell") {

TEST_CASE("hec of all-zero prefix is the coset byte") {
  const std::array<std::uint8_t, 4> z{};
  CHECK(compute_hec(z) == 0x55);
  CHECK(oracle::hec(z) == 0x55);
}

TEST_CASE("hec golden values from the bit-serial oracle") {
  const std::array<std::uint8_t, 4> a{0x00, 0x10, 0x00, 0x10};
  CHECK(compute_hec(a) == 0x87);
  CHECK(oracle::hec(a) == 0x87);
  const std::array<std::uint8_t, 4> b{0x12, 0x34, 0x56, 0x78};
  CHECK(compute_hec(b) == oracle::hec(b));
}

TEST_CASE("hec agrees with the oracle on random prefixes") {
  std::mt19937_64 g(1);
  for (int i = 0; i < 20000; ++i) {
    std::array<std::uint8_t, 4> b{};
    for (auto& x : b) x = static_cast<std::uint8_t>(g());
    REQUIRE(compute_hec(b) == oracle::hec(b));
  }
}

TEST_CASE("header layout examples") {
  CHECK(encode_header({}, InterfaceKind::UNI) == HeaderBytes{0, 0, 0, 0, 0x55});

  CellHeader h;
  h.vpi = 1;
  h.vci = 1;
  CHECK(encode_header(h, InterfaceKind::UNI) == HeaderBytes{0x00, 0x10, 0x00, 0x10, 0x87});

  CellHeader n;
  n.vpi = 4095;
  n.vci = 65535;
  n.clp = true;
  const auto nb = encode_header(n, InterfaceKind::NNI);
  CHECK(nb == HeaderBytes{0xFF, 0xFF, 0xFF, 0xF1, 0xA1});
  n.pti = Pti{true, true, true};
  const auto all = encode_header(n, InterfaceKind::NNI);
  CHECK(all[0] == 0xFF);
  CHECK(all[3] == 0xFF);
}

TEST_CASE("encoding matches the field-list packer") {
  std::mt19937_64 g(2);
  for (auto kind : {InterfaceKind::UNI, InterfaceKind::NNI}) {
    for (int i = 0; i < 5000; ++i) {
      const auto h = random_header(g, kind);
      const auto ref = oracle::pack_header(h, kind);
      REQUIRE(encode_header(h, kind) == HeaderBytes(ref));
    }
  }
}

TEST_CASE("round trip is Valid") {
  std::mt19937_64 g(3);
  for (auto kind : {InterfaceKind::UNI, InterfaceKind::NNI}) {
    for (int i = 0; i < 5000; ++i) {
      const auto h = random_header(g, kind);
      const auto out = decode_header(encode_header(h, kind), kind);
      REQUIRE(std::holds_alternative<Valid>(out));
      REQUIRE(std::get<Valid>(out).header == h);
    }
  }
}

TEST_CASE("field ranges are enforced") {
  CellHeader h;
  h.vpi = 256;
  CHECK_THROWS_AS(encode_header(h, InterfaceKind::UNI), RangeError);
  CHECK_NOTHROW(encode_header(h, InterfaceKind::NNI));
  h.vpi = 4096;
  CHECK_THROWS_AS(encode_header(h, InterfaceKind::NNI), RangeError);
  CellHeader gfc;
  gfc.gfc = 16;
  CHECK_THROWS_AS(encode_header(gfc, InterfaceKind::UNI), RangeError);
}

TEST_CASE("single-bit syndromes are distinct and nonzero") {
  CHECK(syndromes_distinct());
  std::set<std::uint8_t> seen;
  for (unsigned i = 0; i < kHeaderBits; ++i) {
    HeaderBytes zero{};
    const auto e = flip(zero, i);
    // syndrome of an error pattern = CRC of the pattern (linearity, coset cancels)
    const std::uint8_t s = static_cast<std::uint8_t>(oracle::crc8_bitwise(std::span(e.data(), 4)) ^ e[4]);
    CHECK(s == single_bit_syndrome(i));
    CHECK(s != 0);
    seen.insert(s);
  }
  CHECK(seen.size() == kHeaderBits);
}

TEST_CASE("every single flip is corrected") {
  std::mt19937_64 g(4);
  for (auto kind : {InterfaceKind::UNI, InterfaceKind::NNI}) {
    for (int n = 0; n < 50; ++n) {
      const auto h = random_header(g, kind);
      const auto enc = encode_header(h, kind);
      for (unsigned bit = 0; bit < kHeaderBits; ++bit) {
        const auto out = decode_header(flip(enc, bit), kind);
        REQUIRE(std::holds_alternative<Corrected>(out));
        CHECK(std::get<Corrected>(out).header == h);
        CHECK(std::get<Corrected>(out).flipped_bit == bit);
      }
    }
  }
}

TEST_CASE("double flips never decode silently; counts match enumeration") {
  // Oracle classification from syndromes alone.
  std::array<std::uint8_t, kHeaderBits> syn{};
  for (unsigned i = 0; i < kHeaderBits; ++i) {
    const auto e = flip(HeaderBytes{}, i);
    syn[i] = static_cast<std::uint8_t>(oracle::crc8_bitwise(std::span(e.data(), 4)) ^ e[4]);
  }
  std::size_t expect_valid = 0, expect_miscorrect = 0, expect_uncorrectable = 0;
  for (unsigned i = 0; i < kHeaderBits; ++i) {
    for (unsigned j = i + 1; j < kHeaderBits; ++j) {
      const std::uint8_t s = syn[i] ^ syn[j];
      if (s == 0) ++expect_valid;
      else if (std::find(syn.begin(), syn.end(), s) != syn.end()) ++expect_miscorrect;
      else ++expect_uncorrectable;
    }
  }
  CHECK(expect_valid + expect_miscorrect + expect_uncorrectable == 780);
  CHECK(expect_valid == 0);

  std::mt19937_64 g(5);
  for (int n = 0; n < 20; ++n) {
    const auto kind = n % 2 ? InterfaceKind::NNI : InterfaceKind::UNI;
    const auto h = random_header(g, kind);
    const auto enc = encode_header(h, kind);
    std::size_t valid = 0, miscorrect = 0, uncorrectable = 0;
    for (unsigned i = 0; i < kHeaderBits; ++i) {
      for (unsigned j = i + 1; j < kHeaderBits; ++j) {
        const auto out = decode_header(flip(flip(enc, i), j), kind);
        if (std::holds_alternative<Valid>(out)) ++valid;
        else if (std::holds_alternative<Corrected>(out)) ++miscorrect;
        else ++uncorrectable;
      }
    }
    CHECK(valid == expect_valid);
    CHECK(miscorrect == expect_miscorrect);
    CHECK(uncorrectable == expect_uncorrectable);
  }
}

TEST_CASE("UNI and NNI agree on VCI/PTI/CLP positions") {
  std::mt19937_64 g(6);
  for (int i = 0; i < 1000; ++i) {
    auto h = random_header(g, InterfaceKind::UNI);
    h.gfc = 0;
    const auto u = encode_header(h, InterfaceKind::UNI);
    const auto n = encode_header(h, InterfaceKind::NNI);
    CHECK((u[1] & 0x0F) == (n[1] & 0x0F));
    CHECK(u[2] == n[2]);
    CHECK(u[3] == n[3]);
  }
}

TEST_CASE("set_efci") {
  Cell c;
  c.header.vpi = 3;
  c.header.vci = 77;
  for (std::size_t i = 0; i < kPayloadBytes; ++i) c.payload[i] = static_cast<std::uint8_t>(i * 3);
  const auto m = set_efci(c);
  CHECK(m.header.pti.efci);
  CHECK(m.payload == c.payload);
  CHECK(set_efci(m) == m);
  const auto bytes = serialize(m);
  CHECK(std::holds_alternative<Valid>(decode_header(std::span<const std::uint8_t, 5>(bytes.data(), 5), m.kind)));

  Cell mgmt;
  mgmt.header.pti.is_management = true;
  CHECK_THROWS_AS(set_efci(mgmt), InvalidOperation);
}

TEST_CASE("cell serialization is 53 bytes and round trips") {
  std::mt19937_64 g(7);
  Cell c;
  c.kind = InterfaceKind::NNI;
  c.header = random_header(g, c.kind);
  for (auto& b : c.payload) b = static_cast<std::uint8_t>(g());
  const auto bytes = serialize(c);
  CHECK(bytes.size() == 53);
  const auto back = deserialize(bytes, c.kind);
  REQUIRE(back);
  CHECK(*back == c);
}

TEST_CASE("trace lines") {
  Cell c;
  c.header.vci = 42;
  TraceRecord r{0.125, 3, serialize(c)};
  const auto line = format_trace_line(r);
  const auto parsed = parse_trace_line(line);
  REQUIRE(parsed);
  CHECK(parsed->time_s == 0.125);
  CHECK(parsed->port == 3);
  CHECK(parsed->bytes == r.bytes);

  std::string contiguous = "0.5 1 ";
  for (auto b : r.bytes) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02X", b);
    contiguous += buf;
  }
  const auto p2 = parse_trace_line(contiguous);
  REQUIRE(p2);
  CHECK(p2->bytes == r.bytes);

  CHECK_FALSE(parse_trace_line(""));
  CHECK_FALSE(parse_trace_line("abc 1 00"));
  CHECK_FALSE(parse_trace_line("0.1 1 00 11"));
  CHECK_FALSE(parse_trace_line(line + " ff"));
}

TEST_CASE("hex4 parsing") {
  CHECK(parse_hex4("00000000") == std::array<std::uint8_t, 4>{0, 0, 0, 0});
  CHECK(parse_hex4("0A0b0C0d") == std::array<std::uint8_t, 4>{0x0A, 0x0B, 0x0C, 0x0D});
  CHECK_FALSE(parse_hex4("0000000"));
  CHECK_FALSE(parse_hex4("000000000"));
  CHECK_FALSE(parse_hex4("0000000g"));
}

}
