#include <doctest.h>

#include <cmath>
#include <random>

#include "atmsim/abr.hpp"
#include "atmsim/errors.hpp"

using namespace atmsim;
using namespace atmsim::abr;

namespace {

Cell data_cell(bool efci) {
  Cell c;
  c.header.vci = 40;
  c.header.pti.efci = efci;
  return c;
}

SourceParams params(double pcr, double mcr, double acr, double air) {
  auto p = SourceParams::defaults(pcr, mcr);
  p.initial_acr = acr;
  p.air = air;
  return p;
}

}  // namespace

TEST_SUITE("abr") {

TEST_CASE("defaults") {
  const auto p = SourceParams::defaults(6400, 0);
  CHECK(p.air == 100.0);
  CHECK(p.rdf == 0.875);
  CHECK(p.nrm == 32);
  CHECK(p.initial_acr == 400.0);
  CHECK(SourceParams::defaults(6400, 1000).initial_acr == 1000.0);
  CHECK_NOTHROW(check_params(p));
  auto bad = p;
  bad.rdf = 1.0;
  CHECK_THROWS_AS(check_params(bad), RangeError);
  bad = p;
  bad.mcr = 7000;
  CHECK_THROWS_AS(check_params(bad), RangeError);
}

TEST_CASE("destination windows") {
  AbrDestination d(32);
  int indications = 0;
  for (int i = 0; i < 31; ++i) CHECK_FALSE(d.observe(data_cell(false)));
  auto ind = d.observe(data_cell(false));
  REQUIRE(ind);
  CHECK_FALSE(ind->congested);
  ++indications;

  for (int i = 0; i < 32; ++i) {
    auto r = d.observe(data_cell(i == 17));
    if (r) {
      ++indications;
      CHECK(r->congested);
      CHECK(r->epoch > ind->epoch);
    }
  }
  CHECK(indications == 2);

  AbrDestination e(32);
  int n = 0;
  for (int i = 0; i < 64; ++i)
    if (e.observe(data_cell(false))) ++n;
  CHECK(n == 2);

  Cell mgmt;
  mgmt.header.pti.is_management = true;
  for (int i = 0; i < 100; ++i) CHECK_FALSE(e.observe(mgmt));
}

TEST_CASE("source rules") {
  AbrSource at_pcr(params(1000, 10, 1000, 10));
  CHECK(at_pcr.adjust({false, 1}) == 1000.0);

  AbrSource at_mcr(params(1000, 10, 10, 10));
  CHECK(at_mcr.adjust({true, 1}) == 10.0);

  AbrSource s(params(1000, 0, 100, 10));
  CHECK(s.adjust({false, 1}) == 110.0);
  CHECK(s.adjust({true, 2}) == doctest::Approx(110.0 * 0.875));
  CHECK_THROWS_AS(s.adjust({false, 2}), OrderingError);
  CHECK_THROWS_AS(s.adjust({false, 1}), OrderingError);
}

TEST_CASE("acr stays within [mcr, pcr]") {
  std::mt19937_64 g(1);
  for (int run = 0; run < 200; ++run) {
    const double pcr = 100 + static_cast<double>(g() % 100000);
    const double mcr = (g() % 2) ? 0.0 : pcr * static_cast<double>(g() % 100) / 100.0;
    auto p = SourceParams::defaults(pcr, mcr);
    p.air = pcr * static_cast<double>(1 + g() % 50) / 100.0;
    p.rdf = 0.05 + 0.9 * static_cast<double>(g() % 1000) / 1000.0;
    AbrSource s(p);
    for (std::uint64_t e = 1; e <= 500; ++e) {
      const double acr = s.adjust({(g() % 3) == 0, e});
      REQUIRE(acr >= mcr);
      REQUIRE(acr <= pcr);
    }
  }
}

TEST_CASE("ramp to pcr takes ceil((pcr - initial)/air) epochs") {
  std::mt19937_64 g(2);
  for (int run = 0; run < 200; ++run) {
    // integer rates keep the additions exact
    const double pcr = 1000 + static_cast<double>(g() % 50000);
    auto p = SourceParams::defaults(pcr, 0);
    p.initial_acr = static_cast<double>(g() % static_cast<std::uint64_t>(pcr));
    p.air = 1 + static_cast<double>(g() % 2000);
    AbrSource s(p);
    const auto want = static_cast<std::uint64_t>(std::ceil((pcr - p.initial_acr) / p.air));
    std::uint64_t epochs = 0;
    while (s.acr() < pcr) s.adjust({false, ++epochs});
    CHECK(epochs == want);
  }
}

TEST_CASE("emission schedule") {
  AbrSource s(params(2000, 0, 1000, 10));
  CHECK(s.next_emission(0.5, true) == 0.5);
  s.record_emission(0.5);
  CHECK(*s.next_emission(0.5, true) == doctest::Approx(0.501));
  CHECK_FALSE(s.next_emission(0.5, false));
  // halve the rate: the gap doubles
  for (std::uint64_t e = 1; e <= 5; ++e) s.adjust({true, e});
  const double acr = s.acr();
  s.record_emission(1.0);
  CHECK(*s.next_emission(1.0, true) == doctest::Approx(1.0 + 1.0 / acr));
}

TEST_CASE("feedback payload round trip") {
  for (bool c : {false, true}) {
    const FeedbackIndication f{c, 0x0102030405060708ull};
    const auto p = encode_feedback(f);
    const auto back = decode_feedback(p);
    CHECK(back.congested == c);
    CHECK(back.epoch == f.epoch);
  }
}

}
