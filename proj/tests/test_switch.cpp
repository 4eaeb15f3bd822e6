#include <doctest.h>

#include <random>

#include "atmsim/errors.hpp"
#include "atmsim/switch.hpp"

using namespace atmsim;

namespace {

Cell cell(std::uint16_t vpi, std::uint16_t vci, bool clp = false) {
  Cell c;
  c.header.vpi = vpi;
  c.header.vci = vci;
  c.header.clp = clp;
  for (std::size_t i = 0; i < kPayloadBytes; ++i) c.payload[i] = static_cast<std::uint8_t>(i + vci);
  return c;
}

TrafficDescriptor rate(double pcr, std::optional<double> scr = {}, std::optional<double> mcr = {}) {
  TrafficDescriptor d;
  d.pcr = pcr;
  d.scr = scr;
  d.mcr = mcr;
  return d;
}

}  // namespace

TEST_SUITE("switch") {

TEST_CASE("vc table") {
  VcTable t;
  t.install({1, 1, 100}, {2, 2, 200, InterfaceKind::UNI, ServiceCategory::CBR});
  CHECK(t.size() == 1);
  CHECK_THROWS_AS(t.install({1, 1, 100}, {3, 0, 33, InterfaceKind::UNI, ServiceCategory::CBR}), RangeError);
  CHECK_THROWS_AS(t.install({1, 1, 101}, {3, 300, 33, InterfaceKind::UNI, ServiceCategory::CBR}), RangeError);
  CHECK_NOTHROW(t.install({1, 1, 101}, {3, 300, 33, InterfaceKind::NNI, ServiceCategory::CBR}));
  CHECK(t.find({1, 1, 100})->out_vci == 200);
  CHECK(t.remove({1, 1, 100}));
  CHECK_FALSE(t.remove({1, 1, 100}));
  CHECK(t.find({1, 1, 100}) == nullptr);
}

TEST_CASE("route_cell relabels and keeps payload") {
  VcTable t;
  t.install({1, 1, 100}, {2, 2, 200, InterfaceKind::UNI, ServiceCategory::CBR});
  t.install({0, 5, 50}, {4, 5, 50, InterfaceKind::UNI, ServiceCategory::UBR});
  auto in = cell(1, 100);
  in.header.pti.aal5_last = true;
  in.header.clp = true;
  const auto out = route_cell(t, in, 1);
  REQUIRE(std::holds_alternative<Routed>(out));
  const auto& r = std::get<Routed>(out);
  CHECK(r.out_port == 2);
  CHECK(r.cell.header.vpi == 2);
  CHECK(r.cell.header.vci == 200);
  CHECK(r.cell.header.pti == in.header.pti);
  CHECK(r.cell.header.clp);
  CHECK(r.cell.payload == in.payload);

  const auto same = route_cell(t, cell(5, 50), 0);
  REQUIRE(std::holds_alternative<Routed>(same));
  CHECK(std::get<Routed>(same).cell == cell(5, 50));

  const auto miss = route_cell(t, cell(1, 100), 0);
  REQUIRE(std::holds_alternative<RouteDrop>(miss));
  CHECK(std::get<RouteDrop>(miss).reason == DropReason::UnknownVc);
}

TEST_CASE("route_cell onto an NNI port") {
  VcTable t;
  t.install({0, 1, 40}, {1, 3000, 41, InterfaceKind::NNI, ServiceCategory::CBR});
  auto in = cell(1, 40);
  in.header.gfc = 9;
  const auto out = route_cell(t, in, 0);
  REQUIRE(std::holds_alternative<Routed>(out));
  const auto& c = std::get<Routed>(out).cell;
  CHECK(c.kind == InterfaceKind::NNI);
  CHECK(c.header.vpi == 3000);
  CHECK(c.header.gfc == 0);
}

TEST_CASE("queue thresholds") {
  QueueConfig qc{10, 6, 4};
  OutputQueue<Cell> q(qc);
  CHECK(std::get<Accepted>(q.enqueue(cell(0, 32))).efci_marked == false);
  while (q.occupancy() < 4) q.enqueue(cell(0, 32));
  auto r = q.enqueue(cell(0, 32));  // occupancy becomes 5 > 4
  CHECK(std::get<Accepted>(r).efci_marked);
  while (q.occupancy() < 6) q.enqueue(cell(0, 32));
  r = q.enqueue(cell(0, 32, true));
  REQUIRE(std::holds_alternative<Discarded>(r));
  CHECK(std::get<Discarded>(r).reason == DropReason::ClpThreshold);
  CHECK(std::holds_alternative<Accepted>(q.enqueue(cell(0, 32))));
  while (q.occupancy() < 10) q.enqueue(cell(0, 32));
  r = q.enqueue(cell(0, 32));
  REQUIRE(std::holds_alternative<Discarded>(r));
  CHECK(std::get<Discarded>(r).reason == DropReason::Full);

  // the first four stay unmarked, everything after is marked
  for (int i = 0; i < 10; ++i) {
    const auto c = q.dequeue();
    REQUIRE(c);
    CHECK(c->header.pti.efci == (i >= 4));
  }
  CHECK(q.empty());
  CHECK_THROWS(OutputQueue<Cell>(QueueConfig{4, 5, 1}));
}

TEST_CASE("management cells are not marked") {
  OutputQueue<Cell> q(QueueConfig{4, 4, 0});
  auto m = cell(0, 32);
  m.header.pti.is_management = true;
  CHECK_FALSE(std::get<Accepted>(q.enqueue(m)).efci_marked);
  CHECK_FALSE(q.dequeue()->header.pti.efci);
}

TEST_CASE("default thresholds") {
  const auto qc = QueueConfig::with_capacity(100);
  CHECK(qc.clp_threshold == 90);
  CHECK(qc.efci_threshold == 80);
  const auto p = QueueConfig::plain(7);
  CHECK(p.clp_threshold == 7);
  CHECK(p.efci_threshold == 7);
}

TEST_CASE("fifo order per port") {
  OutputQueue<Cell> q(QueueConfig::plain(100));
  for (std::uint16_t v = 0; v < 50; ++v) q.enqueue(cell(0, v));
  for (std::uint16_t v = 0; v < 50; ++v) CHECK(q.dequeue()->header.vci == v);
}

TEST_CASE("cac examples") {
  LinkBooking link(1000.0);
  CHECK(std::holds_alternative<Accept>(cac_admit(link, "a", ServiceCategory::CBR, rate(1000))));
  CHECK(std::holds_alternative<Reject>(cac_admit(link, "b", ServiceCategory::CBR, rate(1))));
  CHECK(std::holds_alternative<Accept>(cac_admit(link, "u", ServiceCategory::UBR, rate(1e6))));
  CHECK(std::holds_alternative<Accept>(cac_admit(link, "r", ServiceCategory::ABR, rate(500, {}, 0.0))));
  CHECK(std::holds_alternative<Reject>(cac_admit(link, "r2", ServiceCategory::ABR, rate(500, {}, 1.0))));
  CHECK(link.booked_total() == 1000.0);
  CHECK(std::holds_alternative<Reject>(cac_admit(link, "a", ServiceCategory::CBR, rate(1))));
}

TEST_CASE("cac books by category") {
  LinkBooking link(10000.0, 2.0);
  CHECK(link.limit() == 20000.0);
  cac_admit(link, "c", ServiceCategory::CBR, rate(3000));
  cac_admit(link, "v", ServiceCategory::VBR_RT, rate(5000, 1000.0));
  cac_admit(link, "n", ServiceCategory::VBR_NRT, rate(5000, 2000.0));
  cac_admit(link, "a", ServiceCategory::ABR, rate(5000, {}, 400.0));
  CHECK(link.booked_cbr() == 3000.0);
  CHECK(link.booked_vbr() == 3000.0);
  CHECK(link.booked_abr() == 400.0);
  CHECK(link.booked_total() == 6400.0);
}

TEST_CASE("route admission is all or nothing") {
  LinkBooking a(1000.0), b(500.0);
  LinkBooking* route[] = {&a, &b};
  CHECK(std::holds_alternative<Reject>(CacBooker::admit(route, "x", ServiceCategory::CBR, rate(600))));
  CHECK(a.booked_total() == 0.0);
  CHECK(b.booked_total() == 0.0);
  CHECK(std::holds_alternative<Accept>(CacBooker::admit(route, "y", ServiceCategory::CBR, rate(400))));
  CHECK(a.holds("y"));
  CHECK(b.holds("y"));
  CacBooker::release(route, "y");
  CHECK_FALSE(a.holds("y"));
  CHECK(b.booked_total() == 0.0);
}

TEST_CASE("randomized admit/release never overbooks") {
  std::mt19937_64 g(9);
  LinkBooking link(10000.0);
  std::vector<std::string> live;
  int next = 0;
  for (int step = 0; step < 1000; ++step) {
    if (live.empty() || g() % 3 != 0) {
      const std::string id = "c" + std::to_string(next++);
      const double pcr = 1.0 + static_cast<double>(g() % 4000);
      const auto d = cac_admit(link, id, ServiceCategory::CBR, rate(pcr));
      const bool fits = link.booked_cbr() <= link.limit();
      if (std::holds_alternative<Accept>(d)) live.push_back(id);
      CHECK(fits);
    } else {
      const auto k = g() % live.size();
      LinkBooking* route[] = {&link};
      CacBooker::release(route, live[k]);
      live.erase(live.begin() + static_cast<long>(k));
    }
    REQUIRE(link.booked_cbr() <= link.limit());
    REQUIRE(link.booked_cbr() >= 0.0);
  }
}

}
