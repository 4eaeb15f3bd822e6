#include <doctest.h>

#include "atmsim/lane.hpp"

using namespace atmsim::lane;

namespace {

MacAddress mac(std::uint8_t last) { return {{0x02, 0, 0, 0, 0, last}}; }

DataFrame frame(const MacAddress& to, const MacAddress& from, std::uint8_t tag) {
  return {to, from, {tag, 1, 2, 3}};
}

template <typename T>
std::size_t count(const std::vector<Action>& a) {
  return static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [](const Action& x) {
    return std::holds_alternative<T>(x);
  }));
}

}  // namespace

TEST_SUITE("lane") {

TEST_CASE("mac parsing") {
  const auto m = MacAddress::parse("02:00:00:00:00:1f");
  REQUIRE(m);
  CHECK(*m == mac(0x1f));
  CHECK(m->to_string() == "02:00:00:00:00:1f");
  CHECK_FALSE(m->is_group());
  CHECK(MacAddress::parse("broadcast") == MacAddress::broadcast());
  CHECK(MacAddress::broadcast().is_group());
  CHECK(MacAddress::parse("01:00:5e:00:00:01")->is_group());
  CHECK_FALSE(MacAddress::parse("02:00:00:00:00"));
  CHECK_FALSE(MacAddress::parse("zz:00:00:00:00:00"));
}

TEST_CASE("atm addresses are unique per endpoint") {
  CHECK(AtmAddress::for_endpoint(1) != AtmAddress::for_endpoint(2));
  CHECK(AtmAddress::for_endpoint(7) == AtmAddress::for_endpoint(7));
}

TEST_CASE("les registration") {
  LesDirectory les;
  les.register_mac(mac(1), AtmAddress::for_endpoint(1));
  CHECK(les.size() == 1);
  CHECK_NOTHROW(les.register_mac(mac(1), AtmAddress::for_endpoint(1)));
  CHECK(les.size() == 1);
  CHECK_THROWS_AS(les.register_mac(mac(1), AtmAddress::for_endpoint(2)), RegistrationConflict);
  CHECK(les.handle_arp(mac(1)) == AtmAddress::for_endpoint(1));
  CHECK_FALSE(les.handle_arp(mac(9)));
}

TEST_CASE("bus forwarding") {
  Bus bus;
  const auto a = AtmAddress::for_endpoint(1), b = AtmAddress::for_endpoint(2), c = AtmAddress::for_endpoint(3);
  CHECK(bus.attach(a));
  CHECK_FALSE(bus.attach(a));
  CHECK(bus.forward(a).empty());
  bus.attach(b);
  bus.attach(c);
  const auto out = bus.forward(b);
  CHECK(out.size() == 2);
  CHECK(std::find(out.begin(), out.end(), b) == out.end());

  Bus big;
  for (std::uint32_t i = 0; i < 16; ++i) big.attach(AtmAddress::for_endpoint(i));
  CHECK(big.forward(AtmAddress::for_endpoint(5)).size() == 15);
}

TEST_CASE("wire formats round trip") {
  const DataFrame f{mac(2), mac(1), {1, 2, 3, 4, 5}};
  const auto bytes = encode_data_frame(f);
  CHECK(bytes.size() == 14 + 5);
  const auto back = decode_data_frame(bytes);
  REQUIRE(back);
  CHECK(back->dest == f.dest);
  CHECK(back->source == f.source);
  CHECK(back->payload == f.payload);
  CHECK_FALSE(decode_data_frame(std::vector<std::uint8_t>(5)));

  const ControlMessage req = ArpRequest{mac(3)};
  const auto rb = encode_control(req);
  CHECK(rb.size() == 28);
  REQUIRE(decode_control(rb));
  CHECK(std::get<ArpRequest>(*decode_control(rb)).target == mac(3));
  const ControlMessage rep = ArpReply{mac(3), AtmAddress::for_endpoint(3)};
  const auto back_rep = std::get<ArpReply>(*decode_control(encode_control(rep)));
  CHECK(back_rep.address == AtmAddress::for_endpoint(3));
  const ControlMessage unknown = ArpReply{mac(4), std::nullopt};
  CHECK_FALSE(std::get<ArpReply>(*decode_control(encode_control(unknown))).address);
}

TEST_CASE("broadcast goes to the bus") {
  Lec lec(mac(1), AtmAddress::for_endpoint(1));
  const auto a = lec.send(frame(MacAddress::broadcast(), mac(1), 0), 0.0);
  REQUIRE(a.size() == 1);
  CHECK(std::holds_alternative<SendToBus>(a[0]));
  CHECK(lec.counters().bus_frames == 1);
}

TEST_CASE("three-step resolution without the parallel bus") {
  Lec lec(mac(1), AtmAddress::for_endpoint(1));
  auto a = lec.send(frame(mac(2), mac(1), 0), 0.0);
  REQUIRE(a.size() == 1);
  CHECK(std::get<SendArpRequest>(a[0]).target == mac(2));
  CHECK(std::get<SendArpRequest>(a[0]).timeout_at == 1.0);
  CHECK(lec.pending(mac(2)) == 1);

  for (std::uint8_t k = 1; k < 5; ++k) CHECK(lec.send(frame(mac(2), mac(1), k), 0.001).empty());
  CHECK(lec.pending(mac(2)) == 5);
  CHECK(lec.counters().arp_requests == 1);

  a = lec.on_arp_reply({mac(2), AtmAddress::for_endpoint(2)}, 0.002);
  REQUIRE(a.size() == 1);
  CHECK(std::get<SetupDirectVc>(a[0]).address == AtmAddress::for_endpoint(2));
  REQUIRE(lec.lookup(mac(2), 0.002));
  CHECK(lec.lookup(mac(2), 0.002)->address == AtmAddress::for_endpoint(2));

  a = lec.on_vc_ready(mac(2), 77, 0.003);
  REQUIRE(a.size() == 5);
  for (std::uint8_t k = 0; k < 5; ++k) {
    const auto& s = std::get<SendDirect>(a[k]);
    CHECK(s.vc == 77);
    CHECK(s.frame.payload[0] == k);
  }
  CHECK(lec.pending(mac(2)) == 0);

  // step 1 from now on: one copy, direct, no LE-ARP
  a = lec.send(frame(mac(2), mac(1), 9), 0.01);
  REQUIRE(a.size() == 1);
  CHECK(std::get<SendDirect>(a[0]).vc == 77);
  CHECK(lec.counters().arp_requests == 1);
  CHECK(lec.counters().post_resolution_direct == 1);
  CHECK(lec.counters().post_resolution_other == 0);
}

TEST_CASE("parallel bus sends a copy while resolving") {
  LecConfig cfg;
  cfg.parallel_bus = true;
  Lec lec(mac(1), AtmAddress::for_endpoint(1), cfg);
  const auto a = lec.send(frame(mac(2), mac(1), 0), 0.0);
  CHECK(count<SendArpRequest>(a) == 1);
  CHECK(count<SendToBus>(a) == 1);
  CHECK(lec.counters().bus_unicast_frames == 1);
}

TEST_CASE("unknown reply drops pending frames at the timeout") {
  Lec lec(mac(1), AtmAddress::for_endpoint(1));
  lec.send(frame(mac(9), mac(1), 0), 0.0);
  lec.send(frame(mac(9), mac(1), 1), 0.1);
  CHECK(lec.on_arp_reply({mac(9), std::nullopt}, 0.2).empty());
  CHECK(lec.counters().arp_unknown == 1);
  CHECK(lec.pending(mac(9)) == 2);
  lec.on_arp_timeout(mac(9), 0.5);  // early: ignored
  CHECK(lec.pending(mac(9)) == 2);
  lec.on_arp_timeout(mac(9), 1.0);
  CHECK(lec.pending(mac(9)) == 0);
  CHECK(lec.counters().pending_drops == 2);
}

TEST_CASE("pending queue overflow") {
  LecConfig cfg;
  cfg.pending_depth = 3;
  Lec lec(mac(1), AtmAddress::for_endpoint(1), cfg);
  for (std::uint8_t k = 0; k < 5; ++k) lec.send(frame(mac(2), mac(1), k), 0.0);
  CHECK(lec.pending(mac(2)) == 3);
  CHECK(lec.counters().pending_drops == 2);
}

TEST_CASE("rejected vc keeps the address only") {
  Lec lec(mac(1), AtmAddress::for_endpoint(1));
  lec.send(frame(mac(2), mac(1), 0), 0.0);
  lec.on_arp_reply({mac(2), AtmAddress::for_endpoint(2)}, 0.001);
  lec.on_vc_rejected(mac(2));
  CHECK(lec.counters().vc_setup_failures == 1);
  CHECK(lec.counters().pending_drops == 1);
  const auto* e = lec.lookup(mac(2), 0.002);
  REQUIRE(e);
  CHECK_FALSE(e->data_direct);
  // next frame retries the VC without another LE-ARP
  const auto a = lec.send(frame(mac(2), mac(1), 1), 0.003);
  REQUIRE(a.size() == 1);
  CHECK(std::holds_alternative<SetupDirectVc>(a[0]));
  CHECK(lec.counters().arp_requests == 1);
}

TEST_CASE("cache entries age out") {
  LecConfig cfg;
  cfg.cache_aging_s = 10.0;
  Lec lec(mac(1), AtmAddress::for_endpoint(1), cfg);
  lec.send(frame(mac(2), mac(1), 0), 0.0);
  lec.on_arp_reply({mac(2), AtmAddress::for_endpoint(2)}, 0.0);
  lec.on_vc_ready(mac(2), 5, 0.0);
  CHECK(lec.lookup(mac(2), 9.9));
  CHECK_FALSE(lec.lookup(mac(2), 10.1));
  const auto a = lec.send(frame(mac(2), mac(1), 1), 10.1);
  REQUIRE(a.size() == 1);
  CHECK(std::holds_alternative<SendArpRequest>(a[0]));
}

}
