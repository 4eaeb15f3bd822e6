#include "atmsim/lane.hpp"

#include <algorithm>
#include <cstdio>

namespace atmsim::lane {
namespace {

constexpr std::uint8_t kOpArpRequest = 1;
constexpr std::uint8_t kOpArpReply = 2;
constexpr std::size_t kMacHeaderBytes = 14;

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

template <std::size_t N>
std::string hex_join(const std::array<std::uint8_t, N>& bytes, const char* sep) {
  std::string out;
  char buf[4];
  for (std::size_t i = 0; i < N; ++i) {
    if (i && *sep) out += sep;
    std::snprintf(buf, sizeof buf, "%02x", bytes[i]);
    out += buf;
  }
  return out;
}

}  // namespace

std::optional<MacAddress> MacAddress::parse(std::string_view text) {
  if (text == "broadcast") return broadcast();
  if (text.size() != 17) return std::nullopt;
  MacAddress mac;
  for (std::size_t i = 0; i < 6; ++i) {
    const int hi = hex_value(text[3 * i]);
    const int lo = hex_value(text[3 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    if (i < 5 && text[3 * i + 2] != ':' && text[3 * i + 2] != '-') return std::nullopt;
    mac.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return mac;
}

std::string MacAddress::to_string() const { return hex_join(bytes, ":"); }

AtmAddress AtmAddress::for_endpoint(std::uint32_t index) {
  // NSAP-style: private AFI 0x47, a fixed prefix, then the index as ESI.
  AtmAddress a;
  a.bytes[0] = 0x47;
  a.bytes[1] = 0x00;
  a.bytes[2] = 0x05;
  for (int k = 0; k < 4; ++k) a.bytes[15 + k] = static_cast<std::uint8_t>(index >> (24 - 8 * k));
  return a;
}

std::string AtmAddress::to_string() const { return hex_join(bytes, ""); }

// ---------------------------------------------------------------------------

void LesDirectory::register_mac(const MacAddress& mac, const AtmAddress& atm) {
  auto [it, inserted] = entries_.emplace(mac, atm);
  if (!inserted && it->second != atm)
    throw RegistrationConflict("MAC " + mac.to_string() + " already registered to " +
                               it->second.to_string());
}

std::optional<AtmAddress> LesDirectory::handle_arp(const MacAddress& mac) const {
  auto it = entries_.find(mac);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool Bus::attach(const AtmAddress& lec) {
  if (attached(lec)) return false;
  members_.push_back(lec);
  return true;
}

bool Bus::attached(const AtmAddress& lec) const {
  return std::find(members_.begin(), members_.end(), lec) != members_.end();
}

std::vector<AtmAddress> Bus::forward(const AtmAddress& origin) const {
  std::vector<AtmAddress> out;
  out.reserve(members_.size());
  for (const auto& m : members_)
    if (m != origin) out.push_back(m);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_data_frame(const DataFrame& f) {
  std::vector<std::uint8_t> out;
  out.reserve(kMacHeaderBytes + f.payload.size());
  out.insert(out.end(), f.dest.bytes.begin(), f.dest.bytes.end());
  out.insert(out.end(), f.source.bytes.begin(), f.source.bytes.end());
  out.push_back(static_cast<std::uint8_t>(f.payload.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(f.payload.size() & 0xFF));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

std::optional<DataFrame> decode_data_frame(std::span<const std::uint8_t> b) {
  if (b.size() < kMacHeaderBytes) return std::nullopt;
  DataFrame f;
  std::copy_n(b.begin(), 6, f.dest.bytes.begin());
  std::copy_n(b.begin() + 6, 6, f.source.bytes.begin());
  const std::size_t len = (std::size_t{b[12]} << 8) | b[13];
  if (b.size() != kMacHeaderBytes + len) return std::nullopt;
  f.payload.assign(b.begin() + kMacHeaderBytes, b.end());
  return f;
}

std::vector<std::uint8_t> encode_control(const ControlMessage& msg) {
  std::vector<std::uint8_t> out(1 + 6 + 1 + 20, 0);
  if (const auto* req = std::get_if<ArpRequest>(&msg)) {
    out[0] = kOpArpRequest;
    std::copy(req->target.bytes.begin(), req->target.bytes.end(), out.begin() + 1);
  } else {
    const auto& rep = std::get<ArpReply>(msg);
    out[0] = kOpArpReply;
    std::copy(rep.target.bytes.begin(), rep.target.bytes.end(), out.begin() + 1);
    out[7] = rep.address ? 1 : 0;
    if (rep.address) std::copy(rep.address->bytes.begin(), rep.address->bytes.end(), out.begin() + 8);
  }
  return out;
}

std::optional<ControlMessage> decode_control(std::span<const std::uint8_t> b) {
  if (b.size() != 28) return std::nullopt;
  MacAddress target;
  std::copy_n(b.begin() + 1, 6, target.bytes.begin());
  if (b[0] == kOpArpRequest) return ArpRequest{target};
  if (b[0] != kOpArpReply) return std::nullopt;
  ArpReply rep{target, std::nullopt};
  if (b[7]) {
    AtmAddress a;
    std::copy_n(b.begin() + 8, 20, a.bytes.begin());
    rep.address = a;
  }
  return rep;
}

// ---------------------------------------------------------------------------

Lec::Lec(MacAddress mac, AtmAddress atm, LecConfig config)
    : mac_(mac), atm_(atm), config_(config) {}

const CacheEntry* Lec::lookup(const MacAddress& mac, double now) const {
  auto it = cache_.find(mac);
  if (it == cache_.end()) return nullptr;
  if (now - it->second.resolved_at >= config_.cache_aging_s) return nullptr;
  return &it->second;
}

std::size_t Lec::pending(const MacAddress& mac) const {
  auto it = pending_.find(mac);
  return it == pending_.end() ? 0 : it->second.frames.size();
}

std::vector<Action> Lec::send(const DataFrame& frame, double now) {
  std::vector<Action> actions;
  if (frame.dest.is_group()) {
    ++counters_.bus_frames;
    actions.push_back(SendToBus{frame});
    return actions;
  }

  const bool resolved_before = ever_resolved_.count(frame.dest) != 0;
  if (auto it = cache_.find(frame.dest); it != cache_.end() && !lookup(frame.dest, now))
    cache_.erase(it);  // aged out

  const CacheEntry* entry = lookup(frame.dest, now);
  if (entry && entry->data_direct) {
    ++counters_.direct_frames;
    if (resolved_before) ++counters_.post_resolution_direct;
    actions.push_back(SendDirect{*entry->data_direct, frame});
    return actions;
  }
  if (resolved_before) ++counters_.post_resolution_other;

  auto [pit, fresh] = pending_.try_emplace(frame.dest);
  Pending& p = pit->second;
  if (p.frames.size() >= config_.pending_depth) {
    ++counters_.pending_drops;
    return actions;
  }
  p.frames.push_back(frame);

  if (fresh) {
    if (entry) {
      // Address known but no VC (an earlier setup was refused).
      p.awaiting_vc = true;
      actions.push_back(SetupDirectVc{frame.dest, entry->address});
    } else {
      ++counters_.arp_requests;
      p.deadline = now + config_.arp_timeout_s;
      actions.push_back(SendArpRequest{frame.dest, p.deadline});
    }
  }
  if (config_.parallel_bus && !p.awaiting_vc) {
    ++counters_.bus_frames;
    ++counters_.bus_unicast_frames;
    actions.push_back(SendToBus{frame});
  }
  return actions;
}

std::vector<Action> Lec::on_arp_reply(const ArpReply& reply, double now) {
  std::vector<Action> actions;
  ++counters_.arp_replies;
  if (!reply.address) {
    ++counters_.arp_unknown;
    return actions;
  }
  auto& entry = cache_[reply.target];
  const bool had_vc = entry.data_direct.has_value() && entry.address == *reply.address;
  entry.address = *reply.address;
  entry.resolved_at = now;
  if (!had_vc) entry.data_direct.reset();
  ever_resolved_[reply.target] = true;

  auto pit = pending_.find(reply.target);
  if (had_vc) {
    if (pit != pending_.end()) return on_vc_ready(reply.target, *entry.data_direct, now);
    return actions;
  }
  if (pit != pending_.end()) {
    if (pit->second.awaiting_vc) return actions;
    pit->second.awaiting_vc = true;
  }
  actions.push_back(SetupDirectVc{reply.target, *reply.address});
  return actions;
}

std::vector<Action> Lec::on_vc_ready(const MacAddress& target, VcId vc, double /*now*/) {
  std::vector<Action> actions;
  if (auto it = cache_.find(target); it != cache_.end()) it->second.data_direct = vc;
  auto pit = pending_.find(target);
  if (pit == pending_.end()) return actions;
  for (auto& f : pit->second.frames) {
    ++counters_.direct_frames;
    actions.push_back(SendDirect{vc, std::move(f)});
  }
  pending_.erase(pit);
  return actions;
}

void Lec::on_vc_rejected(const MacAddress& target) {
  ++counters_.vc_setup_failures;
  drop_pending(target);
}

void Lec::on_arp_timeout(const MacAddress& target, double now) {
  auto pit = pending_.find(target);
  if (pit == pending_.end() || pit->second.awaiting_vc) return;
  if (now < pit->second.deadline) return;  // stale timer from an earlier request
  drop_pending(target);
}

void Lec::drop_pending(const MacAddress& target) {
  auto pit = pending_.find(target);
  if (pit == pending_.end()) return;
  counters_.pending_drops += pit->second.frames.size();
  pending_.erase(pit);
}

}  // namespace atmsim::lane
