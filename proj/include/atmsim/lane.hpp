#pragma once

// LAN emulation entities. LEC, LES and BUS are plain state machines; the
// simulator feeds them events and carries out the actions they return.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace atmsim::lane {

struct MacAddress {
  std::array<std::uint8_t, 6> bytes{};

  bool is_group() const { return (bytes[0] & 0x01) != 0; }
  static MacAddress broadcast() { return {{0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF}}; }
  static std::optional<MacAddress> parse(std::string_view text);
  std::string to_string() const;

  friend auto operator<=>(const MacAddress&, const MacAddress&) = default;
};

struct AtmAddress {
  std::array<std::uint8_t, 20> bytes{};

  /// Deterministic address for the n-th end system.
  static AtmAddress for_endpoint(std::uint32_t index);
  std::string to_string() const;

  friend auto operator<=>(const AtmAddress&, const AtmAddress&) = default;
};

class RegistrationConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// LE-ARP server directory.
class LesDirectory {
 public:
  /// Idempotent for an identical pair; throws RegistrationConflict when the
  /// MAC is already bound to another ATM address.
  void register_mac(const MacAddress& mac, const AtmAddress& atm);
  std::optional<AtmAddress> handle_arp(const MacAddress& mac) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<MacAddress, AtmAddress> entries_;
};

/// Broadcast and unknown server: floods to every attached LEC but the origin.
class Bus {
 public:
  /// Returns false if the LEC was already attached.
  bool attach(const AtmAddress& lec);
  bool attached(const AtmAddress& lec) const;
  std::vector<AtmAddress> forward(const AtmAddress& origin) const;
  std::size_t size() const { return members_.size(); }

 private:
  std::vector<AtmAddress> members_;
};

// ---------------------------------------------------------------------------
// Wire formats

/// Data frame: dest MAC, source MAC, 2-byte payload length, payload.
struct DataFrame {
  MacAddress dest;
  MacAddress source;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_data_frame(const DataFrame& frame);
std::optional<DataFrame> decode_data_frame(std::span<const std::uint8_t> bytes);

struct ArpRequest {
  MacAddress target;
};
struct ArpReply {
  MacAddress target;
  std::optional<AtmAddress> address;  // nullopt = unknown
};
using ControlMessage = std::variant<ArpRequest, ArpReply>;

std::vector<std::uint8_t> encode_control(const ControlMessage& msg);
std::optional<ControlMessage> decode_control(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// LEC

using VcId = std::uint32_t;

struct LecConfig {
  bool parallel_bus = false;
  std::size_t pending_depth = 64;
  double arp_timeout_s = 1.0;
  double cache_aging_s = 300.0;
};

struct CacheEntry {
  AtmAddress address;
  std::optional<VcId> data_direct;
  double resolved_at = 0.0;
};

// Actions the LEC asks its host to perform.
struct SendToBus {
  DataFrame frame;
};
struct SendDirect {
  VcId vc;
  DataFrame frame;
};
struct SendArpRequest {
  MacAddress target;
  double timeout_at;  // schedule on_arp_timeout(target) then
};
struct SetupDirectVc {
  MacAddress target;
  AtmAddress address;
};
using Action = std::variant<SendToBus, SendDirect, SendArpRequest, SetupDirectVc>;

struct LecCounters {
  std::uint64_t arp_requests = 0;
  std::uint64_t arp_replies = 0;
  std::uint64_t arp_unknown = 0;
  std::uint64_t bus_frames = 0;          // everything handed to the BUS
  std::uint64_t bus_unicast_frames = 0;  // unicast copies sent via the BUS
  std::uint64_t direct_frames = 0;
  std::uint64_t pending_drops = 0;
  std::uint64_t vc_setup_failures = 0;
  // Unicast sends to a MAC resolved at least once before, by path taken.
  std::uint64_t post_resolution_direct = 0;
  std::uint64_t post_resolution_other = 0;
};

class Lec {
 public:
  Lec(MacAddress mac, AtmAddress atm, LecConfig config = {});

  std::vector<Action> send(const DataFrame& frame, double now);

  /// LE-ARP reply arrived. A known address updates the cache and asks for
  /// a data-direct VC; an unknown one leaves frames pending until timeout.
  std::vector<Action> on_arp_reply(const ArpReply& reply, double now);
  /// Data-direct VC is up: flush pending frames to it in order.
  std::vector<Action> on_vc_ready(const MacAddress& target, VcId vc, double now);
  /// VC refused: drop pending frames, keep the address without a VC.
  void on_vc_rejected(const MacAddress& target);
  /// Resolution deadline reached; drops whatever is still pending.
  void on_arp_timeout(const MacAddress& target, double now);

  /// Unexpired cache entry, if any.
  const CacheEntry* lookup(const MacAddress& mac, double now) const;

  const MacAddress& mac() const { return mac_; }
  const AtmAddress& atm() const { return atm_; }
  const LecCounters& counters() const { return counters_; }
  const LecConfig& config() const { return config_; }
  std::size_t pending(const MacAddress& mac) const;

 private:
  struct Pending {
    std::deque<DataFrame> frames;
    double deadline = 0.0;
    bool awaiting_vc = false;
  };

  void drop_pending(const MacAddress& target);

  MacAddress mac_;
  AtmAddress atm_;
  LecConfig config_;
  std::map<MacAddress, CacheEntry> cache_;
  std::map<MacAddress, Pending> pending_;
  std::map<MacAddress, bool> ever_resolved_;
  LecCounters counters_;
};

}  // namespace atmsim::lane
