#pragma once

// Output-queued switch building blocks: VPI/VCI translation, per-port FIFO
// with CLP-selective discard and EFCI marking, and connection admission.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "atmsim/cell.hpp"
#include "atmsim/traffic.hpp"

namespace atmsim {

struct VcKey {
  unsigned port = 0;
  std::uint16_t vpi = 0;
  std::uint16_t vci = 0;
  friend auto operator<=>(const VcKey&, const VcKey&) = default;
};

struct VcTableEntry {
  unsigned out_port = 0;
  std::uint16_t out_vpi = 0;
  std::uint16_t out_vci = 0;
  InterfaceKind out_kind = InterfaceKind::UNI;
  ServiceCategory category = ServiceCategory::UBR;
};

class VcTable {
 public:
  /// Throws RangeError when the key is taken or the outgoing labels do not
  /// fit `entry.out_kind`.
  void install(const VcKey& key, const VcTableEntry& entry);
  bool remove(const VcKey& key);
  const VcTableEntry* find(const VcKey& key) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<VcKey, VcTableEntry> entries_;
};

enum class DropReason { UnknownVc, Full, ClpThreshold, HecUncorrectable, Policer, ShaperOverflow };

const char* to_string(DropReason r);

struct Routed {
  Cell cell;
  unsigned out_port = 0;
};

struct RouteDrop {
  DropReason reason = DropReason::UnknownVc;
};

using RouteResult = std::variant<Routed, RouteDrop>;

/// Rewrites VPI/VCI per the table. PTI, CLP, GFC-free payload are kept.
RouteResult route_cell(const VcTable& table, const Cell& cell, unsigned in_port);

struct QueueConfig {
  std::size_t capacity = 256;
  std::size_t clp_threshold = 230;
  std::size_t efci_threshold = 204;

  /// Thresholds at 90% (CLP) and 80% (EFCI) of capacity.
  static QueueConfig with_capacity(std::size_t capacity);
  /// No selective discard or marking; drops only when full.
  static QueueConfig plain(std::size_t capacity);
};

struct Accepted {
  bool efci_marked = false;
};

struct Discarded {
  DropReason reason = DropReason::Full;
};

using EnqueueResult = std::variant<Accepted, Discarded>;

inline Cell& cell_of(Cell& c) { return c; }
inline const Cell& cell_of(const Cell& c) { return c; }

/// FIFO output queue. `Item` is a Cell or any type with a `cell_of`
/// overload returning its Cell.
template <typename Item>
class OutputQueue {
 public:
  explicit OutputQueue(QueueConfig config = {}) : config_(config) {
    if (config_.clp_threshold > config_.capacity || config_.efci_threshold > config_.capacity)
      throw std::invalid_argument("queue thresholds exceed capacity");
  }

  EnqueueResult enqueue(Item item) {
    const Cell& c = cell_of(item);
    if (c.header.clp && items_.size() >= config_.clp_threshold)
      return Discarded{DropReason::ClpThreshold};
    if (items_.size() >= config_.capacity) return Discarded{DropReason::Full};
    items_.push_back(std::move(item));
    Cell& stored = cell_of(items_.back());
    bool marked = false;
    if (items_.size() > config_.efci_threshold && !stored.header.pti.is_management) {
      marked = !stored.header.pti.efci;
      stored = set_efci(stored);
    }
    return Accepted{marked};
  }

  std::optional<Item> dequeue() {
    if (items_.empty()) return std::nullopt;
    Item front = std::move(items_.front());
    items_.pop_front();
    return front;
  }

  std::size_t occupancy() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const QueueConfig& config() const { return config_; }

 private:
  QueueConfig config_;
  std::deque<Item> items_;
};

struct SwitchCounters {
  std::uint64_t routed = 0;
  std::uint64_t unknown_vc = 0;
  std::uint64_t full_drops = 0;
  std::uint64_t clp_threshold_drops = 0;
  std::uint64_t efci_marks = 0;
  std::uint64_t hec_corrected = 0;
  std::uint64_t hec_dropped = 0;
  std::uint64_t policer_tagged = 0;
  std::uint64_t policer_dropped = 0;
};

// ---------------------------------------------------------------------------
// Connection admission control

/// Bandwidth booked on one link direction, in cells/second.
class LinkBooking {
 public:
  LinkBooking(double capacity_cells_per_s, double booking_factor = 1.0);

  double capacity() const { return capacity_; }
  double booking_factor() const { return factor_; }
  double limit() const { return capacity_ * factor_; }

  double booked_cbr() const { return sum(ServiceCategory::CBR); }
  double booked_vbr() const;
  double booked_abr() const { return sum(ServiceCategory::ABR); }
  double booked_total() const;

  bool holds(const std::string& connection) const { return bookings_.count(connection) != 0; }

 private:
  friend class CacBooker;
  double sum(ServiceCategory c) const;

  struct Entry {
    ServiceCategory category;
    double amount;
  };
  double capacity_;
  double factor_;
  std::map<std::string, Entry> bookings_;
};

/// Rate a contract books: PCR for CBR, SCR for VBR, MCR for ABR, none for UBR.
double booked_rate(ServiceCategory category, const TrafficDescriptor& descriptor);

struct Accept {};
struct Reject {
  std::string reason;
};
using CacDecision = std::variant<Accept, Reject>;

class CacBooker {
 public:
  /// All-or-nothing admission over every link on a route. On Accept the
  /// rate is booked on each link under `connection`.
  static CacDecision admit(std::span<LinkBooking* const> route, const std::string& connection,
                           ServiceCategory category, const TrafficDescriptor& descriptor);
  static void release(std::span<LinkBooking* const> route, const std::string& connection);
};

inline CacDecision cac_admit(LinkBooking& link, const std::string& connection,
                             ServiceCategory category, const TrafficDescriptor& descriptor) {
  LinkBooking* route[] = {&link};
  return CacBooker::admit(route, connection, category, descriptor);
}

}  // namespace atmsim
