#include "atmsim/switch.hpp"

#include <stdexcept>

#include "atmsim/errors.hpp"

namespace atmsim {

void VcTable::install(const VcKey& key, const VcTableEntry& entry) {
  if (entries_.count(key))
    throw RangeError("VC " + std::to_string(key.vpi) + "/" + std::to_string(key.vci) +
                     " already in use on port " + std::to_string(key.port));
  if (entry.out_vpi > max_vpi(entry.out_kind))
    throw RangeError("outgoing VPI " + std::to_string(entry.out_vpi) + " out of range for " +
                     std::string(to_string(entry.out_kind)));
  entries_.emplace(key, entry);
}

bool VcTable::remove(const VcKey& key) { return entries_.erase(key) != 0; }

const VcTableEntry* VcTable::find(const VcKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const char* to_string(DropReason r) {
  switch (r) {
    case DropReason::UnknownVc: return "UnknownVc";
    case DropReason::Full: return "Full";
    case DropReason::ClpThreshold: return "ClpThreshold";
    case DropReason::HecUncorrectable: return "HecUncorrectable";
    case DropReason::Policer: return "Policer";
    case DropReason::ShaperOverflow: return "ShaperOverflow";
  }
  return "?";
}

RouteResult route_cell(const VcTable& table, const Cell& cell, unsigned in_port) {
  const auto* e = table.find({in_port, cell.header.vpi, cell.header.vci});
  if (!e) return RouteDrop{DropReason::UnknownVc};
  Cell out = cell;
  out.kind = e->out_kind;
  out.header.vpi = e->out_vpi;
  out.header.vci = e->out_vci;
  // GFC has no meaning past the UNI
  if (out.kind == InterfaceKind::NNI) out.header.gfc = 0;
  return Routed{out, e->out_port};
}

QueueConfig QueueConfig::with_capacity(std::size_t capacity) {
  return {capacity, capacity * 9 / 10, capacity * 8 / 10};
}

QueueConfig QueueConfig::plain(std::size_t capacity) { return {capacity, capacity, capacity}; }

// ---------------------------------------------------------------------------

LinkBooking::LinkBooking(double capacity_cells_per_s, double booking_factor)
    : capacity_(capacity_cells_per_s), factor_(booking_factor) {
  if (!(capacity_ > 0.0) || !(factor_ > 0.0))
    throw RangeError("link capacity and booking factor must be positive");
}

double LinkBooking::sum(ServiceCategory c) const {
  double s = 0.0;
  for (const auto& [id, e] : bookings_)
    if (e.category == c) s += e.amount;
  return s;
}

double LinkBooking::booked_vbr() const {
  return sum(ServiceCategory::VBR_RT) + sum(ServiceCategory::VBR_NRT);
}

double LinkBooking::booked_total() const {
  double s = 0.0;
  for (const auto& [id, e] : bookings_) s += e.amount;
  return s;
}

double booked_rate(ServiceCategory category, const TrafficDescriptor& d) {
  switch (category) {
    case ServiceCategory::CBR: return d.pcr;
    case ServiceCategory::VBR_RT:
    case ServiceCategory::VBR_NRT: return d.scr.value_or(d.pcr);
    case ServiceCategory::ABR: return d.mcr.value_or(0.0);
    case ServiceCategory::UBR: return 0.0;
  }
  return 0.0;
}

CacDecision CacBooker::admit(std::span<LinkBooking* const> route, const std::string& connection,
                             ServiceCategory category, const TrafficDescriptor& descriptor) {
  // UBR is never refused for lack of bandwidth and books nothing.
  if (category == ServiceCategory::UBR) return Accept{};

  for (auto* link : route)
    if (link->holds(connection)) return Reject{"connection " + connection + " already booked"};

  const double rate = booked_rate(category, descriptor);
  for (std::size_t i = 0; i < route.size(); ++i) {
    auto* link = route[i];
    link->bookings_.emplace(connection, LinkBooking::Entry{category, rate});
    if (link->booked_total() > link->limit()) {
      for (std::size_t k = 0; k <= i; ++k) route[k]->bookings_.erase(connection);
      return Reject{"insufficient bandwidth: " + std::string(to_string(category)) + " needs " +
                    std::to_string(rate) + " cells/s on a link with " +
                    std::to_string(link->limit()) + " admissible"};
    }
  }
  return Accept{};
}

void CacBooker::release(std::span<LinkBooking* const> route, const std::string& connection) {
  for (auto* link : route) link->bookings_.erase(connection);
}

}  // namespace atmsim
