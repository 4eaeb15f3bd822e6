#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "atmsim/cell.hpp"

namespace atmsim {

enum class ServiceCategory { CBR, VBR_RT, VBR_NRT, ABR, UBR };

std::string_view to_string(ServiceCategory c);
std::optional<ServiceCategory> parse_category(std::string_view s);

/// Rates in cells/second, times in seconds.
struct TrafficDescriptor {
  double pcr = 0.0;
  std::optional<double> scr;
  std::optional<double> mcr;
  std::optional<std::uint32_t> mbs;
  std::optional<double> cdvt;
};

struct QosRequirement {
  std::optional<double> clr_clp0;
  std::optional<double> clr_clp1;
  std::optional<double> max_ctd;
  std::optional<double> max_cdv;
};

/// One breached rule. `message` reads like "MCR not applicable for CBR".
struct ContractViolation {
  std::string field;
  std::string message;
  friend bool operator==(const ContractViolation&, const ContractViolation&) = default;
};

/// Checks a contract against the service-category table: which
/// descriptor and QoS fields each category requires, allows, or forbids.
/// Empty result means the contract is acceptable.
std::vector<ContractViolation> validate_contract(ServiceCategory category,
                                                 const TrafficDescriptor& descriptor,
                                                 const QosRequirement& qos);

/// BT = (MBS - 1)(1/SCR - 1/PCR). Throws RangeError unless mbs >= 1 and
/// 0 < scr <= pcr.
double burst_tolerance(std::uint32_t mbs, double scr, double pcr);

// ---------------------------------------------------------------------------
// GCRA (continuous-state leaky bucket)

struct GcraState {
  double bucket_level = 0.0;
  double last_time = 0.0;
};

struct GcraParams {
  double increment = 0.0;  // T = 1/rate
  double limit = 0.0;      // tau
};

struct GcraResult {
  bool conforming = false;
  GcraState state;
};

/// Relative slack applied to the limit comparison, as a fraction of the
/// increment. Absorbs rounding in accumulated arrival times; it is far
/// below any physically meaningful CDVT.
inline constexpr double kGcraSlack = 1e-9;

/// Drains the bucket to `arrival`, then admits the cell if the level is
/// within `limit`. A non-conforming cell leaves the level drained but not
/// incremented. Throws OrderingError if arrival < state.last_time.
GcraResult gcra_update(const GcraState& state, double arrival, double increment, double limit);

/// Earliest time >= `not_before` at which a cell would conform.
double gcra_earliest_conforming(const GcraState& state, const GcraParams& params, double not_before);

/// PCR bucket (1/PCR, CDVT) and, for VBR-style contracts, an SCR bucket
/// (1/SCR, BT + CDVT). A cell conforms iff every bucket accepts it; only
/// conforming cells add to the buckets.
class DualGcra {
 public:
  DualGcra() = default;
  DualGcra(GcraParams peak, std::optional<GcraParams> sustained);

  /// Built from a descriptor: SCR bucket present iff scr and mbs are set.
  static DualGcra from_descriptor(const TrafficDescriptor& d);

  bool update(double arrival);
  double earliest_conforming(double not_before) const;

  const GcraParams& peak() const { return peak_; }
  const std::optional<GcraParams>& sustained() const { return sustained_; }

 private:
  GcraParams peak_{};
  std::optional<GcraParams> sustained_;
  GcraState peak_state_{};
  GcraState sustained_state_{};
};

// ---------------------------------------------------------------------------
// Policing

enum class PolicingPolicy { Drop, TagClp };

struct Pass {
  Cell cell;
  bool tagged = false;
};
struct Discard {};

using PoliceOutcome = std::variant<Pass, Discard>;

PoliceOutcome police(const Cell& cell, bool conforming, PolicingPolicy policy);

// ---------------------------------------------------------------------------
// Shaping

inline constexpr std::size_t kDefaultShaperDepth = 1024;

/// Open-loop FIFO shaper: every cell leaves at the earliest time it
/// conforms to the configured buckets, never before an earlier cell.
class Shaper {
 public:
  explicit Shaper(DualGcra buckets, std::size_t depth = kDefaultShaperDepth);

  /// Release time for a cell arriving at `arrival` (non-decreasing across
  /// calls), or nullopt when `depth` cells are already waiting.
  std::optional<double> offer(double arrival);

  std::size_t overflow_discards() const { return overflow_; }
  std::size_t depth() const { return depth_; }

 private:
  DualGcra buckets_;
  std::size_t depth_;
  std::deque<double> waiting_;  // release times not yet reached
  double last_release_ = 0.0;
  bool any_released_ = false;
  std::size_t overflow_ = 0;
};

struct ShapeResult {
  std::vector<std::optional<double>> release_times;  // nullopt = overflow discard
  std::size_t overflow_discards = 0;
};

ShapeResult shape(std::span<const double> arrivals, const DualGcra& buckets,
                  std::size_t depth = kDefaultShaperDepth);

// ---------------------------------------------------------------------------
// QoS metrics

enum class ClpClass { Clp0, Clp1, Both };

struct ConnectionMetrics {
  std::uint64_t transmitted_clp0 = 0;
  std::uint64_t transmitted_clp1 = 0;
  std::uint64_t lost_clp0 = 0;
  std::uint64_t lost_clp1 = 0;
  std::uint64_t delivered = 0;
  std::vector<double> delay_samples;

  std::uint64_t transmitted() const { return transmitted_clp0 + transmitted_clp1; }
  std::uint64_t lost() const { return lost_clp0 + lost_clp1; }
  std::uint64_t in_flight() const { return transmitted() - lost() - delivered; }
};

/// lost / transmitted for the class; 0 when nothing was transmitted.
double compute_clr(const ConnectionMetrics& m, ClpClass cls);

struct DelayStats {
  double mean_ctd = 0.0;
  double max_ctd = 0.0;
  double min_ctd = 0.0;
  double cdv_peak_to_peak = 0.0;
  double cdv_stddev = 0.0;  // population
  std::size_t samples = 0;
};

/// nullopt for an empty sample set.
std::optional<DelayStats> delay_stats(std::span<const double> samples);

}  // namespace atmsim
