#pragma once

// Discrete-event ATM network simulator.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "atmsim/cell.hpp"
#include "atmsim/event_queue.hpp"
#include "atmsim/rng.hpp"
#include "atmsim/scenario.hpp"
#include "atmsim/switch.hpp"
#include "atmsim/traffic.hpp"

namespace atmsim {

/// ON/OFF source: exponentially distributed ON and OFF periods, cells
/// paced at the peak rate while ON. Spacing never drops below 1/peak, so
/// a zero mean OFF time degenerates to a paced stream.
class OnOffSource {
 public:
  OnOffSource(const OnOffVbr& spec, double start, Rng rng);

  /// Emission time of the next cell.
  double next();

 private:
  OnOffVbr spec_;
  Rng rng_;
  double on_start_;
  double on_end_;
  std::optional<double> last_;
};

struct ConnectionReport {
  std::string id;
  ServiceCategory category = ServiceCategory::UBR;
  std::uint64_t transmitted_clp0 = 0;
  std::uint64_t transmitted_clp1 = 0;
  std::uint64_t lost_clp0 = 0;
  std::uint64_t lost_clp1 = 0;
  std::uint64_t delivered = 0;
  std::uint64_t in_flight = 0;
  double clr_clp0 = 0.0;
  double clr_clp1 = 0.0;
  double clr = 0.0;
  std::optional<DelayStats> delay;
  std::map<std::string, std::uint64_t> drops;  // by DropReason name
  std::uint64_t policer_tagged = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t reassembly_errors = 0;
  std::uint64_t out_of_order = 0;
  std::uint64_t payload_mismatches = 0;
  std::uint64_t delay_bound_violations = 0;  // delay below summed propagation
  double route_propagation_s = 0.0;
};

struct SwitchReport {
  std::string name;
  SwitchCounters counters;
};

struct LinkReport {
  std::string from;
  std::string to;
  std::uint64_t cells = 0;
  double utilization = 0.0;
  double utilization_second_half = 0.0;
  std::size_t max_queue = 0;
  std::size_t queue_capacity = 0;
};

struct AbrSample {
  double time = 0.0;
  double acr = 0.0;
  bool congested = false;
};

struct AbrReport {
  std::string connection;
  double final_acr = 0.0;
  double min_acr = 0.0;
  double max_acr = 0.0;
  std::uint64_t adjustments = 0;
  std::uint64_t congested_indications = 0;
  std::uint64_t bound_violations = 0;  // acr outside [mcr, pcr]
  std::uint64_t feedback_lost = 0;
  std::uint64_t delivered_second_half = 0;
  std::vector<AbrSample> series;
};

struct LaneClientReport {
  std::string host;
  std::string mac;
  lane::LecCounters counters;
  std::uint64_t unicast_received = 0;
  std::uint64_t broadcast_received = 0;
  std::uint64_t filtered = 0;
};

struct LaneReport {
  std::uint64_t arp_requests = 0;
  std::uint64_t arp_replies = 0;
  std::uint64_t arp_unknown = 0;
  std::uint64_t bus_frames = 0;
  std::uint64_t bus_unicast_frames = 0;
  std::uint64_t bus_forwarded = 0;
  std::uint64_t direct_frames = 0;
  std::uint64_t pending_drops = 0;
  std::uint64_t vc_setups = 0;
  std::uint64_t vc_setup_failures = 0;
  std::uint64_t post_resolution_direct = 0;
  std::uint64_t post_resolution_other = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t reassembled_frames = 0;
  std::uint64_t reassembly_errors = 0;
  std::uint64_t cells_lost = 0;
  std::uint64_t cache_coherent_lookups = 0;
  std::uint64_t cache_incoherent_lookups = 0;
  std::uint64_t broadcast_frames = 0;
  std::uint64_t broadcast_complete = 0;
  std::optional<DelayStats> arp_latency;
  std::vector<LaneClientReport> clients;

  /// Share of post-resolution unicast frames that used a data-direct VC.
  double direct_path_fraction() const {
    const auto total = post_resolution_direct + post_resolution_other;
    return total == 0 ? 1.0 : static_cast<double>(post_resolution_direct) / static_cast<double>(total);
  }
};

struct MetricsReport {
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t events = 0;
  std::vector<ConnectionReport> connections;
  std::vector<SwitchReport> switches;
  std::vector<LinkReport> links;
  std::vector<AbrReport> abr;
  std::optional<double> abr_fairness;  // Jain index over ABR goodput
  std::optional<LaneReport> lane;
};

/// Queue discard as seen by an output port, for post-run inspection.
struct DiscardRecord {
  double time = 0.0;
  std::string node;
  unsigned port = 0;
  std::size_t occupancy = 0;
  bool clp = false;
  DropReason reason = DropReason::Full;
};

struct EngineOptions {
  bool record_discards = false;
};

class Engine {
 public:
  /// Validates the scenario and builds the network. Throws ValidationError
  /// (one violation per line) before any event runs.
  explicit Engine(Scenario scenario, EngineOptions options = {});
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  /// Runs until the scenario duration. May be called once.
  MetricsReport run();

  const std::vector<DiscardRecord>& discard_log() const;
  /// Cells emitted by a connection with `trace` set.
  const std::vector<TraceRecord>& trace(const std::string& connection) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Validate, build and run in one call.
MetricsReport run(const Scenario& scenario);

/// Stable, key-ordered JSON text of the report (ABR series excluded).
std::string report_to_json(const MetricsReport& report, int indent = 2);

/// Writes report.json, connections.csv, switches.csv, links.csv and one
/// abr_<id>.csv per ABR connection into `dir` (created if missing).
void write_report_files(const MetricsReport& report, const std::string& dir);

/// One line per connection: category, CLR, mean CTD, CDV (6 significant digits).
std::string summary_lines(const MetricsReport& report);

}  // namespace atmsim
