#pragma once

// Scenario description and its JSON form. See docs/scenario_format.md.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "atmsim/abr.hpp"
#include "atmsim/lane.hpp"
#include "atmsim/traffic.hpp"

namespace atmsim {

enum class NodeType { Host, Switch };

struct NodeSpec {
  std::string name;
  NodeType type = NodeType::Host;
  std::size_t queue_capacity = 256;            // per output port
  std::optional<std::size_t> efci_threshold;   // default 80% of capacity
  std::optional<std::size_t> clp_threshold;    // default 90% of capacity
};

struct LinkSpec {
  std::string a;
  std::string b;
  double bit_rate = 155.52e6;
  double propagation_delay_s = 0.0;
  double header_bit_error_rate = 0.0;
  double booking_factor = 1.0;
};

enum class PolicingMode { None, Tag, Drop };

struct HopLabel {
  std::uint16_t vpi = 0;
  std::uint16_t vci = 0;
};

struct AbrSpec {
  std::optional<double> air;
  std::optional<double> rdf;
  std::optional<std::uint32_t> nrm;
  std::optional<double> initial_acr;
};

struct ConnectionSpec {
  std::string id;
  ServiceCategory category = ServiceCategory::UBR;
  TrafficDescriptor descriptor;
  QosRequirement qos;
  std::vector<std::string> route;
  std::vector<HopLabel> labels;  // empty: allocated automatically
  std::optional<PolicingMode> policing;  // default: Tag for CBR/VBR, None otherwise
  bool shaping = false;
  std::size_t shaper_depth = kDefaultShaperDepth;
  AbrSpec abr;
  bool trace = false;
};

struct PacedCbr {
  double rate = 0.0;
};
struct OnOffVbr {
  double peak_rate = 0.0;
  double mean_on_s = 0.0;
  double mean_off_s = 0.0;
};
struct GreedyAbr {};
struct GreedyUbr {
  double rate_cap = 0.0;
};
using GeneratorKind = std::variant<PacedCbr, OnOffVbr, GreedyAbr, GreedyUbr>;

struct FrameSize {
  std::size_t min_bytes = 0;
  std::size_t max_bytes = 0;
};

struct GeneratorSpec {
  std::string connection;
  GeneratorKind kind;
  double start_s = 0.0;
  std::optional<double> stop_s;
  std::optional<std::uint64_t> max_cells;
  double clp1_fraction = 0.0;
  std::optional<FrameSize> frame_size;  // set: source emits AAL5 frames
};

struct LaneClientSpec {
  std::string host;
  lane::MacAddress mac;
};

struct LaneTrafficSpec {
  std::string from;
  lane::MacAddress to;
  std::uint64_t count = 1;
  double start_s = 0.0;
  double interval_s = 1e-3;
  std::size_t bytes = 64;
};

struct LaneSpec {
  std::string server;  // host running LES and BUS
  bool parallel_bus = false;
  std::size_t pending_depth = 64;
  double arp_timeout_s = 1.0;
  double cache_aging_s = 300.0;
  ServiceCategory vc_category = ServiceCategory::UBR;
  TrafficDescriptor vc_descriptor = [] {
    TrafficDescriptor d;
    d.pcr = 10000.0;
    return d;
  }();
  std::vector<LaneClientSpec> clients;
  std::vector<LaneTrafficSpec> traffic;
};

struct Scenario {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::vector<ConnectionSpec> connections;
  std::vector<GeneratorSpec> generators;
  std::optional<LaneSpec> lane;
  double duration_s = 1.0;
  std::uint64_t seed = 1;
  std::size_t host_queue_capacity = 4096;
};

/// Parses the JSON text of a scenario. Throws ValidationError describing
/// the first structural problem (missing key, wrong type, bad enum).
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);

/// Every rule the scenario breaks: structure, routes, the service-category
/// table for each contract, and admission control along each route.
std::vector<std::string> validate_scenario(const Scenario& scenario);

}  // namespace atmsim
