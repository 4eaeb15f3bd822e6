#include "atmsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "atmsim/aal5.hpp"
#include "atmsim/abr.hpp"
#include "atmsim/errors.hpp"
#include "atmsim/lane.hpp"

namespace atmsim {

// ---------------------------------------------------------------------------
// OnOffSource

OnOffSource::OnOffSource(const OnOffVbr& spec, double start, Rng rng)
    : spec_(spec), rng_(std::move(rng)), on_start_(start) {
  on_end_ = on_start_ + rng_.exponential(spec_.mean_on_s);
}

double OnOffSource::next() {
  const double gap = 1.0 / spec_.peak_rate;
  auto candidate = [&] { return last_ ? std::max(*last_ + gap, on_start_) : on_start_; };
  double t = candidate();
  while (t >= on_end_) {
    on_start_ = on_end_ + rng_.exponential(spec_.mean_off_s);
    on_end_ = on_start_ + rng_.exponential(spec_.mean_on_s);
    t = candidate();
  }
  last_ = t;
  return t;
}

namespace sim {

struct SimCell {
  Cell cell;
  std::uint32_t channel = 0;
  std::uint64_t seq = 0;
  double created = 0.0;
  bool source_clp = false;
};

inline Cell& cell_of(SimCell& c) { return c.cell; }
inline const Cell& cell_of(const SimCell& c) { return c.cell; }

}  // namespace sim

namespace {

using sim::SimCell;

constexpr std::uint32_t kNoOwner = ~0u;

enum class SinkKind { Data, AbrFeedback, LaneFrame };
enum class LaneRole { CtrlUp, CtrlDown, McastSend, McastFwd, DataDirect };

struct Port {
  unsigned node = 0;
  unsigned local = 0;  // index within the node
  unsigned peer_node = 0;
  unsigned peer_port = 0;  // global id of the far end
  InterfaceKind kind = InterfaceKind::UNI;
  double bit_rate = 0.0;
  double propagation = 0.0;
  double header_ber = 0.0;
  OutputQueue<SimCell> queue;
  LinkBooking booking;
  std::optional<Rng> ber_rng;
  bool busy = false;
  std::uint64_t cells_sent = 0;
  double busy_time = 0.0;
  double busy_time_second_half = 0.0;
  std::size_t max_occupancy = 0;
  // labels in use on cells arriving at this port
  std::set<std::pair<std::uint16_t, std::uint16_t>> inbound_labels;

  Port(QueueConfig qc, double capacity, double factor) : queue(qc), booking(capacity, factor) {}
};

struct Policer {
  DualGcra gcra;
  PolicingPolicy policy = PolicingPolicy::TagClp;
};

struct Node {
  NodeSpec spec;
  std::vector<unsigned> ports;  // global port ids, local index = position
  VcTable table;
  SwitchCounters counters;
  std::map<VcKey, std::uint32_t> terminals;
  std::map<VcKey, Policer> policers;
};

struct Channel {
  std::uint32_t id = 0;
  std::string name;
  SinkKind sink = SinkKind::Data;
  std::uint32_t owner = kNoOwner;
  LaneRole lane_role = LaneRole::CtrlUp;
  std::vector<unsigned> nodes;
  std::vector<unsigned> out_ports;  // global port leaving nodes[i]
  std::vector<HopLabel> labels;
  double propagation = 0.0;

  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t queued = 0;
  std::uint64_t in_transit = 0;
  std::uint64_t in_shaper = 0;
  std::uint64_t next_seq = 0;
  std::optional<std::uint64_t> last_delivered_seq;
  aal5::Reassembler reassembler;
};

struct Generator {
  GeneratorSpec spec;
  std::uint32_t conn = 0;
  Rng rng;
  std::uint64_t emitted = 0;
  std::optional<OnOffSource> on_off;
  std::deque<aal5::SegmentPayload> frame_cells;
  std::uint64_t frame_seq = 0;
};

struct Connection {
  ConnectionSpec spec;
  std::uint32_t forward = 0;
  std::optional<std::uint32_t> backward;
  ConnectionMetrics metrics;
  std::map<DropReason, std::uint64_t> drops;
  std::uint64_t policer_tagged = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t reassembly_errors = 0;
  std::uint64_t out_of_order = 0;
  std::uint64_t payload_mismatches = 0;
  std::uint64_t delay_bound_violations = 0;
  std::uint64_t delivered_second_half = 0;
  std::uint64_t frame_seq_delivered = 0;
  std::optional<Shaper> shaper;
  std::optional<abr::AbrSource> abr_source;
  std::optional<abr::AbrDestination> abr_dest;
  AbrReport abr;
  std::vector<TraceRecord> trace;
};

struct LecRuntime {
  unsigned host = 0;
  lane::Lec lec;
  std::uint32_t ctrl_up = 0, ctrl_down = 0, mcast_send = 0, mcast_fwd = 0;
  std::map<lane::MacAddress, double> arp_sent_at;
  std::uint64_t unicast_received = 0;
  std::uint64_t broadcast_received = 0;
  std::uint64_t filtered = 0;
  std::set<std::uint64_t> seen_frames;
};

struct LaneRuntime {
  LaneSpec spec;
  unsigned server = 0;
  lane::LesDirectory les;
  lane::Bus bus;
  std::vector<LecRuntime> lecs;
  std::map<lane::AtmAddress, std::size_t> lec_by_atm;
  std::uint64_t next_frame_id = 1;
  std::uint64_t bus_forwarded = 0;
  std::uint64_t vc_setups = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t reassembled = 0;
  std::uint64_t reassembly_errors = 0;
  std::uint64_t cells_lost = 0;
  std::uint64_t coherent = 0;
  std::uint64_t incoherent = 0;
  std::vector<double> arp_latencies;
  std::map<std::uint64_t, std::size_t> broadcast_sender;
  std::map<std::uint64_t, std::vector<std::uint32_t>> broadcast_receipts;
};

std::string join_lines(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += '\n';
    out += s;
  }
  return out;
}

// Deterministic payload for cell-mode sources; checked at the sink.
Payload pattern_payload(std::uint32_t channel, std::uint64_t seq) {
  Payload p{};
  for (int k = 0; k < 8; ++k) p[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(seq >> (56 - 8 * k));
  for (int k = 0; k < 4; ++k) p[8 + static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(channel >> (24 - 8 * k));
  for (std::size_t i = 12; i < kPayloadBytes; ++i)
    p[i] = static_cast<std::uint8_t>((seq * 31 + channel * 7 + i) & 0xFF);
  return p;
}

std::vector<std::uint8_t> pattern_frame(std::uint32_t channel, std::uint64_t frame_seq, std::size_t len) {
  std::vector<std::uint8_t> f(len);
  std::uint64_t x = splitmix64((std::uint64_t{channel} << 40) ^ frame_seq);
  for (std::size_t i = 0; i < len; ++i) {
    if (i % 8 == 0) x = splitmix64(x);
    f[i] = static_cast<std::uint8_t>(x >> (8 * (i % 8)));
  }
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------

struct Engine::Impl {
  Scenario scenario;
  EngineOptions options;
  EventQueue events;
  std::vector<Node> nodes;
  std::vector<Port> ports;
  std::map<std::string, unsigned> node_index;
  std::vector<Channel> channels;
  std::vector<Connection> conns;
  std::map<std::string, std::uint32_t> conn_index;
  std::vector<Generator> generators;
  std::optional<LaneRuntime> lane;
  std::vector<DiscardRecord> discards;
  bool ran = false;
  double half_time = 0.0;

  Impl(Scenario s, EngineOptions o) : scenario(std::move(s)), options(o) {
    auto violations = validate_scenario(scenario);
    if (!violations.empty()) throw ValidationError(join_lines(violations));
    half_time = scenario.duration_s / 2.0;
    build_topology();
    build_connections();
    if (scenario.lane) build_lane();
  }

  // ---- topology ------------------------------------------------------------

  void build_topology() {
    for (const auto& n : scenario.nodes) {
      node_index[n.name] = static_cast<unsigned>(nodes.size());
      nodes.push_back(Node{n, {}, {}, {}, {}, {}});
    }
    for (const auto& l : scenario.links) {
      const unsigned a = node_index.at(l.a), b = node_index.at(l.b);
      const bool nni = nodes[a].spec.type == NodeType::Switch && nodes[b].spec.type == NodeType::Switch;
      const double cap = l.bit_rate / static_cast<double>(kCellBits);
      auto make_port = [&](unsigned node, unsigned peer) {
        const auto& spec = nodes[node].spec;
        QueueConfig qc;
        if (spec.type == NodeType::Switch) {
          qc = QueueConfig::with_capacity(spec.queue_capacity);
          if (spec.efci_threshold) qc.efci_threshold = *spec.efci_threshold;
          if (spec.clp_threshold) qc.clp_threshold = *spec.clp_threshold;
        } else {
          qc = QueueConfig::plain(scenario.host_queue_capacity);
        }
        Port p(qc, cap, l.booking_factor);
        p.node = node;
        p.local = static_cast<unsigned>(nodes[node].ports.size());
        p.peer_node = peer;
        p.kind = nni ? InterfaceKind::NNI : InterfaceKind::UNI;
        p.bit_rate = l.bit_rate;
        p.propagation = l.propagation_delay_s;
        p.header_ber = l.header_bit_error_rate;
        if (p.header_ber > 0.0)
          p.ber_rng.emplace(scenario.seed, "link:" + nodes[node].spec.name + "->" + nodes[peer].spec.name);
        const auto id = static_cast<unsigned>(ports.size());
        ports.push_back(std::move(p));
        nodes[node].ports.push_back(id);
        return id;
      };
      const unsigned pa = make_port(a, b);
      const unsigned pb = make_port(b, a);
      ports[pa].peer_port = pb;
      ports[pb].peer_port = pa;
    }
  }

  unsigned port_towards(unsigned from, unsigned to) const {
    for (unsigned p : nodes[from].ports)
      if (ports[p].peer_node == to) return p;
    throw ValidationError("no link from " + nodes[from].spec.name + " to " + nodes[to].spec.name);
  }

  std::vector<unsigned> shortest_path(unsigned src, unsigned dst) const {
    std::vector<int> prev(nodes.size(), -1);
    std::vector<bool> seen(nodes.size(), false);
    std::deque<unsigned> q{src};
    seen[src] = true;
    while (!q.empty()) {
      const unsigned u = q.front();
      q.pop_front();
      if (u == dst) break;
      if (u != src && nodes[u].spec.type != NodeType::Switch) continue;  // hosts do not forward
      for (unsigned p : nodes[u].ports) {
        const unsigned v = ports[p].peer_node;
        if (seen[v]) continue;
        seen[v] = true;
        prev[v] = static_cast<int>(u);
        q.push_back(v);
      }
    }
    if (!seen[dst]) return {};
    std::vector<unsigned> path{dst};
    while (path.back() != src) path.push_back(static_cast<unsigned>(prev[path.back()]));
    std::reverse(path.begin(), path.end());
    return path;
  }

  std::vector<LinkBooking*> bookings_on(const std::vector<unsigned>& path) {
    std::vector<LinkBooking*> out;
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      out.push_back(&ports[port_towards(path[i], path[i + 1])].booking);
    return out;
  }

  // Installs labels and table entries along `path`; returns the channel id.
  std::uint32_t open_channel(std::string name, const std::vector<unsigned>& path,
                             const std::vector<HopLabel>& explicit_labels, SinkKind sink,
                             std::uint32_t owner, ServiceCategory category) {
    Channel ch;
    ch.id = static_cast<std::uint32_t>(channels.size());
    ch.name = std::move(name);
    ch.sink = sink;
    ch.owner = owner;
    ch.nodes = path;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const unsigned out = port_towards(path[i], path[i + 1]);
      Port& in = ports[ports[out].peer_port];
      HopLabel label;
      if (!explicit_labels.empty()) {
        label = explicit_labels[i];
        if (label.vpi > max_vpi(ports[out].kind))
          throw ValidationError(ch.name + ": VPI " + std::to_string(label.vpi) + " out of range on " +
                                std::string(to_string(ports[out].kind)) + " hop " + std::to_string(i));
        if (in.inbound_labels.count({label.vpi, label.vci}))
          throw ValidationError(ch.name + ": label " + std::to_string(label.vpi) + "/" +
                                std::to_string(label.vci) + " already in use on hop " + std::to_string(i));
      } else {
        label = {0, 32};
        while (in.inbound_labels.count({label.vpi, label.vci})) {
          if (label.vci == 0xFFFF) throw ValidationError(ch.name + ": VCI space exhausted");
          ++label.vci;
        }
      }
      in.inbound_labels.insert({label.vpi, label.vci});
      ch.out_ports.push_back(out);
      ch.labels.push_back(label);
      ch.propagation += ports[out].propagation;
    }
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      const Port& in = ports[ports[ch.out_ports[i - 1]].peer_port];
      const Port& out = ports[ch.out_ports[i]];
      nodes[path[i]].table.install({in.local, ch.labels[i - 1].vpi, ch.labels[i - 1].vci},
                                   {out.local, ch.labels[i].vpi, ch.labels[i].vci, out.kind, category});
    }
    const Port& last_in = ports[ports[ch.out_ports.back()].peer_port];
    nodes[path.back()].terminals[{last_in.local, ch.labels.back().vpi, ch.labels.back().vci}] = ch.id;
    channels.push_back(std::move(ch));
    return channels.back().id;
  }

  void build_connections() {
    for (const auto& spec : scenario.connections) {
      const auto idx = static_cast<std::uint32_t>(conns.size());
      conn_index[spec.id] = idx;
      Connection c;
      c.spec = spec;
      std::vector<unsigned> path;
      for (const auto& n : spec.route) path.push_back(node_index.at(n));

      auto route = bookings_on(path);
      if (const auto decision = CacBooker::admit(route, spec.id, spec.category, spec.descriptor); const auto* r = std::get_if<Reject>(&decision))
        throw ValidationError("connection " + spec.id + ": admission rejected: " + r->reason);

      c.forward = open_channel(spec.id, path, spec.labels, SinkKind::Data, idx, spec.category);

      const PolicingMode mode = spec.policing.value_or(
          (spec.category == ServiceCategory::CBR || spec.category == ServiceCategory::VBR_RT ||
           spec.category == ServiceCategory::VBR_NRT)
              ? PolicingMode::Tag
              : PolicingMode::None);
      if (mode != PolicingMode::None && path.size() > 2) {
        const Channel& ch = channels[c.forward];
        const Port& ingress = ports[ports[ch.out_ports[0]].peer_port];
        nodes[path[1]].policers[{ingress.local, ch.labels[0].vpi, ch.labels[0].vci}] =
            Policer{DualGcra::from_descriptor(spec.descriptor),
                    mode == PolicingMode::Drop ? PolicingPolicy::Drop : PolicingPolicy::TagClp};
      }
      if (spec.shaping) c.shaper.emplace(DualGcra::from_descriptor(spec.descriptor), spec.shaper_depth);

      if (spec.category == ServiceCategory::ABR) {
        auto p = abr::SourceParams::defaults(spec.descriptor.pcr, spec.descriptor.mcr.value_or(0.0));
        if (spec.abr.air) p.air = *spec.abr.air;
        if (spec.abr.rdf) p.rdf = *spec.abr.rdf;
        if (spec.abr.nrm) p.nrm = *spec.abr.nrm;
        if (spec.abr.initial_acr) p.initial_acr = *spec.abr.initial_acr;
        c.abr_source.emplace(p);
        c.abr_dest.emplace(p.nrm);
        c.abr.connection = spec.id;
        c.abr.min_acr = c.abr.max_acr = c.abr.final_acr = p.initial_acr;
        std::vector<unsigned> back(path.rbegin(), path.rend());
        c.backward = open_channel(spec.id + ":feedback", back, {}, SinkKind::AbrFeedback, idx,
                                  ServiceCategory::ABR);
      }
      conns.push_back(std::move(c));
    }

    for (const auto& g : scenario.generators) {
      const auto ci = conn_index.at(g.connection);
      Generator gen{g, ci, Rng(scenario.seed, "generator:" + g.connection), 0, std::nullopt, {}, 0};
      if (const auto* oo = std::get_if<OnOffVbr>(&g.kind))
        gen.on_off.emplace(*oo, g.start_s, Rng(scenario.seed, "onoff:" + g.connection));
      generators.push_back(std::move(gen));
    }
  }

  void build_lane() {
    const auto& spec = *scenario.lane;
    LaneRuntime lr;
    lr.spec = spec;
    lr.server = node_index.at(spec.server);
    lane::LecConfig cfg{spec.parallel_bus, spec.pending_depth, spec.arp_timeout_s, spec.cache_aging_s};
    lane = std::move(lr);

    for (std::size_t i = 0; i < spec.clients.size(); ++i) {
      const auto& cl = spec.clients[i];
      const unsigned host = node_index.at(cl.host);
      const auto atm = lane::AtmAddress::for_endpoint(host);
      LecRuntime rt{host, lane::Lec(cl.mac, atm, cfg), 0, 0, 0, 0, {}, 0, 0, 0, {}};

      auto up = shortest_path(host, lane->server);
      auto down = shortest_path(lane->server, host);
      if (up.empty() || down.empty())
        throw ValidationError("lane: no path between " + cl.host + " and " + spec.server);
      const auto owner = static_cast<std::uint32_t>(i);
      auto open = [&](const std::string& what, const std::vector<unsigned>& path, LaneRole role) {
        auto route = bookings_on(path);
        const std::string name = "lane:" + cl.host + ":" + what;
        if (const auto decision = CacBooker::admit(route, name, spec.vc_category, spec.vc_descriptor); const auto* r = std::get_if<Reject>(&decision))
          throw ValidationError(name + ": admission rejected: " + r->reason);
        auto id = open_channel(name, path, {}, SinkKind::LaneFrame, owner, spec.vc_category);
        channels[id].lane_role = role;
        return id;
      };
      rt.ctrl_up = open("control-up", up, LaneRole::CtrlUp);
      rt.ctrl_down = open("control-down", down, LaneRole::CtrlDown);
      rt.mcast_send = open("multicast-send", up, LaneRole::McastSend);
      rt.mcast_fwd = open("multicast-forward", down, LaneRole::McastFwd);

      lane->les.register_mac(cl.mac, atm);
      lane->bus.attach(atm);
      lane->lec_by_atm[atm] = i;
      lane->lecs.push_back(std::move(rt));
    }
  }

  // ---- cell movement -------------------------------------------------------

  void check_conservation(const Channel& ch) const {
    if (ch.sent != ch.delivered + ch.lost + ch.queued + ch.in_transit + ch.in_shaper)
      throw std::logic_error("cell conservation broken on channel " + ch.name);
  }

  void lose(const SimCell& c, DropReason reason, unsigned node) {
    Channel& ch = channels[c.channel];
    ++ch.lost;
    if (ch.sink == SinkKind::Data) {
      Connection& conn = conns[ch.owner];
      if (c.source_clp) ++conn.metrics.lost_clp1;
      else ++conn.metrics.lost_clp0;
      ++conn.drops[reason];
    } else if (ch.sink == SinkKind::AbrFeedback) {
      ++conns[ch.owner].abr.feedback_lost;
    } else {
      ++lane->cells_lost;
    }
    (void)node;
  }

  void emit_on_port(SimCell c, unsigned port_id) {
    Port& port = ports[port_id];
    Node& node = nodes[port.node];
    const bool clp = c.cell.header.clp;
    const auto result = port.queue.enqueue(c);
    Channel& ch = channels[c.channel];
    if (const auto* d = std::get_if<Discarded>(&result)) {
      if (node.spec.type == NodeType::Switch) {
        if (d->reason == DropReason::Full) ++node.counters.full_drops;
        else ++node.counters.clp_threshold_drops;
      }
      if (options.record_discards)
        discards.push_back({events.now(), node.spec.name, port.local, port.queue.occupancy(), clp, d->reason});
      lose(c, d->reason, port.node);
    } else {
      if (std::get<Accepted>(result).efci_marked && node.spec.type == NodeType::Switch)
        ++node.counters.efci_marks;
      ++ch.queued;
      port.max_occupancy = std::max(port.max_occupancy, port.queue.occupancy());
      if (!port.busy) start_transmission(port_id);
    }
    check_conservation(ch);
  }

  void start_transmission(unsigned port_id) {
    Port& port = ports[port_id];
    auto item = port.queue.dequeue();
    if (!item) return;
    Channel& ch = channels[item->channel];
    --ch.queued;
    ++ch.in_transit;
    port.busy = true;
    ++port.cells_sent;
    const double now = events.now();
    const double tx = static_cast<double>(kCellBits) / port.bit_rate;
    port.busy_time += tx;
    const double end = now + tx;
    if (end > half_time) port.busy_time_second_half += end - std::max(now, half_time);

    events.schedule(end, EventKind::CellTransmitComplete, [this, port_id] {
      ports[port_id].busy = false;
      start_transmission(port_id);
    });
    const unsigned peer = port.peer_port;
    events.schedule(end + port.propagation, EventKind::CellArrival,
                    [this, peer, c = std::move(*item)]() mutable { arrive(peer, std::move(c)); });
  }

  // Applies header bit errors on the incoming link and runs HEC processing.
  bool receive_header(unsigned port_id, SimCell& c) {
    Port& in = ports[port_id];
    Port& out_side = ports[in.peer_port];
    if (!(out_side.header_ber > 0.0)) return true;
    auto bytes = encode_header(c.cell.header, c.cell.kind);
    bool flipped = false;
    for (unsigned bit = 0; bit < kHeaderBits; ++bit) {
      if (out_side.ber_rng->bernoulli(out_side.header_ber)) {
        bytes[bit / 8] ^= static_cast<std::uint8_t>(0x80 >> (bit % 8));
        flipped = true;
      }
    }
    if (!flipped) return true;
    Node& node = nodes[in.node];
    const auto outcome = decode_header(bytes, c.cell.kind);
    if (std::holds_alternative<Uncorrectable>(outcome)) {
      ++node.counters.hec_dropped;
      return false;
    }
    if (std::holds_alternative<Corrected>(outcome)) ++node.counters.hec_corrected;
    c.cell.header = *decoded_header(outcome);
    return true;
  }

  void arrive(unsigned port_id, SimCell c) {
    Channel& ch = channels[c.channel];
    --ch.in_transit;
    const Port& in = ports[port_id];
    Node& node = nodes[in.node];
    if (!receive_header(port_id, c)) {
      lose(c, DropReason::HecUncorrectable, in.node);
      check_conservation(ch);
      return;
    }
    if (node.spec.type == NodeType::Switch) switch_receive(in.node, in.local, std::move(c));
    else host_receive(in.node, in.local, std::move(c));
    check_conservation(channels[ch.id]);
  }

  void switch_receive(unsigned node_id, unsigned local_port, SimCell c) {
    Node& node = nodes[node_id];
    const VcKey key{local_port, c.cell.header.vpi, c.cell.header.vci};
    if (auto it = node.policers.find(key); it != node.policers.end()) {
      const bool ok = it->second.gcra.update(events.now());
      const auto outcome = police(c.cell, ok, it->second.policy);
      if (std::holds_alternative<Discard>(outcome)) {
        ++node.counters.policer_dropped;
        lose(c, DropReason::Policer, node_id);
        return;
      }
      const auto& pass = std::get<Pass>(outcome);
      if (pass.tagged) {
        ++node.counters.policer_tagged;
        if (channels[c.channel].sink == SinkKind::Data) ++conns[channels[c.channel].owner].policer_tagged;
      }
      c.cell = pass.cell;
    }
    auto routed = route_cell(node.table, c.cell, local_port);
    if (std::holds_alternative<RouteDrop>(routed)) {
      ++node.counters.unknown_vc;
      lose(c, DropReason::UnknownVc, node_id);
      return;
    }
    auto& r = std::get<Routed>(routed);
    ++node.counters.routed;
    c.cell = r.cell;
    emit_on_port(std::move(c), node.ports[r.out_port]);
  }

  void host_receive(unsigned node_id, unsigned local_port, SimCell c) {
    Node& node = nodes[node_id];
    auto it = node.terminals.find({local_port, c.cell.header.vpi, c.cell.header.vci});
    if (it == node.terminals.end() || it->second != c.channel) {
      // unknown or misrouted after header corruption
      lose(c, DropReason::UnknownVc, node_id);
      return;
    }
    Channel& ch = channels[c.channel];
    ++ch.delivered;
    switch (ch.sink) {
      case SinkKind::Data: deliver_data(ch, c); break;
      case SinkKind::AbrFeedback: deliver_feedback(ch, c); break;
      case SinkKind::LaneFrame: deliver_lane_cell(ch, c); break;
    }
  }

  void deliver_data(Channel& ch, const SimCell& c) {
    Connection& conn = conns[ch.owner];
    const double now = events.now();
    ++conn.metrics.delivered;
    if (now >= half_time) ++conn.delivered_second_half;
    const double delay = now - c.created;
    conn.metrics.delay_samples.push_back(delay);
    if (delay < ch.propagation) ++conn.delay_bound_violations;
    if (ch.last_delivered_seq && c.seq <= *ch.last_delivered_seq) ++conn.out_of_order;
    ch.last_delivered_seq = c.seq;

    const auto* gen = generator_for(ch.owner);
    if (gen && gen->spec.frame_size) {
      auto r = ch.reassembler.push(c.cell.payload, c.cell.header.pti.aal5_last);
      if (auto* f = std::get_if<aal5::Frame>(&r)) {
        ++conn.frames_delivered;
        // frames arrive in order unless one was lost; find its sequence by content
        bool matched = false;
        for (std::uint64_t s = conn.frame_seq_delivered; s < gen->frame_seq && !matched; ++s) {
          if (pattern_frame(ch.id, s, f->size()) == *f) {
            conn.frame_seq_delivered = s + 1;
            matched = true;
          }
        }
        if (!matched) ++conn.payload_mismatches;
      } else if (std::holds_alternative<aal5::ReassemblyError>(r)) {
        ++conn.reassembly_errors;
      }
    } else if (c.cell.payload != pattern_payload(ch.id, c.seq)) {
      ++conn.payload_mismatches;
    }

    if (conn.abr_dest) {
      if (auto ind = conn.abr_dest->observe(c.cell)) {
        const auto ci = ch.owner;
        events.schedule(now, EventKind::FeedbackEpoch, [this, ci, ind = *ind] { send_feedback(ci, ind); });
      }
    }
  }

  void send_feedback(std::uint32_t ci, const abr::FeedbackIndication& ind) {
    Connection& conn = conns[ci];
    Channel& ch = channels[*conn.backward];
    SimCell c;
    c.channel = ch.id;
    c.seq = ch.next_seq++;
    c.created = events.now();
    c.cell.kind = ports[ch.out_ports[0]].kind;
    c.cell.header.vpi = ch.labels[0].vpi;
    c.cell.header.vci = ch.labels[0].vci;
    c.cell.header.pti.is_management = true;
    c.cell.payload = abr::encode_feedback(ind);
    ++ch.sent;
    emit_on_port(std::move(c), ch.out_ports[0]);
  }

  void deliver_feedback(Channel& ch, const SimCell& c) {
    Connection& conn = conns[ch.owner];
    const auto ind = abr::decode_feedback(c.cell.payload);
    const double acr = conn.abr_source->adjust(ind);
    const auto& p = conn.abr_source->params();
    if (acr < p.mcr || acr > p.pcr) ++conn.abr.bound_violations;
    ++conn.abr.adjustments;
    if (ind.congested) ++conn.abr.congested_indications;
    conn.abr.final_acr = acr;
    conn.abr.min_acr = std::min(conn.abr.min_acr, acr);
    conn.abr.max_acr = std::max(conn.abr.max_acr, acr);
    conn.abr.series.push_back({events.now(), acr, ind.congested});
  }

  const Generator* generator_for(std::uint32_t conn) const {
    for (const auto& g : generators)
      if (g.conn == conn) return &g;
    return nullptr;
  }

  // ---- generators ----------------------------------------------------------

  std::optional<double> next_fire(Generator& g, double now, bool first) {
    Connection& conn = conns[g.conn];
    if (g.spec.max_cells && g.emitted >= *g.spec.max_cells) return std::nullopt;
    double t = 0.0;
    if (const auto* p = std::get_if<PacedCbr>(&g.spec.kind)) {
      t = g.spec.start_s + static_cast<double>(g.emitted) / p->rate;
    } else if (const auto* u = std::get_if<GreedyUbr>(&g.spec.kind)) {
      t = g.spec.start_s + static_cast<double>(g.emitted) / u->rate_cap;
    } else if (std::holds_alternative<GreedyAbr>(g.spec.kind)) {
      auto n = conn.abr_source->next_emission(first ? g.spec.start_s : now, true);
      if (!n) return std::nullopt;
      t = *n;
    } else {
      t = g.on_off->next();
    }
    const double stop = std::min(g.spec.stop_s.value_or(scenario.duration_s), scenario.duration_s);
    if (t > stop) return std::nullopt;
    return std::max(t, now);
  }

  void schedule_generator(std::size_t gi, bool first) {
    auto t = next_fire(generators[gi], events.now(), first);
    if (!t) return;
    events.schedule(*t, EventKind::GeneratorFire, [this, gi] { fire_generator(gi); });
  }

  void fire_generator(std::size_t gi) {
    Generator& g = generators[gi];
    Connection& conn = conns[g.conn];
    Channel& ch = channels[conn.forward];
    const double now = events.now();

    SimCell c;
    c.channel = ch.id;
    c.seq = ch.next_seq++;
    c.created = now;
    c.cell.kind = ports[ch.out_ports[0]].kind;
    c.cell.header.vpi = ch.labels[0].vpi;
    c.cell.header.vci = ch.labels[0].vci;
    if (g.spec.frame_size) {
      if (g.frame_cells.empty()) {
        const auto len = static_cast<std::size_t>(
            g.rng.uniform_int(g.spec.frame_size->min_bytes, g.spec.frame_size->max_bytes));
        const auto frame = pattern_frame(ch.id, g.frame_seq++, len);
        for (auto& s : aal5::segment(frame)) g.frame_cells.push_back(s);
        ++conn.frames_sent;
      }
      c.cell.payload = g.frame_cells.front().bytes;
      c.cell.header.pti.aal5_last = g.frame_cells.front().last;
      g.frame_cells.pop_front();
    } else {
      c.cell.payload = pattern_payload(ch.id, c.seq);
    }
    if (g.spec.clp1_fraction > 0.0 && g.rng.bernoulli(g.spec.clp1_fraction)) c.cell.header.clp = true;
    c.source_clp = c.cell.header.clp;

    ++g.emitted;
    ++ch.sent;
    if (c.source_clp) ++conn.metrics.transmitted_clp1;
    else ++conn.metrics.transmitted_clp0;
    if (conn.abr_source) conn.abr_source->record_emission(now);
    if (conn.spec.trace)
      conn.trace.push_back({now, ports[ch.out_ports[0]].local, serialize(c.cell)});

    if (conn.shaper) {
      auto release = conn.shaper->offer(now);
      if (!release) {
        lose(c, DropReason::ShaperOverflow, ch.nodes[0]);
      } else if (*release > now) {
        ++ch.in_shaper;
        const unsigned port = ch.out_ports[0];
        events.schedule(*release, EventKind::TimerExpiry, [this, port, c]() mutable {
          --channels[c.channel].in_shaper;
          c.created = events.now();
          emit_on_port(std::move(c), port);
        });
      } else {
        emit_on_port(std::move(c), ch.out_ports[0]);
      }
    } else {
      emit_on_port(std::move(c), ch.out_ports[0]);
    }
    check_conservation(ch);
    schedule_generator(gi, false);
  }

  // ---- LANE ----------------------------------------------------------------

  void send_frame(std::uint32_t channel_id, const std::vector<std::uint8_t>& frame) {
    Channel& ch = channels[channel_id];
    for (const auto& seg : aal5::segment(frame)) {
      SimCell c;
      c.channel = ch.id;
      c.seq = ch.next_seq++;
      c.created = events.now();
      c.cell.kind = ports[ch.out_ports[0]].kind;
      c.cell.header.vpi = ch.labels[0].vpi;
      c.cell.header.vci = ch.labels[0].vci;
      c.cell.header.pti.aal5_last = seg.last;
      c.cell.payload = seg.bytes;
      ++ch.sent;
      emit_on_port(std::move(c), ch.out_ports[0]);
    }
  }

  void deliver_lane_cell(Channel& ch, const SimCell& c) {
    auto r = ch.reassembler.push(c.cell.payload, c.cell.header.pti.aal5_last);
    if (std::holds_alternative<aal5::ReassemblyError>(r)) {
      ++lane->reassembly_errors;
      return;
    }
    auto* frame = std::get_if<aal5::Frame>(&r);
    if (!frame) return;
    ++lane->reassembled;
    const std::size_t li = ch.owner;
    switch (ch.lane_role) {
      case LaneRole::CtrlUp: {
        auto msg = lane::decode_control(*frame);
        if (!msg || !std::holds_alternative<lane::ArpRequest>(*msg)) return;
        const auto& req = std::get<lane::ArpRequest>(*msg);
        lane::ArpReply reply{req.target, lane->les.handle_arp(req.target)};
        send_frame(lane->lecs[li].ctrl_down, lane::encode_control(reply));
        break;
      }
      case LaneRole::CtrlDown: {
        auto msg = lane::decode_control(*frame);
        if (!msg || !std::holds_alternative<lane::ArpReply>(*msg)) return;
        const auto& reply = std::get<lane::ArpReply>(*msg);
        auto& rt = lane->lecs[li];
        if (auto it = rt.arp_sent_at.find(reply.target); it != rt.arp_sent_at.end()) {
          lane->arp_latencies.push_back(events.now() - it->second);
          rt.arp_sent_at.erase(it);
        }
        perform(li, rt.lec.on_arp_reply(reply, events.now()));
        break;
      }
      case LaneRole::McastSend: {
        const auto origin = lane->lecs[li].lec.atm();
        for (const auto& member : lane->bus.forward(origin)) {
          ++lane->bus_forwarded;
          send_frame(lane->lecs[lane->lec_by_atm.at(member)].mcast_fwd, *frame);
        }
        break;
      }
      case LaneRole::McastFwd:
      case LaneRole::DataDirect:
        lec_receive(li, *frame);
        break;
    }
  }

  void lec_receive(std::size_t li, const aal5::Frame& bytes) {
    auto frame = lane::decode_data_frame(bytes);
    if (!frame) return;
    auto& rt = lane->lecs[li];
    const bool mine = frame->dest == rt.lec.mac();
    if (!mine && !frame->dest.is_group()) {
      ++rt.filtered;
      return;
    }
    std::uint64_t id = 0;
    for (int k = 0; k < 8 && static_cast<std::size_t>(k) < frame->payload.size(); ++k)
      id = (id << 8) | frame->payload[static_cast<std::size_t>(k)];
    if (!rt.seen_frames.insert(id).second) ++lane->duplicates;
    ++lane->frames_delivered;
    if (mine) {
      ++rt.unicast_received;
    } else {
      ++rt.broadcast_received;
      auto& receipts = lane->broadcast_receipts[id];
      receipts.resize(lane->lecs.size(), 0);
      ++receipts[li];
    }
  }

  void perform(std::size_t li, std::vector<lane::Action> actions) {
    for (auto& a : actions) {
      std::visit(
          [&](auto& act) {
            using A = std::decay_t<decltype(act)>;
            auto& rt = lane->lecs[li];
            if constexpr (std::is_same_v<A, lane::SendToBus>) {
              send_frame(rt.mcast_send, lane::encode_data_frame(act.frame));
            } else if constexpr (std::is_same_v<A, lane::SendDirect>) {
              send_frame(act.vc, lane::encode_data_frame(act.frame));
            } else if constexpr (std::is_same_v<A, lane::SendArpRequest>) {
              rt.arp_sent_at[act.target] = events.now();
              send_frame(rt.ctrl_up, lane::encode_control(lane::ArpRequest{act.target}));
              events.schedule(act.timeout_at, EventKind::TimerExpiry, [this, li, target = act.target] {
                lane->lecs[li].lec.on_arp_timeout(target, events.now());
              });
            } else {
              events.schedule(events.now(), EventKind::ControlMessage,
                              [this, li, target = act.target, addr = act.address] {
                                setup_direct_vc(li, target, addr);
                              });
            }
          },
          a);
    }
  }

  void setup_direct_vc(std::size_t li, const lane::MacAddress& target, const lane::AtmAddress& addr) {
    auto& rt = lane->lecs[li];
    auto peer = lane->lec_by_atm.find(addr);
    if (peer == lane->lec_by_atm.end()) {
      rt.lec.on_vc_rejected(target);
      return;
    }
    const auto path = shortest_path(rt.host, lane->lecs[peer->second].host);
    const std::string name = "lane:" + nodes[rt.host].spec.name + ":direct:" + target.to_string() + ":" +
                             std::to_string(lane->vc_setups);
    auto route = bookings_on(path);
    if (path.empty() ||
        std::holds_alternative<Reject>(
            CacBooker::admit(route, name, lane->spec.vc_category, lane->spec.vc_descriptor))) {
      rt.lec.on_vc_rejected(target);
      return;
    }
    std::uint32_t id = 0;
    try {
      id = open_channel(name, path, {}, SinkKind::LaneFrame, static_cast<std::uint32_t>(peer->second),
                        lane->spec.vc_category);
    } catch (const ValidationError&) {
      CacBooker::release(route, name);
      rt.lec.on_vc_rejected(target);
      return;
    }
    channels[id].lane_role = LaneRole::DataDirect;
    ++lane->vc_setups;
    perform(li, rt.lec.on_vc_ready(target, id, events.now()));
  }

  void lane_send(std::size_t li, const lane::MacAddress& to, std::size_t bytes) {
    auto& rt = lane->lecs[li];
    const double now = events.now();
    lane::DataFrame f{to, rt.lec.mac(), std::vector<std::uint8_t>(bytes, 0)};
    const std::uint64_t id = lane->next_frame_id++;
    for (int k = 0; k < 8; ++k) f.payload[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(id >> (56 - 8 * k));
    for (std::size_t i = 8; i < bytes; ++i) f.payload[i] = static_cast<std::uint8_t>(i);
    if (to.is_group()) {
      lane->broadcast_sender[id] = li;
    } else if (const auto* entry = rt.lec.lookup(to, now)) {
      const auto truth = lane->les.handle_arp(to);
      if (truth && *truth == entry->address) ++lane->coherent;
      else ++lane->incoherent;
    }
    perform(li, rt.lec.send(f, now));
  }

  void schedule_lane_traffic() {
    for (const auto& t : lane->spec.traffic) {
      std::size_t li = 0;
      for (; li < lane->lecs.size(); ++li)
        if (nodes[lane->lecs[li].host].spec.name == t.from) break;
      for (std::uint64_t k = 0; k < t.count; ++k) {
        const double at = t.start_s + static_cast<double>(k) * t.interval_s;
        if (at > scenario.duration_s) break;
        events.schedule(at, EventKind::GeneratorFire,
                        [this, li, to = t.to, bytes = t.bytes] { lane_send(li, to, bytes); });
      }
    }
  }

  // ---- run -----------------------------------------------------------------

  MetricsReport run() {
    if (ran) throw std::logic_error("Engine::run may only be called once");
    ran = true;
    for (std::size_t gi = 0; gi < generators.size(); ++gi) schedule_generator(gi, true);
    if (lane) schedule_lane_traffic();

    while (auto t = events.peek_time()) {
      if (*t > scenario.duration_s) break;
      auto ev = events.next_event();
      ev->action();
    }
    verify_queues();
    return report();
  }

  void verify_queues() {
    std::vector<std::uint64_t> counted(channels.size(), 0);
    for (auto& p : ports) {
      // drain a copy so the live queue is untouched
      auto copy = p.queue;
      while (auto c = copy.dequeue()) ++counted[c->channel];
    }
    for (const auto& ch : channels) {
      if (counted[ch.id] != ch.queued)
        throw std::logic_error("queue accounting mismatch on channel " + ch.name);
      check_conservation(ch);
    }
  }

  MetricsReport report() {
    MetricsReport r;
    r.duration_s = scenario.duration_s;
    r.seed = scenario.seed;
    r.events = events.dispatched();

    for (auto& conn : conns) {
      const Channel& ch = channels[conn.forward];
      ConnectionReport cr;
      cr.id = conn.spec.id;
      cr.category = conn.spec.category;
      cr.transmitted_clp0 = conn.metrics.transmitted_clp0;
      cr.transmitted_clp1 = conn.metrics.transmitted_clp1;
      cr.lost_clp0 = conn.metrics.lost_clp0;
      cr.lost_clp1 = conn.metrics.lost_clp1;
      cr.delivered = conn.metrics.delivered;
      cr.in_flight = ch.queued + ch.in_transit + ch.in_shaper;
      if (conn.metrics.in_flight() != cr.in_flight)
        throw std::logic_error("in-flight mismatch on connection " + conn.spec.id);
      cr.clr_clp0 = compute_clr(conn.metrics, ClpClass::Clp0);
      cr.clr_clp1 = compute_clr(conn.metrics, ClpClass::Clp1);
      cr.clr = compute_clr(conn.metrics, ClpClass::Both);
      cr.delay = delay_stats(conn.metrics.delay_samples);
      for (const auto& [reason, n] : conn.drops) cr.drops[to_string(reason)] = n;
      cr.policer_tagged = conn.policer_tagged;
      cr.frames_sent = conn.frames_sent;
      cr.frames_delivered = conn.frames_delivered;
      cr.reassembly_errors = conn.reassembly_errors;
      cr.out_of_order = conn.out_of_order;
      cr.payload_mismatches = conn.payload_mismatches;
      cr.delay_bound_violations = conn.delay_bound_violations;
      cr.route_propagation_s = ch.propagation;
      r.connections.push_back(std::move(cr));

      if (conn.abr_source) {
        conn.abr.delivered_second_half = conn.delivered_second_half;
        r.abr.push_back(conn.abr);
      }
    }
    if (r.abr.size() >= 2) {
      double sum = 0.0, sq = 0.0;
      for (const auto& a : r.abr) {
        const auto x = static_cast<double>(a.delivered_second_half);
        sum += x;
        sq += x * x;
      }
      r.abr_fairness = sq > 0.0 ? (sum * sum) / (static_cast<double>(r.abr.size()) * sq) : 1.0;
    }

    for (const auto& n : nodes)
      if (n.spec.type == NodeType::Switch) r.switches.push_back({n.spec.name, n.counters});

    for (const auto& p : ports) {
      LinkReport lr;
      lr.from = nodes[p.node].spec.name;
      lr.to = nodes[p.peer_node].spec.name;
      lr.cells = p.cells_sent;
      lr.utilization = std::min(1.0, p.busy_time / scenario.duration_s);
      lr.utilization_second_half = std::min(1.0, p.busy_time_second_half / (scenario.duration_s - half_time));
      lr.max_queue = p.max_occupancy;
      lr.queue_capacity = p.queue.config().capacity;
      r.links.push_back(lr);
    }

    if (lane) {
      LaneReport l;
      for (const auto& rt : lane->lecs) {
        const auto& c = rt.lec.counters();
        l.arp_requests += c.arp_requests;
        l.arp_replies += c.arp_replies;
        l.arp_unknown += c.arp_unknown;
        l.bus_frames += c.bus_frames;
        l.bus_unicast_frames += c.bus_unicast_frames;
        l.direct_frames += c.direct_frames;
        l.pending_drops += c.pending_drops;
        l.vc_setup_failures += c.vc_setup_failures;
        l.post_resolution_direct += c.post_resolution_direct;
        l.post_resolution_other += c.post_resolution_other;
        l.clients.push_back({nodes[rt.host].spec.name, rt.lec.mac().to_string(), c, rt.unicast_received,
                             rt.broadcast_received, rt.filtered});
      }
      l.bus_forwarded = lane->bus_forwarded;
      l.vc_setups = lane->vc_setups;
      l.frames_delivered = lane->frames_delivered;
      l.duplicates = lane->duplicates;
      l.reassembled_frames = lane->reassembled;
      l.reassembly_errors = lane->reassembly_errors;
      l.cells_lost = lane->cells_lost;
      l.cache_coherent_lookups = lane->coherent;
      l.cache_incoherent_lookups = lane->incoherent;
      l.arp_latency = delay_stats(lane->arp_latencies);
      l.broadcast_frames = lane->broadcast_sender.size();
      for (const auto& [id, sender] : lane->broadcast_sender) {
        auto it = lane->broadcast_receipts.find(id);
        bool complete = it != lane->broadcast_receipts.end();
        for (std::size_t i = 0; complete && i < lane->lecs.size(); ++i)
          complete = it->second[i] == (i == sender ? 0u : 1u);
        if (complete) ++l.broadcast_complete;
      }
      r.lane = std::move(l);
    }
    return r;
  }
};

// ---------------------------------------------------------------------------

Engine::Engine(Scenario scenario, EngineOptions options)
    : impl_(std::make_unique<Impl>(std::move(scenario), options)) {}
Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

MetricsReport Engine::run() { return impl_->run(); }

const std::vector<DiscardRecord>& Engine::discard_log() const { return impl_->discards; }

const std::vector<TraceRecord>& Engine::trace(const std::string& connection) const {
  return impl_->conns.at(impl_->conn_index.at(connection)).trace;
}

MetricsReport run(const Scenario& scenario) { return Engine(scenario).run(); }

}  // namespace atmsim
