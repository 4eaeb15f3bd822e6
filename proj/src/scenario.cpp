#include "atmsim/scenario.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "atmsim/errors.hpp"
#include "atmsim/switch.hpp"

namespace atmsim {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where, std::string("missing key '") + key + "'");
  return j.at(key);
}

template <typename T>
T as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fail(where, e.what());
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return as<T>(j.at(key), where + "." + key);
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  return optional_field<T>(j, key, where).value_or(fallback);
}

ServiceCategory category_of(const json& j, const std::string& where) {
  const auto s = as<std::string>(j, where);
  auto c = parse_category(s);
  if (!c) fail(where, "unknown service category '" + s + "'");
  return *c;
}

lane::MacAddress mac_of(const json& j, const std::string& where) {
  const auto s = as<std::string>(j, where);
  auto m = lane::MacAddress::parse(s);
  if (!m) fail(where, "bad MAC address '" + s + "'");
  return *m;
}

TrafficDescriptor descriptor_of(const json& j, const std::string& where) {
  TrafficDescriptor d;
  d.pcr = as<double>(require(j, "pcr", where), where + ".pcr");
  d.scr = optional_field<double>(j, "scr", where);
  d.mcr = optional_field<double>(j, "mcr", where);
  if (auto mbs = optional_field<std::int64_t>(j, "mbs", where)) {
    if (*mbs < 0 || *mbs > 0xFFFFFFFF) fail(where + ".mbs", "out of range");
    d.mbs = static_cast<std::uint32_t>(*mbs);
  }
  d.cdvt = optional_field<double>(j, "cdvt", where);
  return d;
}

QosRequirement qos_of(const json& j, const std::string& where) {
  QosRequirement q;
  if (!j.is_object()) fail(where, "expected an object");
  q.clr_clp0 = optional_field<double>(j, "clr_clp0", where);
  q.clr_clp1 = optional_field<double>(j, "clr_clp1", where);
  q.max_ctd = optional_field<double>(j, "max_ctd", where);
  q.max_cdv = optional_field<double>(j, "max_cdv", where);
  return q;
}

GeneratorKind generator_kind_of(const json& j, const std::string& where) {
  const auto type = as<std::string>(require(j, "type", where), where + ".type");
  if (type == "paced_cbr") return PacedCbr{as<double>(require(j, "rate", where), where + ".rate")};
  if (type == "on_off")
    return OnOffVbr{as<double>(require(j, "peak_rate", where), where + ".peak_rate"),
                    as<double>(require(j, "mean_on_s", where), where + ".mean_on_s"),
                    as<double>(require(j, "mean_off_s", where), where + ".mean_off_s")};
  if (type == "greedy_abr") return GreedyAbr{};
  if (type == "greedy_ubr")
    return GreedyUbr{as<double>(require(j, "rate_cap", where), where + ".rate_cap")};
  fail(where + ".type", "unknown generator type '" + type + "'");
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("scenario must be a JSON object");

  Scenario s;
  s.duration_s = as<double>(require(root, "duration_s", "scenario"), "duration_s");
  s.seed = field_or<std::uint64_t>(root, "seed", 1, "scenario");
  s.host_queue_capacity = field_or<std::size_t>(root, "host_queue_capacity", 4096, "scenario");

  const auto& nodes = require(root, "nodes", "scenario");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string w = "nodes[" + std::to_string(i) + "]";
    const auto& n = nodes.at(i);
    NodeSpec spec;
    spec.name = as<std::string>(require(n, "name", w), w + ".name");
    const auto type = as<std::string>(require(n, "type", w), w + ".type");
    if (type == "host") spec.type = NodeType::Host;
    else if (type == "switch") spec.type = NodeType::Switch;
    else fail(w + ".type", "expected 'host' or 'switch', got '" + type + "'");
    spec.queue_capacity = field_or<std::size_t>(n, "queue_capacity", 256, w);
    spec.efci_threshold = optional_field<std::size_t>(n, "efci_threshold", w);
    spec.clp_threshold = optional_field<std::size_t>(n, "clp_threshold", w);
    s.nodes.push_back(std::move(spec));
  }

  const auto& links = require(root, "links", "scenario");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string w = "links[" + std::to_string(i) + "]";
    const auto& l = links.at(i);
    LinkSpec spec;
    spec.a = as<std::string>(require(l, "a", w), w + ".a");
    spec.b = as<std::string>(require(l, "b", w), w + ".b");
    spec.bit_rate = as<double>(require(l, "bit_rate", w), w + ".bit_rate");
    spec.propagation_delay_s = field_or<double>(l, "propagation_delay_s", 0.0, w);
    spec.header_bit_error_rate = field_or<double>(l, "header_bit_error_rate", 0.0, w);
    spec.booking_factor = field_or<double>(l, "booking_factor", 1.0, w);
    s.links.push_back(std::move(spec));
  }

  if (root.contains("connections")) {
    const auto& conns = root.at("connections");
    for (std::size_t i = 0; i < conns.size(); ++i) {
      const std::string w = "connections[" + std::to_string(i) + "]";
      const auto& c = conns.at(i);
      ConnectionSpec spec;
      spec.id = as<std::string>(require(c, "id", w), w + ".id");
      spec.category = category_of(require(c, "category", w), w + ".category");
      spec.descriptor = descriptor_of(require(c, "descriptor", w), w + ".descriptor");
      if (c.contains("qos")) spec.qos = qos_of(c.at("qos"), w + ".qos");
      spec.route = as<std::vector<std::string>>(require(c, "route", w), w + ".route");
      if (c.contains("labels")) {
        for (const auto& lab : c.at("labels")) {
          spec.labels.push_back({as<std::uint16_t>(require(lab, "vpi", w), w + ".labels.vpi"),
                                 as<std::uint16_t>(require(lab, "vci", w), w + ".labels.vci")});
        }
      }
      if (auto p = optional_field<std::string>(c, "policing", w)) {
        if (*p == "none") spec.policing = PolicingMode::None;
        else if (*p == "tag") spec.policing = PolicingMode::Tag;
        else if (*p == "drop") spec.policing = PolicingMode::Drop;
        else fail(w + ".policing", "expected none, tag or drop");
      }
      spec.shaping = field_or<bool>(c, "shaping", false, w);
      spec.shaper_depth = field_or<std::size_t>(c, "shaper_depth", kDefaultShaperDepth, w);
      spec.trace = field_or<bool>(c, "trace", false, w);
      if (c.contains("abr")) {
        const auto& a = c.at("abr");
        spec.abr.air = optional_field<double>(a, "air", w + ".abr");
        spec.abr.rdf = optional_field<double>(a, "rdf", w + ".abr");
        spec.abr.nrm = optional_field<std::uint32_t>(a, "nrm", w + ".abr");
        spec.abr.initial_acr = optional_field<double>(a, "initial_acr", w + ".abr");
      }
      s.connections.push_back(std::move(spec));
    }
  }

  if (root.contains("generators")) {
    const auto& gens = root.at("generators");
    for (std::size_t i = 0; i < gens.size(); ++i) {
      const std::string w = "generators[" + std::to_string(i) + "]";
      const auto& g = gens.at(i);
      GeneratorSpec spec;
      spec.connection = as<std::string>(require(g, "connection", w), w + ".connection");
      spec.kind = generator_kind_of(g, w);
      spec.start_s = field_or<double>(g, "start_s", 0.0, w);
      spec.stop_s = optional_field<double>(g, "stop_s", w);
      spec.max_cells = optional_field<std::uint64_t>(g, "max_cells", w);
      spec.clp1_fraction = field_or<double>(g, "clp1_fraction", 0.0, w);
      if (g.contains("frame_bytes")) {
        const auto& f = g.at("frame_bytes");
        FrameSize fs;
        if (f.is_number()) {
          fs.min_bytes = fs.max_bytes = as<std::size_t>(f, w + ".frame_bytes");
        } else {
          fs.min_bytes = as<std::size_t>(require(f, "min", w), w + ".frame_bytes.min");
          fs.max_bytes = as<std::size_t>(require(f, "max", w), w + ".frame_bytes.max");
        }
        spec.frame_size = fs;
      }
      s.generators.push_back(std::move(spec));
    }
  }

  if (root.contains("lane") && !root.at("lane").is_null()) {
    const auto& l = root.at("lane");
    const std::string w = "lane";
    LaneSpec spec;
    spec.server = as<std::string>(require(l, "server", w), w + ".server");
    spec.parallel_bus = field_or<bool>(l, "parallel_bus", false, w);
    spec.pending_depth = field_or<std::size_t>(l, "pending_depth", 64, w);
    spec.arp_timeout_s = field_or<double>(l, "arp_timeout_s", 1.0, w);
    spec.cache_aging_s = field_or<double>(l, "cache_aging_s", 300.0, w);
    if (l.contains("vc_category")) spec.vc_category = category_of(l.at("vc_category"), w + ".vc_category");
    if (l.contains("vc_descriptor")) spec.vc_descriptor = descriptor_of(l.at("vc_descriptor"), w + ".vc_descriptor");
    for (const auto& c : require(l, "clients", w)) {
      spec.clients.push_back({as<std::string>(require(c, "host", w), w + ".clients.host"),
                              mac_of(require(c, "mac", w), w + ".clients.mac")});
    }
    if (l.contains("traffic")) {
      for (const auto& t : l.at("traffic")) {
        LaneTrafficSpec tr;
        tr.from = as<std::string>(require(t, "from", w), w + ".traffic.from");
        tr.to = mac_of(require(t, "to", w), w + ".traffic.to");
        tr.count = field_or<std::uint64_t>(t, "count", 1, w + ".traffic");
        tr.start_s = field_or<double>(t, "start_s", 0.0, w + ".traffic");
        tr.interval_s = field_or<double>(t, "interval_s", 1e-3, w + ".traffic");
        tr.bytes = field_or<std::size_t>(t, "bytes", 64, w + ".traffic");
        spec.traffic.push_back(tr);
      }
    }
    s.lane = std::move(spec);
  }
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> out;
  if (!(s.duration_s > 0.0)) out.push_back("duration_s must be positive");
  if (s.host_queue_capacity == 0) out.push_back("host_queue_capacity must be positive");

  std::map<std::string, const NodeSpec*> nodes;
  for (const auto& n : s.nodes) {
    if (n.name.empty()) out.push_back("node with empty name");
    if (!nodes.emplace(n.name, &n).second) out.push_back("duplicate node '" + n.name + "'");
    if (n.queue_capacity == 0) out.push_back("node '" + n.name + "': queue_capacity must be positive");
    if (n.efci_threshold && *n.efci_threshold > n.queue_capacity)
      out.push_back("node '" + n.name + "': efci_threshold exceeds queue_capacity");
    if (n.clp_threshold && *n.clp_threshold > n.queue_capacity)
      out.push_back("node '" + n.name + "': clp_threshold exceeds queue_capacity");
  }

  // one booking per link direction, keyed (from, to)
  std::map<std::pair<std::string, std::string>, LinkBooking> bookings;
  for (const auto& l : s.links) {
    const std::string w = "link " + l.a + "-" + l.b;
    bool ok = true;
    if (!nodes.count(l.a) || !nodes.count(l.b)) {
      out.push_back(w + ": unknown endpoint");
      ok = false;
    }
    if (l.a == l.b) {
      out.push_back(w + ": self loop");
      ok = false;
    }
    if (!(l.bit_rate > 0.0)) {
      out.push_back(w + ": bit_rate must be positive");
      ok = false;
    }
    if (!(l.propagation_delay_s >= 0.0)) out.push_back(w + ": propagation_delay_s must be non-negative");
    if (!(l.header_bit_error_rate >= 0.0 && l.header_bit_error_rate <= 1.0))
      out.push_back(w + ": header_bit_error_rate must lie in [0,1]");
    if (!(l.booking_factor > 0.0)) {
      out.push_back(w + ": booking_factor must be positive");
      ok = false;
    }
    if (bookings.count({l.a, l.b})) {
      out.push_back(w + ": duplicate link");
      ok = false;
    }
    if (ok) {
      const double cap = l.bit_rate / static_cast<double>(kCellBits);
      bookings.emplace(std::pair{l.a, l.b}, LinkBooking(cap, l.booking_factor));
      bookings.emplace(std::pair{l.b, l.a}, LinkBooking(cap, l.booking_factor));
    }
  }

  std::map<std::string, const ConnectionSpec*> conns;
  for (const auto& c : s.connections) {
    const std::string w = "connection " + c.id;
    if (!conns.emplace(c.id, &c).second) out.push_back(w + ": duplicate id");

    const auto violations = validate_contract(c.category, c.descriptor, c.qos);
    for (const auto& v : violations) out.push_back(w + ": " + v.message);

    bool route_ok = c.route.size() >= 2;
    if (!route_ok) out.push_back(w + ": route needs at least two nodes");
    for (std::size_t i = 0; i < c.route.size(); ++i) {
      auto it = nodes.find(c.route[i]);
      if (it == nodes.end()) {
        out.push_back(w + ": unknown node '" + c.route[i] + "' in route");
        route_ok = false;
        continue;
      }
      const bool endpoint = i == 0 || i + 1 == c.route.size();
      if (endpoint && it->second->type != NodeType::Host) {
        out.push_back(w + ": route must start and end at hosts");
        route_ok = false;
      }
      if (!endpoint && it->second->type != NodeType::Switch) {
        out.push_back(w + ": intermediate node '" + c.route[i] + "' is not a switch");
        route_ok = false;
      }
      if (i > 0 && !bookings.count({c.route[i - 1], c.route[i]})) {
        out.push_back(w + ": no link between '" + c.route[i - 1] + "' and '" + c.route[i] + "'");
        route_ok = false;
      }
    }
    if (!c.labels.empty() && c.labels.size() + 1 != c.route.size())
      out.push_back(w + ": labels must give one VPI/VCI per hop");
    for (const auto& lab : c.labels)
      if (lab.vpi > max_vpi(InterfaceKind::NNI)) out.push_back(w + ": VPI out of range");
    if (c.category == ServiceCategory::ABR) {
      try {
        auto p = abr::SourceParams::defaults(c.descriptor.pcr, c.descriptor.mcr.value_or(0.0));
        if (c.abr.air) p.air = *c.abr.air;
        if (c.abr.rdf) p.rdf = *c.abr.rdf;
        if (c.abr.nrm) p.nrm = *c.abr.nrm;
        if (c.abr.initial_acr) p.initial_acr = *c.abr.initial_acr;
        abr::check_params(p);
      } catch (const std::exception& e) {
        out.push_back(w + ": " + e.what());
      }
    }
    if (c.shaping && c.shaper_depth == 0) out.push_back(w + ": shaper_depth must be positive");

    if (route_ok && violations.empty()) {
      std::vector<LinkBooking*> path;
      for (std::size_t i = 1; i < c.route.size(); ++i)
        path.push_back(&bookings.at({c.route[i - 1], c.route[i]}));
      if (const auto decision = CacBooker::admit(path, c.id, c.category, c.descriptor); const auto* r = std::get_if<Reject>(&decision))
        out.push_back(w + ": admission rejected: " + r->reason);
    }
  }

  std::set<std::string> generated;
  for (const auto& g : s.generators) {
    const std::string w = "generator for " + g.connection;
    auto it = conns.find(g.connection);
    if (it == conns.end()) {
      out.push_back(w + ": unknown connection");
      continue;
    }
    if (!generated.insert(g.connection).second) out.push_back(w + ": connection already has a generator");
    const auto cat = it->second->category;
    const bool matches = std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, PacedCbr>) return cat == ServiceCategory::CBR;
          if constexpr (std::is_same_v<K, OnOffVbr>)
            return cat == ServiceCategory::VBR_RT || cat == ServiceCategory::VBR_NRT;
          if constexpr (std::is_same_v<K, GreedyAbr>) return cat == ServiceCategory::ABR;
          if constexpr (std::is_same_v<K, GreedyUbr>) return cat == ServiceCategory::UBR;
        },
        g.kind);
    if (!matches)
      out.push_back(w + ": generator type does not match category " + std::string(to_string(cat)));
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, PacedCbr>) {
            if (!(k.rate > 0.0)) out.push_back(w + ": rate must be positive");
          } else if constexpr (std::is_same_v<K, OnOffVbr>) {
            if (!(k.peak_rate > 0.0 && k.mean_on_s > 0.0 && k.mean_off_s >= 0.0))
              out.push_back(w + ": on_off needs positive peak_rate and mean_on_s, mean_off_s >= 0");
          } else if constexpr (std::is_same_v<K, GreedyUbr>) {
            if (!(k.rate_cap > 0.0)) out.push_back(w + ": rate_cap must be positive");
          }
        },
        g.kind);
    if (!(g.start_s >= 0.0)) out.push_back(w + ": start_s must be non-negative");
    if (g.stop_s && *g.stop_s < g.start_s) out.push_back(w + ": stop_s precedes start_s");
    if (!(g.clp1_fraction >= 0.0 && g.clp1_fraction <= 1.0))
      out.push_back(w + ": clp1_fraction must lie in [0,1]");
    if (g.frame_size && (g.frame_size->min_bytes > g.frame_size->max_bytes ||
                         g.frame_size->max_bytes > 65535))
      out.push_back(w + ": frame_bytes must satisfy min <= max <= 65535");
  }

  if (s.lane) {
    const auto& l = *s.lane;
    auto is_host = [&](const std::string& n) {
      auto it = nodes.find(n);
      return it != nodes.end() && it->second->type == NodeType::Host;
    };
    if (!is_host(l.server)) out.push_back("lane: server '" + l.server + "' is not a host");
    for (const auto& v : validate_contract(l.vc_category, l.vc_descriptor, {}))
      out.push_back("lane: VC contract: " + v.message);
    if (l.pending_depth == 0) out.push_back("lane: pending_depth must be positive");
    if (!(l.arp_timeout_s > 0.0)) out.push_back("lane: arp_timeout_s must be positive");
    if (!(l.cache_aging_s > 0.0)) out.push_back("lane: cache_aging_s must be positive");
    std::set<std::string> hosts;
    std::set<lane::MacAddress> macs;
    for (const auto& c : l.clients) {
      if (!is_host(c.host)) out.push_back("lane: client '" + c.host + "' is not a host");
      if (c.host == l.server) out.push_back("lane: client '" + c.host + "' also hosts the server");
      if (!hosts.insert(c.host).second) out.push_back("lane: host '" + c.host + "' has two clients");
      if (c.mac.is_group()) out.push_back("lane: client MAC " + c.mac.to_string() + " is a group address");
      if (!macs.insert(c.mac).second)
        out.push_back("lane: MAC " + c.mac.to_string() + " registered twice");
    }
    for (const auto& t : l.traffic) {
      if (!hosts.count(t.from)) out.push_back("lane: traffic source '" + t.from + "' is not a client");
      if (!(t.interval_s > 0.0)) out.push_back("lane: traffic interval_s must be positive");
      if (t.bytes < 8 || t.bytes + 14 > 65535)
        out.push_back("lane: traffic bytes must lie in [8, 65521]");
    }
  }
  return out;
}

}  // namespace atmsim
