#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "atmsim/engine.hpp"

namespace atmsim {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json delay_json(const std::optional<DelayStats>& d) {
  if (!d) return nullptr;
  ordered_json j;
  j["samples"] = d->samples;
  j["mean_ctd_s"] = d->mean_ctd;
  j["min_ctd_s"] = d->min_ctd;
  j["max_ctd_s"] = d->max_ctd;
  j["cdv_peak_to_peak_s"] = d->cdv_peak_to_peak;
  j["cdv_stddev_s"] = d->cdv_stddev;
  return j;
}

ordered_json counters_json(const SwitchCounters& c) {
  ordered_json j;
  j["routed"] = c.routed;
  j["unknown_vc"] = c.unknown_vc;
  j["full_drops"] = c.full_drops;
  j["clp_threshold_drops"] = c.clp_threshold_drops;
  j["efci_marks"] = c.efci_marks;
  j["hec_corrected"] = c.hec_corrected;
  j["hec_dropped"] = c.hec_dropped;
  j["policer_tagged"] = c.policer_tagged;
  j["policer_dropped"] = c.policer_dropped;
  return j;
}

ordered_json lec_json(const lane::LecCounters& c) {
  ordered_json j;
  j["arp_requests"] = c.arp_requests;
  j["arp_replies"] = c.arp_replies;
  j["arp_unknown"] = c.arp_unknown;
  j["bus_frames"] = c.bus_frames;
  j["bus_unicast_frames"] = c.bus_unicast_frames;
  j["direct_frames"] = c.direct_frames;
  j["pending_drops"] = c.pending_drops;
  j["vc_setup_failures"] = c.vc_setup_failures;
  j["post_resolution_direct"] = c.post_resolution_direct;
  j["post_resolution_other"] = c.post_resolution_other;
  return j;
}

ordered_json to_json(const MetricsReport& r) {
  ordered_json j;
  j["duration_s"] = r.duration_s;
  j["seed"] = r.seed;
  j["events"] = r.events;

  auto& conns = j["connections"] = ordered_json::array();
  for (const auto& c : r.connections) {
    ordered_json o;
    o["id"] = c.id;
    o["category"] = std::string(to_string(c.category));
    o["transmitted_clp0"] = c.transmitted_clp0;
    o["transmitted_clp1"] = c.transmitted_clp1;
    o["lost_clp0"] = c.lost_clp0;
    o["lost_clp1"] = c.lost_clp1;
    o["delivered"] = c.delivered;
    o["in_flight"] = c.in_flight;
    o["clr_clp0"] = c.clr_clp0;
    o["clr_clp1"] = c.clr_clp1;
    o["clr"] = c.clr;
    o["delay"] = delay_json(c.delay);
    o["drops"] = ordered_json::object();
    for (const auto& [k, v] : c.drops) o["drops"][k] = v;
    o["policer_tagged"] = c.policer_tagged;
    o["frames_sent"] = c.frames_sent;
    o["frames_delivered"] = c.frames_delivered;
    o["reassembly_errors"] = c.reassembly_errors;
    o["out_of_order"] = c.out_of_order;
    o["payload_mismatches"] = c.payload_mismatches;
    o["delay_bound_violations"] = c.delay_bound_violations;
    o["route_propagation_s"] = c.route_propagation_s;
    conns.push_back(std::move(o));
  }

  auto& sw = j["switches"] = ordered_json::array();
  for (const auto& s : r.switches) {
    ordered_json o;
    o["name"] = s.name;
    o["counters"] = counters_json(s.counters);
    sw.push_back(std::move(o));
  }

  auto& links = j["links"] = ordered_json::array();
  for (const auto& l : r.links) {
    ordered_json o;
    o["from"] = l.from;
    o["to"] = l.to;
    o["cells"] = l.cells;
    o["utilization"] = l.utilization;
    o["utilization_second_half"] = l.utilization_second_half;
    o["max_queue"] = l.max_queue;
    o["queue_capacity"] = l.queue_capacity;
    links.push_back(std::move(o));
  }

  auto& abr = j["abr"] = ordered_json::array();
  for (const auto& a : r.abr) {
    ordered_json o;
    o["connection"] = a.connection;
    o["final_acr"] = a.final_acr;
    o["min_acr"] = a.min_acr;
    o["max_acr"] = a.max_acr;
    o["adjustments"] = a.adjustments;
    o["congested_indications"] = a.congested_indications;
    o["bound_violations"] = a.bound_violations;
    o["feedback_lost"] = a.feedback_lost;
    o["delivered_second_half"] = a.delivered_second_half;
    abr.push_back(std::move(o));
  }
  j["abr_fairness"] = r.abr_fairness ? ordered_json(*r.abr_fairness) : ordered_json(nullptr);

  if (r.lane) {
    const auto& l = *r.lane;
    ordered_json o;
    o["arp_requests"] = l.arp_requests;
    o["arp_replies"] = l.arp_replies;
    o["arp_unknown"] = l.arp_unknown;
    o["bus_frames"] = l.bus_frames;
    o["bus_unicast_frames"] = l.bus_unicast_frames;
    o["bus_forwarded"] = l.bus_forwarded;
    o["direct_frames"] = l.direct_frames;
    o["pending_drops"] = l.pending_drops;
    o["vc_setups"] = l.vc_setups;
    o["vc_setup_failures"] = l.vc_setup_failures;
    o["post_resolution_direct"] = l.post_resolution_direct;
    o["post_resolution_other"] = l.post_resolution_other;
    o["direct_path_fraction"] = l.direct_path_fraction();
    o["frames_delivered"] = l.frames_delivered;
    o["duplicates"] = l.duplicates;
    o["reassembled_frames"] = l.reassembled_frames;
    o["reassembly_errors"] = l.reassembly_errors;
    o["cells_lost"] = l.cells_lost;
    o["cache_coherent_lookups"] = l.cache_coherent_lookups;
    o["cache_incoherent_lookups"] = l.cache_incoherent_lookups;
    o["broadcast_frames"] = l.broadcast_frames;
    o["broadcast_complete"] = l.broadcast_complete;
    o["arp_latency"] = delay_json(l.arp_latency);
    auto& clients = o["clients"] = ordered_json::array();
    for (const auto& c : l.clients) {
      ordered_json cj;
      cj["host"] = c.host;
      cj["mac"] = c.mac;
      cj["counters"] = lec_json(c.counters);
      cj["unicast_received"] = c.unicast_received;
      cj["broadcast_received"] = c.broadcast_received;
      cj["filtered"] = c.filtered;
      clients.push_back(std::move(cj));
    }
    j["lane"] = std::move(o);
  } else {
    j["lane"] = nullptr;
  }
  return j;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

}  // namespace

std::string report_to_json(const MetricsReport& report, int indent) {
  return to_json(report).dump(indent) + "\n";
}

void write_report_files(const MetricsReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root);
  write_text(root / "report.json", report_to_json(report));

  std::string csv =
      "id,category,transmitted_clp0,transmitted_clp1,lost_clp0,lost_clp1,delivered,in_flight,"
      "clr,mean_ctd_s,max_ctd_s,cdv_peak_to_peak_s,cdv_stddev_s\n";
  for (const auto& c : report.connections) {
    csv += c.id + "," + std::string(to_string(c.category)) + "," + std::to_string(c.transmitted_clp0) + "," +
           std::to_string(c.transmitted_clp1) + "," + std::to_string(c.lost_clp0) + "," +
           std::to_string(c.lost_clp1) + "," + std::to_string(c.delivered) + "," +
           std::to_string(c.in_flight) + "," + g17(c.clr);
    if (c.delay)
      csv += "," + g17(c.delay->mean_ctd) + "," + g17(c.delay->max_ctd) + "," + g17(c.delay->cdv_peak_to_peak) +
             "," + g17(c.delay->cdv_stddev);
    else
      csv += ",,,,";
    csv += "\n";
  }
  write_text(root / "connections.csv", csv);

  csv = "switch,routed,unknown_vc,full_drops,clp_threshold_drops,efci_marks,hec_corrected,hec_dropped,"
        "policer_tagged,policer_dropped\n";
  for (const auto& s : report.switches) {
    const auto& c = s.counters;
    csv += s.name + "," + std::to_string(c.routed) + "," + std::to_string(c.unknown_vc) + "," +
           std::to_string(c.full_drops) + "," + std::to_string(c.clp_threshold_drops) + "," +
           std::to_string(c.efci_marks) + "," + std::to_string(c.hec_corrected) + "," +
           std::to_string(c.hec_dropped) + "," + std::to_string(c.policer_tagged) + "," +
           std::to_string(c.policer_dropped) + "\n";
  }
  write_text(root / "switches.csv", csv);

  csv = "from,to,cells,utilization,utilization_second_half,max_queue,queue_capacity\n";
  for (const auto& l : report.links)
    csv += l.from + "," + l.to + "," + std::to_string(l.cells) + "," + g17(l.utilization) + "," +
           g17(l.utilization_second_half) + "," + std::to_string(l.max_queue) + "," +
           std::to_string(l.queue_capacity) + "\n";
  write_text(root / "links.csv", csv);

  for (const auto& a : report.abr) {
    csv = "time_s,acr,congested\n";
    for (const auto& s : a.series) csv += g17(s.time) + "," + g17(s.acr) + "," + (s.congested ? "1" : "0") + "\n";
    write_text(root / ("abr_" + a.connection + ".csv"), csv);
  }
}

std::string summary_lines(const MetricsReport& report) {
  std::string out;
  for (const auto& c : report.connections) {
    out += c.id + " " + std::string(to_string(c.category)) + " clr=" + g6(c.clr);
    if (c.delay)
      out += " mean_ctd=" + g6(c.delay->mean_ctd) + " cdv=" + g6(c.delay->cdv_peak_to_peak);
    else
      out += " mean_ctd=- cdv=-";
    out += "\n";
  }
  return out;
}

}  // namespace atmsim
