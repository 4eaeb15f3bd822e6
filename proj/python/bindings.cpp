// Python bindings for the atmsim core.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>
#include <string>

#include "atmsim/aal5.hpp"
#include "atmsim/cell.hpp"
#include "atmsim/engine.hpp"
#include "atmsim/errors.hpp"
#include "atmsim/scenario.hpp"
#include "atmsim/traffic.hpp"

namespace py = pybind11;
using namespace atmsim;

namespace {

InterfaceKind kind_of(const std::string& s) {
  if (s == "UNI" || s == "uni") return InterfaceKind::UNI;
  if (s == "NNI" || s == "nni") return InterfaceKind::NNI;
  throw py::value_error("interface kind must be 'UNI' or 'NNI'");
}

ServiceCategory category_of(const std::string& s) {
  if (auto c = parse_category(s)) return *c;
  throw py::value_error("unknown service category: " + s);
}

py::dict header_dict(const CellHeader& h) {
  py::dict d;
  d["gfc"] = h.gfc;
  d["vpi"] = h.vpi;
  d["vci"] = h.vci;
  d["pti"] = h.pti.bits();
  d["clp"] = h.clp;
  return d;
}

template <std::size_t N>
std::array<std::uint8_t, N> fixed(const py::bytes& b, const char* what) {
  const std::string s = b;
  if (s.size() != N) throw py::value_error(std::string(what) + ": expected " + std::to_string(N) + " bytes");
  std::array<std::uint8_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<std::uint8_t>(s[i]);
  return out;
}

py::bytes to_bytes(const std::uint8_t* p, std::size_t n) {
  return py::bytes(reinterpret_cast<const char*>(p), n);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ATM cell codec, AAL5, traffic contracts and network simulator";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RangeError>(m, "RangeError", PyExc_ValueError);
  py::register_exception<OrderingError>(m, "OrderingError", PyExc_ValueError);

  m.def("compute_hec", [](const py::bytes& b) { return compute_hec(fixed<4>(b, "header prefix")); },
        py::arg("prefix"), "HEC byte for a 4-byte header prefix.");

  m.def(
      "encode_header",
      [](const std::string& kind, unsigned vpi, unsigned vci, unsigned pti, bool clp, unsigned gfc) {
        CellHeader h;
        if (gfc > 0xF || vpi > 0xFFFF || vci > 0xFFFF || pti > 7) throw RangeError("header field out of range");
        h.gfc = static_cast<std::uint8_t>(gfc);
        h.vpi = static_cast<std::uint16_t>(vpi);
        h.vci = static_cast<std::uint16_t>(vci);
        h.pti = Pti::from_bits(static_cast<std::uint8_t>(pti));
        h.clp = clp;
        const auto out = encode_header(h, kind_of(kind));
        return to_bytes(out.data(), out.size());
      },
      py::arg("kind"), py::arg("vpi"), py::arg("vci"), py::arg("pti") = 0, py::arg("clp") = false,
      py::arg("gfc") = 0, "Five header bytes including the HEC.");

  m.def(
      "decode_header",
      [](const py::bytes& b, const std::string& kind) -> py::tuple {
        const auto bytes = fixed<kHeaderBytes>(b, "header");
        const auto out = decode_header(bytes, kind_of(kind));
        if (const auto* v = std::get_if<Valid>(&out)) return py::make_tuple("valid", header_dict(v->header), py::none());
        if (const auto* c = std::get_if<Corrected>(&out))
          return py::make_tuple("corrected", header_dict(c->header), c->flipped_bit);
        return py::make_tuple("uncorrectable", py::none(), py::none());
      },
      py::arg("header"), py::arg("kind"), "(status, fields, flipped_bit) for five header bytes.");

  m.def(
      "segment",
      [](const py::bytes& frame) {
        const std::string s = frame;
        const auto segs = aal5::segment(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
        py::list out;
        for (const auto& seg : segs) out.append(py::make_tuple(to_bytes(seg.bytes.data(), seg.bytes.size()), seg.last));
        return out;
      },
      py::arg("frame"), "AAL5 cell payloads as (48 bytes, last) pairs.");

  m.def(
      "reassemble",
      [](const py::list& payloads) -> py::tuple {
        aal5::Reassembler r;
        aal5::PushResult last = aal5::Incomplete{};
        for (const auto& item : payloads) {
          const auto pair = item.cast<py::tuple>();
          const auto bytes = fixed<kPayloadBytes>(pair[0].cast<py::bytes>(), "cell payload");
          last = r.push(bytes, pair[1].cast<bool>());
          if (!std::holds_alternative<aal5::Incomplete>(last)) break;
        }
        if (const auto* f = std::get_if<aal5::Frame>(&last)) return py::make_tuple("frame", to_bytes(f->data(), f->size()));
        if (const auto* e = std::get_if<aal5::ReassemblyError>(&last)) return py::make_tuple(aal5::to_string(*e), py::none());
        return py::make_tuple("incomplete", py::none());
      },
      py::arg("payloads"), "Feeds (payload, last) pairs; returns (status, frame or None).");

  m.def("burst_tolerance", &burst_tolerance, py::arg("mbs"), py::arg("scr"), py::arg("pcr"));

  m.def(
      "gcra_update",
      [](double level, double last_time, double arrival, double increment, double limit) {
        const auto r = gcra_update(GcraState{level, last_time}, arrival, increment, limit);
        return py::make_tuple(r.conforming, r.state.bucket_level, r.state.last_time);
      },
      py::arg("level"), py::arg("last_time"), py::arg("arrival"), py::arg("increment"), py::arg("limit"),
      "(conforming, new_level, new_last_time).");

  m.def(
      "validate_contract",
      [](const std::string& category, double pcr, std::optional<double> scr, std::optional<double> mcr,
         std::optional<std::uint32_t> mbs, std::optional<double> cdvt, std::optional<double> clr0,
         std::optional<double> clr1, std::optional<double> ctd, std::optional<double> cdv) {
        const TrafficDescriptor d{pcr, scr, mcr, mbs, cdvt};
        const QosRequirement q{clr0, clr1, ctd, cdv};
        std::vector<std::string> out;
        for (const auto& v : validate_contract(category_of(category), d, q)) out.push_back(v.message);
        return out;
      },
      py::arg("category"), py::arg("pcr"), py::arg("scr") = py::none(), py::arg("mcr") = py::none(),
      py::arg("mbs") = py::none(), py::arg("cdvt") = py::none(), py::arg("clr_clp0") = py::none(),
      py::arg("clr_clp1") = py::none(), py::arg("max_ctd") = py::none(), py::arg("max_cdv") = py::none(),
      "Violation messages; empty when the contract is acceptable.");

  m.def(
      "compute_clr",
      [](std::uint64_t tx0, std::uint64_t tx1, std::uint64_t lost0, std::uint64_t lost1, const std::string& cls) {
        ConnectionMetrics cm;
        cm.transmitted_clp0 = tx0;
        cm.transmitted_clp1 = tx1;
        cm.lost_clp0 = lost0;
        cm.lost_clp1 = lost1;
        ClpClass c = ClpClass::Both;
        if (cls == "clp0") c = ClpClass::Clp0;
        else if (cls == "clp1") c = ClpClass::Clp1;
        else if (cls != "both") throw py::value_error("class must be 'clp0', 'clp1' or 'both'");
        return compute_clr(cm, c);
      },
      py::arg("transmitted_clp0"), py::arg("transmitted_clp1"), py::arg("lost_clp0"), py::arg("lost_clp1"),
      py::arg("cls") = "both");

  m.def(
      "delay_stats",
      [](const std::vector<double>& samples) -> py::object {
        const auto s = delay_stats(samples);
        if (!s) return py::none();
        py::dict d;
        d["samples"] = s->samples;
        d["mean_ctd"] = s->mean_ctd;
        d["min_ctd"] = s->min_ctd;
        d["max_ctd"] = s->max_ctd;
        d["cdv_peak_to_peak"] = s->cdv_peak_to_peak;
        d["cdv_stddev"] = s->cdv_stddev;
        return d;
      },
      py::arg("samples"));

  m.def(
      "validate_scenario",
      [](const std::string& text) { return validate_scenario(parse_scenario(text)); }, py::arg("scenario_json"),
      "Violation list for a scenario given as JSON text.");

  m.def(
      "run_scenario",
      [](const std::string& text) {
        const auto s = parse_scenario(text);
        MetricsReport r;
        {
          py::gil_scoped_release release;
          r = run(s);
        }
        return report_to_json(r);
      },
      py::arg("scenario_json"), "Runs a scenario (JSON text) and returns the report as JSON text.");
}
