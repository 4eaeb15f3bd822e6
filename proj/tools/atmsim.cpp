// atmsim command-line tool.
//
//   atmsim run <file> [--out DIR] [--seed N]   (also trace_<id>.txt for traced connections)
//   atmsim validate <file>
//   atmsim conformance <trace> --pcr R [--scr R --mbs N] [--cdvt S]
//   atmsim hec <hex8>
//
// Exit status: 0 success, 1 validation or conformance failure, 2 usage error
// or unreadable input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "atmsim/cell.hpp"
#include "atmsim/engine.hpp"
#include "atmsim/errors.hpp"
#include "atmsim/scenario.hpp"
#include "atmsim/traffic.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

// Loads and parses a scenario; on failure prints a message and stores the
// exit status in `status`.
std::optional<atmsim::Scenario> load(const std::string& path, int& status) {
  if (!std::filesystem::is_regular_file(path)) {
    std::cerr << "error: cannot read " << path << "\n";
    status = kUsage;
    return std::nullopt;
  }
  try {
    return atmsim::load_scenario_file(path);
  } catch (const atmsim::ValidationError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    status = kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    status = kUsage;
  }
  return std::nullopt;
}

int cmd_validate(const std::string& path) {
  int status = kOk;
  auto s = load(path, status);
  if (!s) return status;
  const auto violations = atmsim::validate_scenario(*s);
  if (violations.empty()) {
    std::cout << "ok\n";
    return kOk;
  }
  for (const auto& v : violations) std::cout << v << "\n";
  return kFailed;
}

int cmd_run(const std::string& path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  int status = kOk;
  auto s = load(path, status);
  if (!s) return status;
  if (seed) s->seed = *seed;
  const auto violations = atmsim::validate_scenario(*s);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cout << v << "\n";
    return kFailed;
  }
  atmsim::Engine engine(*s);
  const auto report = engine.run();
  try {
    atmsim::write_report_files(report, out_dir);
    for (const auto& c : s->connections) {
      if (!c.trace) continue;
      std::string text;
      for (const auto& rec : engine.trace(c.id)) text += atmsim::format_trace_line(rec) + "\n";
      std::ofstream out(std::filesystem::path(out_dir) / ("trace_" + c.id + ".txt"), std::ios::binary);
      if (!out) throw std::runtime_error("cannot write trace for " + c.id);
      out << text;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  std::cout << atmsim::summary_lines(report);
  return kOk;
}

int cmd_conformance(const std::string& path, double pcr, std::optional<double> scr,
                    std::optional<std::uint32_t> mbs, double cdvt) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    return kUsage;
  }
  if (scr.has_value() != mbs.has_value()) {
    std::cerr << "error: --scr and --mbs must be given together\n";
    return kUsage;
  }
  atmsim::TrafficDescriptor d;
  d.pcr = pcr;
  d.scr = scr;
  d.mbs = mbs;
  d.cdvt = cdvt;
  atmsim::DualGcra gcra;
  try {
    gcra = atmsim::DualGcra::from_descriptor(d);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  std::uint64_t conforming = 0, violations = 0;
  std::vector<std::string> first;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto rec = atmsim::parse_trace_line(line);
    if (!rec) {
      std::cerr << "error: malformed trace line " << line_no << "\n";
      return kUsage;
    }
    bool ok = false;
    try {
      ok = gcra.update(rec->time_s);
    } catch (const atmsim::OrderingError&) {
      std::cerr << "error: time goes backwards at trace line " << line_no << "\n";
      return kUsage;
    }
    if (ok) {
      ++conforming;
    } else {
      ++violations;
      if (first.size() < 10) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "line %zu t=%.9g port=%u non-conforming", line_no, rec->time_s, rec->port);
        first.emplace_back(buf);
      }
    }
  }
  std::cout << "conforming " << conforming << "\n";
  std::cout << "non-conforming " << violations << "\n";
  for (const auto& f : first) std::cout << f << "\n";
  return violations == 0 ? kOk : kFailed;
}

int cmd_hec(const std::string& hex) {
  const auto bytes = atmsim::parse_hex4(hex);
  if (!bytes) {
    std::cerr << "error: expected 8 hex digits, got '" << hex << "'\n";
    return kUsage;
  }
  std::printf("%02x\n", atmsim::compute_hec(*bytes));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ATM network simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run a scenario and write the metrics report");
  run->add_option("file", scenario_path, "scenario JSON")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "override the scenario seed");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a scenario without running it");
  validate->add_option("file", validate_path, "scenario JSON")->required();

  std::string trace_path;
  double pcr = 0.0, cdvt = 0.0;
  std::optional<double> scr;
  std::optional<std::uint32_t> mbs;
  auto* conf = app.add_subcommand("conformance", "GCRA conformance of a cell trace");
  conf->add_option("trace", trace_path, "trace file")->required();
  conf->add_option("--pcr", pcr, "peak cell rate (cells/s)")->required();
  conf->add_option("--scr", scr, "sustainable cell rate (cells/s)");
  conf->add_option("--mbs", mbs, "maximum burst size (cells)");
  conf->add_option("--cdvt", cdvt, "cell delay variation tolerance (s)");

  std::string hex;
  auto* hec = app.add_subcommand("hec", "HEC byte of a 4-byte header prefix");
  hec->add_option("hex", hex, "8 hex digits")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) return cmd_run(scenario_path, out_dir, seed);
    if (*validate) return cmd_validate(validate_path);
    if (*conf) return cmd_conformance(trace_path, pcr, scr, mbs, cdvt);
    if (*hec) return cmd_hec(hex);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
