#include "atmsim/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atmsim/errors.hpp"

namespace atmsim {

std::string_view to_string(ServiceCategory c) {
  switch (c) {
    case ServiceCategory::CBR: return "CBR";
    case ServiceCategory::VBR_RT: return "VBR-RT";
    case ServiceCategory::VBR_NRT: return "VBR-NRT";
    case ServiceCategory::ABR: return "ABR";
    case ServiceCategory::UBR: return "UBR";
  }
  return "?";
}

std::optional<ServiceCategory> parse_category(std::string_view s) {
  if (s == "CBR") return ServiceCategory::CBR;
  if (s == "VBR-RT" || s == "VBR_RT" || s == "rt-VBR") return ServiceCategory::VBR_RT;
  if (s == "VBR-NRT" || s == "VBR_NRT" || s == "nrt-VBR") return ServiceCategory::VBR_NRT;
  if (s == "ABR") return ServiceCategory::ABR;
  if (s == "UBR") return ServiceCategory::UBR;
  return std::nullopt;
}

namespace {

enum class Rule { Required, Allowed, NotApplicable, Unspecified };

struct CategoryRules {
  Rule scr, mbs, mcr, cdvt;
  Rule clr_clp0, clr_clp1, ctd, cdv;
};

// Rows follow the service-category table. "Unspecified" marks a QoS
// attribute the network gives no guarantee for, so a requirement on it is
// meaningless; "not applicable" marks descriptor fields that category
// does not carry.
constexpr CategoryRules rules_for(ServiceCategory c) {
  using enum Rule;
  switch (c) {
    case ServiceCategory::CBR:
      return {NotApplicable, NotApplicable, NotApplicable, Required,
              Allowed, Allowed, Allowed, Allowed};
    case ServiceCategory::VBR_RT:
      return {Required, Required, NotApplicable, Allowed,
              Allowed, Allowed, Allowed, Allowed};
    case ServiceCategory::VBR_NRT:
      return {Required, Required, NotApplicable, Allowed,
              Allowed, Allowed, Allowed, Unspecified};
    case ServiceCategory::ABR:
      return {NotApplicable, NotApplicable, Required, Allowed,
              Allowed, Allowed, Unspecified, Unspecified};
    case ServiceCategory::UBR:
      return {NotApplicable, NotApplicable, NotApplicable, Allowed,
              Unspecified, Unspecified, Unspecified, Unspecified};
  }
  return {};
}

void apply(Rule rule, bool present, std::string_view field, ServiceCategory c,
           std::vector<ContractViolation>& out) {
  const std::string cat(to_string(c));
  switch (rule) {
    case Rule::Required:
      if (!present) out.push_back({std::string(field), std::string(field) + " required for " + cat});
      break;
    case Rule::NotApplicable:
      if (present) out.push_back({std::string(field), std::string(field) + " not applicable for " + cat});
      break;
    case Rule::Unspecified:
      if (present) out.push_back({std::string(field), std::string(field) + " unspecified for " + cat + "; no guarantee can be requested"});
      break;
    case Rule::Allowed:
      break;
  }
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::vector<ContractViolation> validate_contract(ServiceCategory category,
                                                 const TrafficDescriptor& d,
                                                 const QosRequirement& q) {
  std::vector<ContractViolation> out;

  if (!(std::isfinite(d.pcr) && d.pcr > 0.0)) out.push_back({"PCR", "PCR must be positive"});
  if (d.scr && !(std::isfinite(*d.scr) && *d.scr > 0.0 && *d.scr <= d.pcr))
    out.push_back({"SCR", "SCR must satisfy 0 < SCR <= PCR"});
  if (d.mcr && !(finite_nonneg(*d.mcr) && *d.mcr <= d.pcr))
    out.push_back({"MCR", "MCR must satisfy 0 <= MCR <= PCR"});
  if (d.mbs && *d.mbs < 1) out.push_back({"MBS", "MBS must be at least 1"});
  if (d.cdvt && !finite_nonneg(*d.cdvt)) out.push_back({"CDVT", "CDVT must be non-negative"});

  auto ratio_ok = [](double r) { return std::isfinite(r) && r >= 0.0 && r <= 1.0; };
  if (q.clr_clp0 && !ratio_ok(*q.clr_clp0)) out.push_back({"CLR(CLP=0)", "CLR(CLP=0) must lie in [0,1]"});
  if (q.clr_clp1 && !ratio_ok(*q.clr_clp1)) out.push_back({"CLR(CLP=1)", "CLR(CLP=1) must lie in [0,1]"});
  if (q.max_ctd && !finite_nonneg(*q.max_ctd)) out.push_back({"CTD", "CTD must be non-negative"});
  if (q.max_cdv && !finite_nonneg(*q.max_cdv)) out.push_back({"CDV", "CDV must be non-negative"});

  const auto r = rules_for(category);
  apply(r.scr, d.scr.has_value(), "SCR", category, out);
  apply(r.mbs, d.mbs.has_value(), "MBS", category, out);
  apply(r.mcr, d.mcr.has_value(), "MCR", category, out);
  apply(r.cdvt, d.cdvt.has_value(), "CDVT", category, out);
  apply(r.clr_clp0, q.clr_clp0.has_value(), "CLR(CLP=0)", category, out);
  apply(r.clr_clp1, q.clr_clp1.has_value(), "CLR(CLP=1)", category, out);
  apply(r.ctd, q.max_ctd.has_value(), "CTD", category, out);
  apply(r.cdv, q.max_cdv.has_value(), "CDV", category, out);
  return out;
}

double burst_tolerance(std::uint32_t mbs, double scr, double pcr) {
  if (mbs < 1) throw RangeError("MBS must be at least 1");
  if (!(scr > 0.0 && scr <= pcr && std::isfinite(pcr)))
    throw RangeError("burst tolerance needs 0 < SCR <= PCR");
  return static_cast<double>(mbs - 1) * (1.0 / scr - 1.0 / pcr);
}

// ---------------------------------------------------------------------------

GcraResult gcra_update(const GcraState& state, double arrival, double increment, double limit) {
  if (arrival < state.last_time)
    throw OrderingError("GCRA arrival " + std::to_string(arrival) + " precedes " +
                        std::to_string(state.last_time));
  const double drained = std::max(0.0, state.bucket_level - (arrival - state.last_time));
  // Draining is linear and floored at zero, so recording the drained level
  // at `arrival` is equivalent to leaving the state untouched.
  if (drained > limit + kGcraSlack * increment) return {false, {drained, arrival}};
  return {true, {drained + increment, arrival}};
}

double gcra_earliest_conforming(const GcraState& state, const GcraParams& params,
                                double not_before) {
  const double t = state.last_time + state.bucket_level - params.limit;
  return std::max({not_before, t, state.last_time});
}

DualGcra::DualGcra(GcraParams peak, std::optional<GcraParams> sustained)
    : peak_(peak), sustained_(sustained) {}

DualGcra DualGcra::from_descriptor(const TrafficDescriptor& d) {
  const double cdvt = d.cdvt.value_or(0.0);
  GcraParams peak{1.0 / d.pcr, cdvt};
  std::optional<GcraParams> sustained;
  if (d.scr && d.mbs)
    sustained = GcraParams{1.0 / *d.scr, burst_tolerance(*d.mbs, *d.scr, d.pcr) + cdvt};
  return DualGcra(peak, sustained);
}

bool DualGcra::update(double arrival) {
  auto drain = [arrival](const GcraState& st) {
    if (arrival < st.last_time) throw OrderingError("GCRA arrival precedes last update");
    return std::max(0.0, st.bucket_level - (arrival - st.last_time));
  };
  const double peak_level = drain(peak_state_);
  const double sustained_level = sustained_ ? drain(sustained_state_) : 0.0;
  bool ok = peak_level <= peak_.limit + kGcraSlack * peak_.increment;
  if (sustained_)
    ok = ok && sustained_level <= sustained_->limit + kGcraSlack * sustained_->increment;
  peak_state_ = {ok ? peak_level + peak_.increment : peak_level, arrival};
  if (sustained_)
    sustained_state_ = {ok ? sustained_level + sustained_->increment : sustained_level, arrival};
  return ok;
}

double DualGcra::earliest_conforming(double not_before) const {
  double t = gcra_earliest_conforming(peak_state_, peak_, not_before);
  if (sustained_) t = std::max(t, gcra_earliest_conforming(sustained_state_, *sustained_, not_before));
  return t;
}

// ---------------------------------------------------------------------------

PoliceOutcome police(const Cell& cell, bool conforming, PolicingPolicy policy) {
  if (conforming) return Pass{cell, false};
  if (policy == PolicingPolicy::Drop) return Discard{};
  Cell tagged = cell;
  tagged.header.clp = true;
  return Pass{tagged, true};
}

// ---------------------------------------------------------------------------

Shaper::Shaper(DualGcra buckets, std::size_t depth) : buckets_(std::move(buckets)), depth_(depth) {}

std::optional<double> Shaper::offer(double arrival) {
  while (!waiting_.empty() && waiting_.front() <= arrival) waiting_.pop_front();
  if (waiting_.size() >= depth_) {
    ++overflow_;
    return std::nullopt;
  }
  double release = buckets_.earliest_conforming(arrival);
  if (any_released_) release = std::max(release, last_release_);
  // earliest_conforming is exact up to rounding; the GCRA slack covers it
  buckets_.update(release);
  last_release_ = release;
  any_released_ = true;
  if (release > arrival) waiting_.push_back(release);
  return release;
}

ShapeResult shape(std::span<const double> arrivals, const DualGcra& buckets, std::size_t depth) {
  Shaper shaper(buckets, depth);
  ShapeResult out;
  out.release_times.reserve(arrivals.size());
  for (double a : arrivals) out.release_times.push_back(shaper.offer(a));
  out.overflow_discards = shaper.overflow_discards();
  return out;
}

// ---------------------------------------------------------------------------

double compute_clr(const ConnectionMetrics& m, ClpClass cls) {
  std::uint64_t lost = 0, sent = 0;
  switch (cls) {
    case ClpClass::Clp0: lost = m.lost_clp0; sent = m.transmitted_clp0; break;
    case ClpClass::Clp1: lost = m.lost_clp1; sent = m.transmitted_clp1; break;
    case ClpClass::Both: lost = m.lost(); sent = m.transmitted(); break;
  }
  if (sent == 0) return 0.0;
  return static_cast<double>(lost) / static_cast<double>(sent);
}

std::optional<DelayStats> delay_stats(std::span<const double> samples) {
  if (samples.empty()) return std::nullopt;
  DelayStats s;
  s.samples = samples.size();
  s.min_ctd = samples.front();
  s.max_ctd = samples.front();
  double sum = 0.0;
  for (double d : samples) {
    sum += d;
    s.min_ctd = std::min(s.min_ctd, d);
    s.max_ctd = std::max(s.max_ctd, d);
  }
  const double n = static_cast<double>(samples.size());
  s.mean_ctd = sum / n;
  double sq = 0.0;
  for (double d : samples) sq += (d - s.mean_ctd) * (d - s.mean_ctd);
  s.cdv_stddev = std::sqrt(sq / n);
  s.cdv_peak_to_peak = s.max_ctd - s.min_ctd;
  return s;
}

}  // namespace atmsim
