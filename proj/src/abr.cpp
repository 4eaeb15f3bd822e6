#include "atmsim/abr.hpp"

#include <algorithm>
#include <string>

#include "atmsim/errors.hpp"

namespace atmsim::abr {

SourceParams SourceParams::defaults(double pcr, double mcr) {
  SourceParams p;
  p.pcr = pcr;
  p.mcr = mcr;
  p.air = pcr / 64.0;
  p.initial_acr = std::max(mcr, pcr / 16.0);
  return p;
}

void check_params(const SourceParams& p) {
  if (!(p.pcr > 0.0)) throw RangeError("ABR PCR must be positive");
  if (!(p.mcr >= 0.0 && p.mcr <= p.pcr)) throw RangeError("ABR MCR must lie in [0, PCR]");
  if (!(p.air >= 0.0)) throw RangeError("ABR AIR must be non-negative");
  if (!(p.rdf > 0.0 && p.rdf < 1.0)) throw RangeError("ABR RDF must lie in (0, 1)");
  if (p.nrm < 1) throw RangeError("ABR Nrm must be at least 1");
  if (!(p.initial_acr >= p.mcr && p.initial_acr <= p.pcr && p.initial_acr > 0.0))
    throw RangeError("ABR initial ACR must lie in [MCR, PCR] and be positive");
}

AbrSource::AbrSource(SourceParams params) : params_(params), acr_(params.initial_acr) {
  check_params(params_);
}

double AbrSource::adjust(const FeedbackIndication& ind) {
  if (last_epoch_ && ind.epoch <= *last_epoch_)
    throw OrderingError("ABR feedback epoch " + std::to_string(ind.epoch) +
                        " does not follow " + std::to_string(*last_epoch_));
  last_epoch_ = ind.epoch;
  if (ind.congested)
    acr_ = std::max(params_.mcr, acr_ * params_.rdf);
  else
    acr_ = std::min(params_.pcr, acr_ + params_.air);
  return acr_;
}

std::optional<double> AbrSource::next_emission(double now, bool backlog) const {
  if (!backlog || !(acr_ > 0.0)) return std::nullopt;
  if (!last_emission_) return now;
  return std::max(now, *last_emission_ + 1.0 / acr_);
}

AbrDestination::AbrDestination(std::uint32_t nrm) : nrm_(nrm) {
  if (nrm_ < 1) throw RangeError("ABR Nrm must be at least 1");
}

std::optional<FeedbackIndication> AbrDestination::observe(const Cell& cell) {
  if (cell.header.pti.is_management) return std::nullopt;
  congested_ = congested_ || cell.header.pti.efci;
  if (++count_ < nrm_) return std::nullopt;
  FeedbackIndication ind{congested_, epoch_++};
  count_ = 0;
  congested_ = false;
  return ind;
}

Payload encode_feedback(const FeedbackIndication& ind) {
  Payload p{};
  p[0] = ind.congested ? 1 : 0;
  for (int k = 0; k < 8; ++k) p[1 + k] = static_cast<std::uint8_t>(ind.epoch >> (56 - 8 * k));
  return p;
}

FeedbackIndication decode_feedback(const Payload& p) {
  FeedbackIndication ind;
  ind.congested = p[0] != 0;
  for (int k = 0; k < 8; ++k) ind.epoch = (ind.epoch << 8) | p[1 + k];
  return ind;
}

}  // namespace atmsim::abr
