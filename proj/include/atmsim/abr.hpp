#pragma once

// Binary (EFCI) feedback rate control for ABR connections.

#include <cstdint>
#include <optional>

#include "atmsim/cell.hpp"

namespace atmsim::abr {

inline constexpr std::uint32_t kDefaultNrm = 32;
inline constexpr double kDefaultRdf = 0.875;

struct SourceParams {
  double pcr = 0.0;
  double mcr = 0.0;
  double air = 0.0;  // cells/s added per uncongested epoch
  double rdf = kDefaultRdf;
  std::uint32_t nrm = kDefaultNrm;
  double initial_acr = 0.0;

  /// air = pcr/64, initial acr = max(mcr, pcr/16).
  static SourceParams defaults(double pcr, double mcr);
};

struct FeedbackIndication {
  bool congested = false;
  std::uint64_t epoch = 0;
};

/// Throws RangeError unless 0 <= mcr <= pcr, pcr > 0, air >= 0, 0 < rdf < 1,
/// nrm >= 1 and the initial rate lies within [mcr, pcr].
void check_params(const SourceParams& p);

class AbrSource {
 public:
  explicit AbrSource(SourceParams params);

  /// Additive increase on an uncongested epoch, multiplicative decrease on
  /// a congested one; acr stays within [mcr, pcr]. Throws OrderingError if
  /// the epoch does not advance.
  double adjust(const FeedbackIndication& indication);

  /// Time of the next emission, or nullopt with an empty backlog. The
  /// first emission goes out at `now`; later ones 1/acr after the previous.
  std::optional<double> next_emission(double now, bool backlog) const;
  void record_emission(double t) { last_emission_ = t; }

  double acr() const { return acr_; }
  const SourceParams& params() const { return params_; }
  std::optional<std::uint64_t> last_epoch() const { return last_epoch_; }

 private:
  SourceParams params_;
  double acr_;
  std::optional<std::uint64_t> last_epoch_;
  std::optional<double> last_emission_;
};

/// Watches delivered data cells and closes a feedback epoch every nrm cells.
class AbrDestination {
 public:
  explicit AbrDestination(std::uint32_t nrm = kDefaultNrm);

  /// Management cells are ignored. Returns an indication when this cell
  /// completes an epoch; congested is the OR of the EFCI bits seen in it.
  std::optional<FeedbackIndication> observe(const Cell& cell);

  std::uint32_t window_count() const { return count_; }
  std::uint64_t epochs() const { return epoch_; }

 private:
  std::uint32_t nrm_;
  std::uint32_t count_ = 0;
  bool congested_ = false;
  std::uint64_t epoch_ = 0;
};

/// Backward feedback cells are management cells whose first payload byte
/// holds the congestion flag and bytes 1..8 the epoch (big-endian).
Payload encode_feedback(const FeedbackIndication& indication);
FeedbackIndication decode_feedback(const Payload& payload);

}  // namespace atmsim::abr
