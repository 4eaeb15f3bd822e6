#pragma once

// AAL5 segmentation and reassembly.
//
// A frame is padded with zeros and followed by an 8-byte trailer so the
// total is a multiple of 48:
//
//   [frame][pad][length:2 BE][reserved:2 = 0][crc32:4 BE]
//
// The CRC-32 (polynomial 0x04C11DB7, reflected, init/xorout 0xFFFFFFFF)
// covers the padded frame plus the trailer with its CRC field zeroed.

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "atmsim/cell.hpp"

namespace atmsim::aal5 {

inline constexpr std::size_t kTrailerBytes = 8;
inline constexpr std::size_t kMaxFrameBytes = 65535;
inline constexpr std::size_t kMaxCells = (kMaxFrameBytes + kTrailerBytes + kPayloadBytes - 1) / kPayloadBytes;

using Frame = std::vector<std::uint8_t>;

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// ceil((frame_len + 8) / 48)
constexpr std::size_t cell_count(std::size_t frame_len) {
  return (frame_len + kTrailerBytes + kPayloadBytes - 1) / kPayloadBytes;
}

struct SegmentPayload {
  Payload bytes{};
  bool last = false;
};

/// Throws RangeError for frames longer than kMaxFrameBytes.
std::vector<SegmentPayload> segment(std::span<const std::uint8_t> frame);

enum class ReassemblyError { CrcMismatch, LengthMismatch, Oversize };

const char* to_string(ReassemblyError e);

struct Incomplete {};

using PushResult = std::variant<Incomplete, Frame, ReassemblyError>;

/// Per-VC reassembly buffer. One frame in progress at a time; every
/// error discards the buffer so the next cell starts a fresh frame.
class Reassembler {
 public:
  PushResult push(std::span<const std::uint8_t, kPayloadBytes> payload, bool is_last);

  std::size_t buffered_bytes() const { return buffer_.size(); }
  std::size_t buffered_cells() const { return buffer_.size() / kPayloadBytes; }
  void reset() { buffer_.clear(); }

 private:
  std::vector<std::uint8_t> buffer_;
};

}  // namespace atmsim::aal5
