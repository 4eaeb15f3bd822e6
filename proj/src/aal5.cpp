#include "atmsim/aal5.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "atmsim/errors.hpp"

namespace atmsim::aal5 {
namespace {

constexpr std::array<std::uint32_t, 256> make_crc32_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t n = 0; n < 256; ++n) {
    std::uint32_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[n] = c;
  }
  return table;
}

constexpr auto kCrc32Table = make_crc32_table();

std::uint32_t crc32_update(std::uint32_t state, std::span<const std::uint8_t> bytes) {
  for (auto b : bytes) state = kCrc32Table[(state ^ b) & 0xFF] ^ (state >> 8);
  return state;
}

// CRC over everything except the final 4 bytes, which are treated as zero.
std::uint32_t trailer_crc(std::span<const std::uint8_t> padded) {
  static constexpr std::array<std::uint8_t, 4> kZero{};
  std::uint32_t s = crc32_update(0xFFFFFFFFu, padded.first(padded.size() - 4));
  s = crc32_update(s, kZero);
  return s ^ 0xFFFFFFFFu;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  return crc32_update(0xFFFFFFFFu, bytes) ^ 0xFFFFFFFFu;
}

const char* to_string(ReassemblyError e) {
  switch (e) {
    case ReassemblyError::CrcMismatch: return "CrcMismatch";
    case ReassemblyError::LengthMismatch: return "LengthMismatch";
    case ReassemblyError::Oversize: return "Oversize";
  }
  return "?";
}

std::vector<SegmentPayload> segment(std::span<const std::uint8_t> frame) {
  if (frame.size() > kMaxFrameBytes)
    throw RangeError("AAL5 frame of " + std::to_string(frame.size()) + " bytes exceeds 65535");

  const std::size_t cells = cell_count(frame.size());
  std::vector<std::uint8_t> padded(cells * kPayloadBytes, 0);
  std::copy(frame.begin(), frame.end(), padded.begin());

  const std::size_t t = padded.size() - kTrailerBytes;
  padded[t] = static_cast<std::uint8_t>(frame.size() >> 8);
  padded[t + 1] = static_cast<std::uint8_t>(frame.size() & 0xFF);
  const std::uint32_t crc = trailer_crc(padded);
  for (int k = 0; k < 4; ++k)
    padded[t + 4 + k] = static_cast<std::uint8_t>(crc >> (24 - 8 * k));

  std::vector<SegmentPayload> out(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    std::copy_n(padded.begin() + static_cast<std::ptrdiff_t>(c * kPayloadBytes), kPayloadBytes,
                out[c].bytes.begin());
  }
  out.back().last = true;
  return out;
}

PushResult Reassembler::push(std::span<const std::uint8_t, kPayloadBytes> payload, bool is_last) {
  if (buffer_.size() + kPayloadBytes > kMaxCells * kPayloadBytes) {
    buffer_.clear();
    return ReassemblyError::Oversize;
  }
  buffer_.insert(buffer_.end(), payload.begin(), payload.end());
  if (!is_last) return Incomplete{};

  std::vector<std::uint8_t> data;
  data.swap(buffer_);

  const std::size_t t = data.size() - kTrailerBytes;
  const std::size_t length = (std::size_t{data[t]} << 8) | data[t + 1];
  if (cell_count(length) * kPayloadBytes != data.size()) return ReassemblyError::LengthMismatch;

  std::uint32_t received = 0;
  for (int k = 0; k < 4; ++k) received = (received << 8) | data[t + 4 + static_cast<std::size_t>(k)];
  if (trailer_crc(data) != received) return ReassemblyError::CrcMismatch;

  data.resize(length);
  return data;
}

}  // namespace atmsim::aal5
