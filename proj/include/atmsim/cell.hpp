#pragma once

// ATM cell header codec: UNI/NNI layouts, HEC generation, single-bit
// correction and the PTI/CLP flags used by the rest of the library.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

namespace atmsim {

inline constexpr std::size_t kHeaderBytes = 5;
inline constexpr std::size_t kPayloadBytes = 48;
inline constexpr std::size_t kCellBytes = kHeaderBytes + kPayloadBytes;
inline constexpr std::size_t kCellBits = kCellBytes * 8;  // 424
inline constexpr std::size_t kHeaderBits = kHeaderBytes * 8;

/// CRC-8 generator x^8 + x^2 + x + 1 (the x^8 term implicit).
inline constexpr std::uint8_t kHecPolynomial = 0x07;
/// Coset added to the CRC remainder before it is written to the header.
inline constexpr std::uint8_t kHecCoset = 0x55;

enum class InterfaceKind : std::uint8_t { UNI, NNI };

std::string_view to_string(InterfaceKind kind);

/// Payload type indicator, held as its three bits.
///
/// Bit layout (MSB first inside the 3-bit field): management, EFCI,
/// AAL5 last-cell. EFCI and AAL5-last only carry meaning on user cells.
struct Pti {
  bool is_management = false;
  bool efci = false;
  bool aal5_last = false;

  std::uint8_t bits() const {
    return static_cast<std::uint8_t>((is_management ? 4 : 0) | (efci ? 2 : 0) |
                                     (aal5_last ? 1 : 0));
  }
  static Pti from_bits(std::uint8_t bits) {
    return Pti{(bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0};
  }
  friend bool operator==(const Pti&, const Pti&) = default;
};

struct CellHeader {
  std::uint8_t gfc = 0;    // UNI only; carried, never interpreted
  std::uint16_t vpi = 0;   // 8 bits UNI, 12 bits NNI
  std::uint16_t vci = 0;
  Pti pti{};
  bool clp = false;

  friend bool operator==(const CellHeader&, const CellHeader&) = default;
};

using HeaderBytes = std::array<std::uint8_t, kHeaderBytes>;
using Payload = std::array<std::uint8_t, kPayloadBytes>;
using CellBytes = std::array<std::uint8_t, kCellBytes>;

/// Largest VPI representable on the given interface.
constexpr std::uint16_t max_vpi(InterfaceKind kind) {
  return kind == InterfaceKind::UNI ? 0xFF : 0xFFF;
}

/// Throws RangeError if any field does not fit the interface layout.
void check_header(const CellHeader& header, InterfaceKind kind);

std::uint8_t compute_hec(std::span<const std::uint8_t, 4> header_bytes);

HeaderBytes encode_header(const CellHeader& header, InterfaceKind kind);

/// Header decoded with a matching HEC.
struct Valid {
  CellHeader header;
  friend bool operator==(const Valid&, const Valid&) = default;
};

/// Header recovered by flipping back one bit. Bit index 0 is the MSB of
/// byte 0, index 39 the LSB of the HEC byte.
struct Corrected {
  CellHeader header;
  unsigned flipped_bit = 0;
  friend bool operator==(const Corrected&, const Corrected&) = default;
};

struct Uncorrectable {
  friend bool operator==(const Uncorrectable&, const Uncorrectable&) = default;
};

using DecodeOutcome = std::variant<Valid, Corrected, Uncorrectable>;

DecodeOutcome decode_header(std::span<const std::uint8_t, kHeaderBytes> bytes,
                            InterfaceKind kind);

/// Header of a successful decode, or nullopt for Uncorrectable.
std::optional<CellHeader> decoded_header(const DecodeOutcome& outcome);

/// The HEC syndrome (received HEC xor expected HEC) produced by an error in
/// exactly one of the 40 header bit positions.
std::uint8_t single_bit_syndrome(unsigned bit_index);

/// Verifies that the 40 single-bit syndromes are nonzero and pairwise
/// distinct. Called once on first use of the decoder.
bool syndromes_distinct();

struct Cell {
  InterfaceKind kind = InterfaceKind::UNI;
  CellHeader header{};
  Payload payload{};

  friend bool operator==(const Cell&, const Cell&) = default;
};

CellBytes serialize(const Cell& cell);

/// Decodes the header (correcting if possible) and copies the payload.
/// Returns nullopt when the header is uncorrectable.
std::optional<Cell> deserialize(std::span<const std::uint8_t, kCellBytes> bytes,
                                InterfaceKind kind);

/// Sets the congestion-experienced bit. Throws InvalidOperation for
/// management cells.
Cell set_efci(Cell cell);

/// One line of a cell trace: `<time_s> <port> <53 hex byte pairs>`.
struct TraceRecord {
  double time_s = 0.0;
  unsigned port = 0;
  CellBytes bytes{};
};

std::string format_trace_line(const TraceRecord& record);

/// Parses a trace line. Byte pairs may be space separated or contiguous.
/// Returns nullopt on any syntax error.
std::optional<TraceRecord> parse_trace_line(std::string_view line);

/// Parses a hex string of exactly 2*N digits into N bytes.
std::optional<std::array<std::uint8_t, 4>> parse_hex4(std::string_view hex);

}  // namespace atmsim
