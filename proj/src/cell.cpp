#include "atmsim/cell.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "atmsim/errors.hpp"

namespace atmsim {
namespace {

constexpr std::array<std::uint8_t, 256> make_crc8_table() {
  std::array<std::uint8_t, 256> table{};
  for (unsigned n = 0; n < 256; ++n) {
    std::uint8_t crc = static_cast<std::uint8_t>(n);
    for (int k = 0; k < 8; ++k) {
      crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ kHecPolynomial)
                         : static_cast<std::uint8_t>(crc << 1);
    }
    table[n] = crc;
  }
  return table;
}

constexpr auto kCrc8Table = make_crc8_table();

std::uint8_t crc8(std::span<const std::uint8_t> bytes) {
  std::uint8_t crc = 0;
  for (auto b : bytes) crc = kCrc8Table[crc ^ b];
  return crc;
}

// syndrome -> bit index, -1 where no single-bit error produces it
struct SyndromeTable {
  std::array<int, 256> bit_for{};
  bool distinct = true;

  SyndromeTable() {
    bit_for.fill(-1);
    for (unsigned i = 0; i < kHeaderBits; ++i) {
      const auto s = single_bit_syndrome(i);
      if (s == 0 || bit_for[s] != -1) distinct = false;
      bit_for[s] = static_cast<int>(i);
    }
  }
};

const SyndromeTable& syndrome_table() {
  static const SyndromeTable table;
  return table;
}

CellHeader unpack(std::span<const std::uint8_t> b, InterfaceKind kind) {
  CellHeader h;
  if (kind == InterfaceKind::UNI) {
    h.gfc = b[0] >> 4;
    h.vpi = static_cast<std::uint16_t>(((b[0] & 0x0F) << 4) | (b[1] >> 4));
  } else {
    h.vpi = static_cast<std::uint16_t>((b[0] << 4) | (b[1] >> 4));
  }
  h.vci = static_cast<std::uint16_t>(((b[1] & 0x0F) << 12) | (b[2] << 4) | (b[3] >> 4));
  h.pti = Pti::from_bits(static_cast<std::uint8_t>((b[3] >> 1) & 0x07));
  h.clp = (b[3] & 0x01) != 0;
  return h;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string_view to_string(InterfaceKind kind) {
  return kind == InterfaceKind::UNI ? "UNI" : "NNI";
}

void check_header(const CellHeader& header, InterfaceKind kind) {
  if (kind == InterfaceKind::UNI && header.gfc > 0x0F)
    throw RangeError("GFC exceeds 4 bits");
  if (kind == InterfaceKind::NNI && header.gfc != 0)
    throw RangeError("GFC is not carried on NNI");
  if (header.vpi > max_vpi(kind))
    throw RangeError("VPI " + std::to_string(header.vpi) + " out of range for " +
                     std::string(to_string(kind)));
}

std::uint8_t compute_hec(std::span<const std::uint8_t, 4> header_bytes) {
  return static_cast<std::uint8_t>(crc8(header_bytes) ^ kHecCoset);
}

HeaderBytes encode_header(const CellHeader& header, InterfaceKind kind) {
  check_header(header, kind);
  HeaderBytes out{};
  if (kind == InterfaceKind::UNI) {
    out[0] = static_cast<std::uint8_t>((header.gfc << 4) | (header.vpi >> 4));
  } else {
    out[0] = static_cast<std::uint8_t>(header.vpi >> 4);
  }
  out[1] = static_cast<std::uint8_t>(((header.vpi & 0x0F) << 4) | (header.vci >> 12));
  out[2] = static_cast<std::uint8_t>((header.vci >> 4) & 0xFF);
  out[3] = static_cast<std::uint8_t>(((header.vci & 0x0F) << 4) | (header.pti.bits() << 1) |
                                     (header.clp ? 1 : 0));
  out[4] = compute_hec(std::span<const std::uint8_t, 4>(out.data(), 4));
  return out;
}

std::uint8_t single_bit_syndrome(unsigned bit_index) {
  if (bit_index >= kHeaderBits) throw RangeError("header bit index out of range");
  if (bit_index >= 32) return static_cast<std::uint8_t>(0x80 >> (bit_index - 32));
  std::array<std::uint8_t, 4> e{};
  e[bit_index / 8] = static_cast<std::uint8_t>(0x80 >> (bit_index % 8));
  return crc8(e);
}

bool syndromes_distinct() { return syndrome_table().distinct; }

DecodeOutcome decode_header(std::span<const std::uint8_t, kHeaderBytes> bytes,
                            InterfaceKind kind) {
  const auto& table = syndrome_table();
  if (!table.distinct) throw std::logic_error("HEC syndromes are not distinct");

  const std::uint8_t expected = compute_hec(bytes.first<4>());
  const std::uint8_t syndrome = static_cast<std::uint8_t>(expected ^ bytes[4]);
  if (syndrome == 0) return Valid{unpack(bytes, kind)};

  const int bit = table.bit_for[syndrome];
  if (bit < 0) return Uncorrectable{};

  HeaderBytes fixed{};
  std::copy(bytes.begin(), bytes.end(), fixed.begin());
  fixed[static_cast<unsigned>(bit) / 8] ^= static_cast<std::uint8_t>(0x80 >> (bit % 8));
  return Corrected{unpack(fixed, kind), static_cast<unsigned>(bit)};
}

std::optional<CellHeader> decoded_header(const DecodeOutcome& outcome) {
  if (const auto* v = std::get_if<Valid>(&outcome)) return v->header;
  if (const auto* c = std::get_if<Corrected>(&outcome)) return c->header;
  return std::nullopt;
}

CellBytes serialize(const Cell& cell) {
  CellBytes out{};
  const auto header = encode_header(cell.header, cell.kind);
  std::copy(header.begin(), header.end(), out.begin());
  std::copy(cell.payload.begin(), cell.payload.end(), out.begin() + kHeaderBytes);
  return out;
}

std::optional<Cell> deserialize(std::span<const std::uint8_t, kCellBytes> bytes,
                                InterfaceKind kind) {
  auto header = decoded_header(decode_header(bytes.first<kHeaderBytes>(), kind));
  if (!header) return std::nullopt;
  Cell cell{kind, *header, {}};
  std::copy(bytes.begin() + kHeaderBytes, bytes.end(), cell.payload.begin());
  return cell;
}

Cell set_efci(Cell cell) {
  if (cell.header.pti.is_management)
    throw InvalidOperation("EFCI is undefined on management cells");
  cell.header.pti.efci = true;
  return cell;
}

std::string format_trace_line(const TraceRecord& record) {
  char head[64];
  std::snprintf(head, sizeof head, "%.17g %u", record.time_s, record.port);
  std::string line(head);
  line.reserve(line.size() + kCellBytes * 3);
  static constexpr char kDigits[] = "0123456789abcdef";
  for (auto b : record.bytes) {
    line.push_back(' ');
    line.push_back(kDigits[b >> 4]);
    line.push_back(kDigits[b & 0x0F]);
  }
  return line;
}

std::optional<TraceRecord> parse_trace_line(std::string_view line) {
  auto skip_ws = [&](std::size_t i) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    return i;
  };
  auto token_end = [&](std::size_t i) {
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    return i;
  };

  TraceRecord rec;
  std::size_t i = skip_ws(0);
  std::size_t j = token_end(i);
  if (i == j) return std::nullopt;
  {
    // strtod accepts the same forms %.17g produces
    std::string tok(line.substr(i, j - i));
    char* end = nullptr;
    rec.time_s = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) return std::nullopt;
  }
  i = skip_ws(j);
  j = token_end(i);
  if (i == j) return std::nullopt;
  if (auto r = std::from_chars(line.data() + i, line.data() + j, rec.port);
      r.ec != std::errc{} || r.ptr != line.data() + j)
    return std::nullopt;

  std::size_t count = 0;
  int pending = -1;
  for (i = j; i < line.size(); ++i) {
    const char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      if (pending >= 0) return std::nullopt;  // split byte pair
      continue;
    }
    const int v = hex_value(c);
    if (v < 0 || count >= kCellBytes) return std::nullopt;
    if (pending < 0) {
      pending = v;
    } else {
      rec.bytes[count++] = static_cast<std::uint8_t>((pending << 4) | v);
      pending = -1;
    }
  }
  if (pending >= 0 || count != kCellBytes) return std::nullopt;
  return rec;
}

std::optional<std::array<std::uint8_t, 4>> parse_hex4(std::string_view hex) {
  if (hex.size() != 8) return std::nullopt;
  std::array<std::uint8_t, 4> out{};
  for (std::size_t k = 0; k < 4; ++k) {
    const int hi = hex_value(hex[2 * k]);
    const int lo = hex_value(hex[2 * k + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[k] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

}  // namespace atmsim
