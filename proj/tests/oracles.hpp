#pragma once

// Reference implementations used only by tests. Each one is written
// independently of the library: bit-at-a-time CRCs, header packing by
// explicit bit list, and exact rational arithmetic for the GCRA.

#include <zlib.h>

#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "atmsim/cell.hpp"

namespace oracle {

// CRC-8, generator x^8+x^2+x+1, processed one message bit at a time by
// long division of the message polynomial times x^8.
inline std::uint8_t crc8_bitwise(std::span<const std::uint8_t> bytes) {
  // remainder register holds 8 bits; feed message bits MSB first
  unsigned reg = 0;
  auto feed = [&](unsigned bit) {
    const unsigned top = (reg >> 7) & 1u;
    reg = ((reg << 1) | bit) & 0xFFu;
    if (top) reg ^= 0x07u;
  };
  for (std::uint8_t b : bytes)
    for (int i = 7; i >= 0; --i) feed((b >> i) & 1u);
  for (int i = 0; i < 8; ++i) feed(0);  // multiply by x^8
  return static_cast<std::uint8_t>(reg);
}

inline std::uint8_t hec(std::span<const std::uint8_t> four) { return crc8_bitwise(four) ^ 0x55; }

// Writes `width` bits of `value` MSB first into a 40-bit big-endian field.
struct BitWriter {
  std::array<std::uint8_t, 5> out{};
  unsigned pos = 0;
  void put(std::uint32_t value, unsigned width) {
    for (unsigned i = 0; i < width; ++i) {
      const unsigned bit = (value >> (width - 1 - i)) & 1u;
      if (bit) out[pos / 8] |= static_cast<std::uint8_t>(1u << (7 - pos % 8));
      ++pos;
    }
  }
};

// Header layout as a list of fields: UNI = GFC4 VPI8 VCI16 PTI3 CLP1,
// NNI = VPI12 VCI16 PTI3 CLP1, then the HEC byte.
inline std::array<std::uint8_t, 5> pack_header(const atmsim::CellHeader& h, atmsim::InterfaceKind kind) {
  BitWriter w;
  if (kind == atmsim::InterfaceKind::UNI) {
    w.put(h.gfc, 4);
    w.put(h.vpi, 8);
  } else {
    w.put(h.vpi, 12);
  }
  w.put(h.vci, 16);
  w.put(h.pti.is_management ? 1u : 0u, 1);
  w.put(h.pti.efci ? 1u : 0u, 1);
  w.put(h.pti.aal5_last ? 1u : 0u, 1);
  w.put(h.clp ? 1u : 0u, 1);
  w.put(hec(std::span<const std::uint8_t>(w.out.data(), 4)), 8);
  return w.out;
}

inline std::uint32_t crc32_zlib(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

// Exact rational number for the GCRA oracle. Values stay small enough
// (rates up to 10^4, bursts up to a few hundred) for 128-bit arithmetic.
struct Rational {
  __int128 num = 0;
  __int128 den = 1;

  static __int128 gcd(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }
  Rational() = default;
  Rational(__int128 n, __int128 d = 1) : num(n), den(d) {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const auto g = gcd(num, den);
    num /= g;
    den /= g;
  }
  friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend bool operator<=(Rational a, Rational b) { return a.num * b.den <= b.num * a.den; }
  friend bool operator<(Rational a, Rational b) { return a.num * b.den < b.num * a.den; }
  friend Rational max(Rational a, Rational b) { return a < b ? b : a; }
};

// Continuous-state leaky bucket over exact rationals: arrivals, increment
// and limit given exactly. Returns the conformance verdict of each cell.
inline std::vector<bool> gcra_exact(const std::vector<Rational>& arrivals, Rational increment, Rational limit) {
  std::vector<bool> out;
  Rational level(0), last(0);
  bool first = true;
  for (const auto& t : arrivals) {
    Rational drained = first ? Rational(0) : max(Rational(0), level - (t - last));
    first = false;
    if (drained <= limit) {
      level = drained + increment;
      last = t;
      out.push_back(true);
    } else {
      // state untouched: equivalent to keeping the drained level at t
      level = drained;
      last = t;
      out.push_back(false);
    }
  }
  return out;
}

}  // namespace oracle
