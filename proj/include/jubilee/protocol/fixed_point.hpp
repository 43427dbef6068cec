// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace jubilee::protocol {

/// Prime field the protocol computes in: p = 2^61 - 1 (Mersenne).
inline constexpr std::uint64_t kFieldPrime = 2305843009213693951ULL;

inline std::uint64_t field_reduce(std::uint64_t v) { return v >= kFieldPrime ? v - kFieldPrime : v; }

inline std::uint64_t field_add(std::uint64_t a, std::uint64_t b) {
  // a, b < p < 2^61, so the sum fits in 64 bits.
  return field_reduce(a + b);
}

inline std::uint64_t field_neg(std::uint64_t a) { return a == 0 ? 0 : kFieldPrime - a; }

inline std::uint64_t field_sub(std::uint64_t a, std::uint64_t b) { return field_add(a, field_neg(b)); }

inline std::uint64_t field_mul(std::uint64_t a, std::uint64_t b) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
  return static_cast<std::uint64_t>(prod % kFieldPrime);
}

/// Signed interpretation: elements above (p-1)/2 represent negatives.
inline std::int64_t field_to_signed(std::uint64_t v) {
  if (v > (kFieldPrime - 1) / 2) {
    return static_cast<std::int64_t>(v) - static_cast<std::int64_t>(kFieldPrime);
  }
  return static_cast<std::int64_t>(v);
}

inline std::uint64_t field_from_signed(std::int64_t x) {
  if (x >= 0) return field_reduce(static_cast<std::uint64_t>(x));
  const std::uint64_t mag = static_cast<std::uint64_t>(-x) % kFieldPrime;
  return field_neg(mag);
}

/// Uniform field element from a seeded engine (rejection over 61-bit draws).
inline std::uint64_t field_uniform(std::mt19937_64& gen) {
  for (;;) {
    const std::uint64_t v = gen() >> 3;  // 61 random bits
    if (v < kFieldPrime) return v;
  }
}

/// Fixed-point codec over the field: reals are scaled by 2^fractional_bits
/// and rounded half away from zero; elements above (p-1)/2 decode negative.
struct FixedPointCodec {
  int fractional_bits = 20;

  explicit FixedPointCodec(int fractional_bits_ = 20) : fractional_bits(fractional_bits_) {
    if (fractional_bits < 1 || fractional_bits > 40) {
      throw std::invalid_argument("FixedPointCodec: fractional bits must lie in [1, 40]");
    }
  }

  double scale() const { return std::ldexp(1.0, fractional_bits); }

  /// Largest encodable magnitude; leaves headroom below the signed field
  /// range for the affine arithmetic the protocol performs on top.
  double max_abs() const { return std::ldexp(1.0, 50 - fractional_bits); }

  std::uint64_t encode(double x) const { return encode_at(x, fractional_bits); }

  double decode(std::uint64_t v) const { return decode_at(v, fractional_bits); }

  /// Encode at an explicit scale (products of two fixed-point values live at
  /// twice the base scale).
  std::uint64_t encode_at(double x, int scale_bits) const {
    if (!std::isfinite(x) || std::abs(x) >= max_abs()) {
      throw std::invalid_argument("fixed-point encode: value outside the encodable range");
    }
    const double scaled = x * std::ldexp(1.0, scale_bits);
    // Round half away from zero.
    const double rounded = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
    return field_from_signed(static_cast<std::int64_t>(rounded));
  }

  double decode_at(std::uint64_t v, int scale_bits) const {
    return static_cast<double>(field_to_signed(v)) * std::ldexp(1.0, -scale_bits);
  }
};

/// One additive share held by one evaluator.
struct Share {
  int evaluator = 1;  ///< 1 or 2
  std::uint64_t value = 0;
};

/// Split an encoded input into two additive shares: (r, x - r) with r
/// uniform over the field. Either share alone is uniform, so a single
/// evaluator learns nothing.
inline std::pair<Share, Share> share_field_element(std::uint64_t x, std::mt19937_64& gen) {
  const std::uint64_t r = field_uniform(gen);
  return {Share{1, r}, Share{2, field_sub(x, r)}};
}

/// Encode a real input and split it (the creditor-side sharing step).
inline std::pair<Share, Share> share_input(double theta, const FixedPointCodec& codec,
                                           std::mt19937_64& gen) {
  return share_field_element(codec.encode(theta), gen);
}

inline std::uint64_t reconstruct(const Share& a, const Share& b) {
  return field_add(a.value, b.value);
}

}  // namespace jubilee::protocol
