#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

namespace llmdet::half {

// IEEE 754 binary16 encode/decode. Encoding rounds to nearest, ties to even,
// directly from the 64-bit value (no intermediate float rounding).

inline double to_double(std::uint16_t h) noexcept {
  const int sign = (h >> 15) & 1;
  const int exp = (h >> 10) & 0x1f;
  const int mant = h & 0x3ff;
  double v;
  if (exp == 0) {
    v = std::ldexp(static_cast<double>(mant), -24);
  } else if (exp == 0x1f) {
    v = mant ? std::nan("") : INFINITY;
  } else {
    v = std::ldexp(static_cast<double>(mant | 0x400), exp - 25);
  }
  return sign ? -v : v;
}

inline std::uint16_t from_double(double x) noexcept {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000);
  const int exp = static_cast<int>((bits >> 52) & 0x7ff);
  std::uint64_t mant = bits & 0xfffffffffffffULL;

  if (exp == 0x7ff) return sign | (mant ? 0x7e00 : 0x7c00);
  if (exp == 0 && mant == 0) return sign;

  const int unbiased = exp - 1023;
  if (unbiased > 15) return sign | 0x7c00;

  // Significand with explicit leading one (zero for double subnormals, which
  // underflow to zero anyway).
  std::uint64_t sig = (exp == 0) ? mant : (mant | (1ULL << 52));
  // Number of low bits of sig to discard so the result lands on the binary16
  // grid: 42 for normals, more for the subnormal range.
  int shift = 42;
  int half_exp = unbiased + 15;
  if (half_exp <= 0) {
    shift += 1 - half_exp;
    half_exp = 0;
  }
  if (shift > 63) return sign;

  std::uint64_t kept = sig >> shift;
  const std::uint64_t rem = sig & ((1ULL << shift) - 1);
  const std::uint64_t halfway = 1ULL << (shift - 1);
  if (rem > halfway || (rem == halfway && (kept & 1))) ++kept;

  // kept holds the 11-bit significand (with implicit bit) for normals or the
  // 10-bit mantissa for subnormals; carries propagate into the exponent field.
  std::uint32_t out;
  if (half_exp == 0) {
    out = static_cast<std::uint32_t>(kept);  // may carry into the smallest normal
  } else {
    out = (static_cast<std::uint32_t>(half_exp) << 10) + static_cast<std::uint32_t>(kept - 0x400);
  }
  if (out >= 0x7c00) return sign | 0x7c00;
  return sign | static_cast<std::uint16_t>(out);
}

inline double round_trip(double x) noexcept { return to_double(from_double(x)); }

}  // namespace llmdet::half
