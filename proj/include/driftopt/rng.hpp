// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace driftopt {

// Philox4x32-10 counter-based generator (Salmon et al., SC11). Output is a
// pure function of (key, counter), so draws do not depend on call order.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t seed)
      : k0_(std::uint32_t(seed)), k1_(std::uint32_t(seed >> 32)) {}

  Counter operator()(Counter c) const {
    std::uint32_t k0 = k0_, k1 = k1_;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = std::uint64_t(kM0) * c[0];
      std::uint64_t p1 = std::uint64_t(kM1) * c[2];
      c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k0, std::uint32_t(p1),
           std::uint32_t(p0 >> 32) ^ c[3] ^ k1, std::uint32_t(p0)};
      k0 += kW0;
      k1 += kW1;
    }
    return c;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
  std::uint32_t k0_, k1_;
};

// Open-interval uniform from 64 random bits.
inline double bits_to_uniform(std::uint64_t x) {
  return (double(x >> 12) + 0.5) * 0x1.0p-52;
}

// Acklam's rational approximation to the standard normal quantile
// (relative error below 1.15e-9).
inline double inverse_normal_cdf(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  constexpr double hi = 1.0 - lo;
  if (p < lo) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > hi) {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Noise streams of a simulated path.
enum class Stream : std::uint32_t { Returns = 0, Drift = 1, Initial = 2 };

// Standard normals addressed by (path, step, stream, coordinate).
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : gen_(seed) {}

  // Fills out[0..n) with the normals of one (path, step, stream) cell.
  void fill(std::uint64_t path, std::uint32_t step, Stream stream, double* out,
            int n) const {
    for (int j = 0; j < n; j += 2) {
      auto r = gen_({std::uint32_t(path), std::uint32_t(path >> 32), step,
                     (std::uint32_t(stream) << 16) | std::uint32_t(j / 2)});
      out[j] = inverse_normal_cdf(
          bits_to_uniform((std::uint64_t(r[0]) << 32) | r[1]));
      if (j + 1 < n)
        out[j + 1] = inverse_normal_cdf(
            bits_to_uniform((std::uint64_t(r[2]) << 32) | r[3]));
    }
  }

 private:
  Philox4x32 gen_;
};

// SplitMix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Sub-seed for a labeled experiment stage, e.g. "calibration".
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return splitmix64(seed ^ fnv1a(label));
}

}  // namespace driftopt
