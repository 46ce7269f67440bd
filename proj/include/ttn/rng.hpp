#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

namespace ttn::rng {

// Counter-based generator built on the SplitMix64 finalizer. A (seed, label)
// pair fully determines a stream, and every draw within a stream is addressed
// by its counter, so matrices can be generated in any order (or in parallel)
// with bit-identical results.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fold(std::uint64_t key, std::uint64_t v) {
  return mix64(key ^ (v + 0x9e3779b97f4a7c15ULL + (key << 6) + (key >> 2)));
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0,
                                std::uint64_t d = 0) {
  std::uint64_t k = mix64(seed);
  k = fold(k, a);
  k = fold(k, b);
  k = fold(k, c);
  k = fold(k, d);
  return k;
}

// Label tags keeping independent uses of the same seed on disjoint streams.
inline constexpr std::uint64_t kTagNodeDrm = 1;   // per-node DRM (seed, l, k, side)
inline constexpr std::uint64_t kTagKrFactor = 2;  // per-mode Khatri-Rao factor (seed, mode, side)
inline constexpr std::uint64_t kTagKernel = 3;    // matrix-kernel internal draws
inline constexpr std::uint64_t kTagSeqDrm = 4;    // sequential-path right sketches
inline constexpr std::uint64_t kTagSynth = 5;     // synthetic tensor generation
inline constexpr std::uint64_t kTagTrial = 6;     // per-trial seed derivation

inline std::uint64_t bits_at(std::uint64_t key, std::uint64_t i) {
  return mix64(key + (i + 1) * 0x9e3779b97f4a7c15ULL);
}

// Uniform in (0,1), never exactly 0 or 1.
inline double uniform_at(std::uint64_t key, std::uint64_t i) {
  return (static_cast<double>(bits_at(key, i) >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal quantile, rational approximation (relative error below
// 1.2e-9 on (0,1)); one uniform per normal keeps every entry independently
// addressable and the whole transform cheap enough for the large maps.
inline double normal_from_uniform(double p) {
  constexpr double a0 = -3.969683028665376e+01, a1 = 2.209460984245205e+02,
                   a2 = -2.759285104469687e+02, a3 = 1.383577518672690e+02,
                   a4 = -3.066479806614716e+01, a5 = 2.506628277459239e+00;
  constexpr double b0 = -5.447609879822406e+01, b1 = 1.615858368580409e+02,
                   b2 = -1.556989798598866e+02, b3 = 6.680131188771972e+01,
                   b4 = -1.328068155288572e+01;
  constexpr double c0 = -7.784894002430293e-03, c1 = -3.223964580411365e-01,
                   c2 = -2.400758277161838e+00, c3 = -2.549732539343734e+00,
                   c4 = 4.374664141464968e+00, c5 = 2.938163982698783e+00;
  constexpr double d0 = 7.784695709041462e-03, d1 = 3.224671290700398e-01,
                   d2 = 2.445134137142996e+00, d3 = 3.754408661907416e+00;
  constexpr double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c0 * q + c1) * q + c2) * q + c3) * q + c4) * q + c5) /
           ((((d0 * q + d1) * q + d2) * q + d3) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c0 * q + c1) * q + c2) * q + c3) * q + c4) * q + c5) /
           ((((d0 * q + d1) * q + d2) * q + d3) * q + 1.0);
  }
  const double q = p - 0.5, r = q * q;
  return (((((a0 * r + a1) * r + a2) * r + a3) * r + a4) * r + a5) * q /
         (((((b0 * r + b1) * r + b2) * r + b3) * r + b4) * r + 1.0);
}

inline double normal_at(std::uint64_t key, std::uint64_t i) {
  return normal_from_uniform(uniform_at(key, i));
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols,
                                std::uint64_t key) {
  Eigen::MatrixXd m(rows, cols);
  double* out = m.data();
  const Eigen::Index total = rows * cols;
  for (Eigen::Index i = 0; i < total; ++i)
    out[i] = normal_at(key, static_cast<std::uint64_t>(i));
  return m;
}

}  // namespace ttn::rng
