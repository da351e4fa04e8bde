#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "gossipkf/linalg.hpp"

namespace gossipkf {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named sub-streams of one simulation run.
enum class Stream : std::uint64_t {
  kTruth = 1,
  kMeasurement = 2,
  kGossip = 3,
  kSensorGain = 4,
};

/// Seedable, splittable generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform and normal variates are derived here rather than through
/// <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child generator for `stream`; does not advance this one.
  Rng split(Stream stream) const { return split(static_cast<std::uint64_t>(stream)); }

  Rng split(std::uint64_t stream_id) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n).
  int uniform_index(int n) {
    const int k = static_cast<int>(uniform() * n);
    return k < n ? k : n - 1;
  }

  /// Standard normal via the Box-Muller transform.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector normal_vector(Eigen::Index size) {
    Vector v(size);
    for (Eigen::Index k = 0; k < size; ++k) v(k) = normal();
    return v;
  }

  /// Zero-mean Gaussian with covariance sqrt_cov * sqrt_cov'.
  Vector gaussian(const Matrix& sqrt_cov) { return sqrt_cov * normal_vector(sqrt_cov.cols()); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace gossipkf
