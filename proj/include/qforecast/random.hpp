#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qf {

using Rng = std::mt19937_64;

// Independent seed streams. Values are part of the on-disk determinism
// contract: changing them changes every generated file.
enum class Stream : std::uint64_t {
  kTruth = 0x7472757468ULL,
  kMeasurement = 0x6D656173ULL,
  kQuantizer = 0x7175616EULL,
  kTuning = 0x74756E65ULL,
  kFilter = 0x66696C74ULL,
  kReference = 0x72656665ULL,
  kGprStarts = 0x67707273ULL,
};

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(master ^ static_cast<std::uint64_t>(stream)) + index);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) + index);
}

// The std distributions are implementation-defined; these are not, so files
// produced on different standard libraries still match.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) {
  // Marsaglia polar method, second variate discarded.
  double u, v, s;
  do {
    u = 2.0 * uniform01(rng) - 1.0;
    v = 2.0 * uniform01(rng) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

}  // namespace qf
