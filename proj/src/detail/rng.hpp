#pragma once

#include <cstdint>
#include <random>

namespace mmot::detail {

// Deterministic uniform doubles from the raw 64-bit stream. The standard
// distributions are implementation-defined, so reports and fixtures seeded
// through this class stay reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // [-1, 1]
  double symmetric() { return 2.0 * uniform01() - 1.0; }

  std::uint64_t bits() { return gen_(); }

  // Independent substream for a labelled part of a computation.
  Rng derive(std::uint64_t stream) {
    std::uint64_t z = gen_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace mmot::detail
