#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace qsnn {

// Seedable generator with a platform-independent stream. The engine is
// std::mt19937_64, whose output sequence is fixed by the C++ standard; all
// conversions to reals and bounded integers are done here rather than through
// the <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform_open() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
  }

  // Uniform in (-0.5, 0.5), endpoints excluded.
  double centered_noise() { return uniform_open() - 0.5; }

  // Standard normal via Box-Muller.
  double normal();

  // Uniform integer in [0, n). Rejection sampling, so no modulo bias.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  // Stream seed for a (seed, index) pair, e.g. one stream per epoch or sample.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace qsnn
