#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>

namespace curio {

std::string sha256_hex(std::string_view data);

// SplitMix64 finalizer; used to derive independent per-unit seeds.
std::uint64_t mix64(std::uint64_t x);

// Deterministic seed for one unit of work, e.g. derive_seed(run_seed, {suite, rep, item}).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

// FNV-1a of a label, for turning suite names into seed parts.
std::uint64_t label_hash(std::string_view label);

// mt19937_64 with explicit bounded sampling; std distributions are not
// portable across standard libraries, the engine sequence is.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  // Uniform real in [0, 1).
  double unit();
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  // Standard normal via Box-Muller.
  double normal();

  template <class Container>
  void shuffle(Container& c) {
    for (std::size_t i = c.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      using std::swap;
      swap(c[i - 1], c[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace curio
