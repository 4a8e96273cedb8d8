#pragma once

#include <cstdint>
#include <random>

namespace cgm {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic random source. mt19937_64 output is fixed by the standard;
// the mappings to doubles/ints below are pinned here so that seeded runs are
// byte-identical across platforms (the std distribution objects are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform on (0,1]; never returns 0 so normalized tables stay positive.
  double uniform01() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform on {lo,...,hi} inclusive.
  int uniform_int(int lo, int hi) {
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  // Independent substream derived from this generator's seed.
  Rng fork(std::uint64_t stream) const {
    return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream)));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace cgm
