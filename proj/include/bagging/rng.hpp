#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bagging {

// SplitMix64 finalizer. Good avalanche, used to key derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: the result depends only on the four keys,
/// so adding samples or members never perturbs previously derived seeds.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t level,
                                    std::uint64_t i, std::uint64_t j) noexcept {
  std::uint64_t h = mix64(base);
  h = mix64(h ^ (level * 0xd6e8feb86659fd93ULL));
  h = mix64(h ^ (i * 0xa0761d6478bd642fULL + 1));
  h = mix64(h ^ (j * 0xe7037ed1a0b428dbULL + 2));
  return h;
}

// Seed-level tags for derive_seed. Kept distinct so streams never overlap.
enum class SeedLevel : std::uint64_t {
  first_level = 0,
  second_level = 1,
  member_sample = 2,
  member_init = 3,
  single_init = 4,
  ensemble_init = 5,
};

constexpr std::uint64_t derive_seed(std::uint64_t base, SeedLevel level,
                                    std::uint64_t i, std::uint64_t j) noexcept {
  return derive_seed(base, static_cast<std::uint64_t>(level), i, j);
}

/// Deterministic random source. std::mt19937_64 is specified bit-exactly by
/// the standard; the distributions are not, so bounded draws and reals are
/// implemented here to stay reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

  // Uniform real in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto k = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[k]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bagging
