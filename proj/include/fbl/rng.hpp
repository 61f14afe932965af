#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fbl {

// Seed mixing for independent deterministic substreams. Used so that
// (epoch, member, episode) indices map to reproducible seeds regardless of
// evaluation order or thread count.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
  auto splitmix = [](std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = seed;
  std::uint64_t h = splitmix(s);
  s ^= a + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix(s);
  s ^= b + 0xc2b2ae3d27d4eb4fULL;
  h ^= splitmix(s);
  s ^= c + 0x165667b19e3779f9ULL;
  h ^= splitmix(s);
  return h;
}

// Deterministic RNG. std::mt19937_64 output is pinned by the standard; the
// uniform/normal transforms below are our own so streams are identical on
// every platform (std::normal_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; caches the second deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fbl
