#ifndef ADOM_RNG_HPP
#define ADOM_RNG_HPP

#include <cmath>
#include <cstdint>

namespace adom {

// Counter-based splittable RNG. A stream is a pure function of (seed, key),
// so independent consumers (e.g. gossip matrices at different step indices)
// can be generated in any order and still agree bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t key = 0)
      : state_(mix(mix(seed ^ 0x9E3779B97F4A7C15ull) ^ mix(key + 0xD1B54A32D192ED03ull))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // mulhi rejection-free mapping; bias is negligible for n << 2^64
    unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(prod >> 64);
  }

  // standard normal via Box-Muller, spare cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Fisher-Yates shuffle of [first, last)
  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = below(i);
      auto tmp = first[i - 1];
      first[i - 1] = first[j];
      first[j] = tmp;
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace adom

#endif  // ADOM_RNG_HPP
