#ifndef MRASH_RNG_HPP
#define MRASH_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>

namespace mrash::rng {

// SplitMix64 finalizer; used to turn (seed, stream ids) tuples into
// well-separated engine seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ b);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b) ^ c);
}

// Deterministic random stream backed by mt19937_64. All samplers are
// implemented here rather than with std::*_distribution so the realized
// draws are identical across standard libraries and platforms.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(mix64(seed)) {}

  // Independent sub-stream keyed by up to three ids, e.g.
  // (scenario seed, replicate, purpose).
  static Stream substream(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0) {
    Stream s(0);
    s.engine_.seed(mix64(mix64(seed, a, b) ^ c));
    return s;
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the spare draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Laplace with scale parameter (variance 2*scale^2), by inverse CDF.
  double laplace(double scale) {
    double u = uniform() - 0.5;
    double mag = std::log(1.0 - 2.0 * std::abs(u));
    return u < 0 ? scale * mag : -scale * mag;
  }

  // Student t with integer df, as normal / sqrt(chi2_df / df);
  // the chi-square is a sum of df squared normals, exact for integer df.
  double student_t(int df) {
    if (df < 1) throw std::invalid_argument("student_t: df must be >= 1");
    double z = normal();
    double chi2 = 0.0;
    for (int i = 0; i < df; ++i) {
      double g = normal();
      chi2 += g * g;
    }
    return z / std::sqrt(chi2 / df);
  }

  // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("below: n must be positive");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mrash::rng

#endif
