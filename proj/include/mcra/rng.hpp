#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace mcra {

// splitmix64 step; used only to derive substream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent seed for a named substream, e.g.
// substream_seed(master, {kAgentStream, user_id}). Draw order between
// substreams then cannot affect reproducibility.
inline std::uint64_t substream_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master;
  std::uint64_t out = splitmix64(s);
  for (std::uint64_t p : path) {
    s = out ^ (p + 0x9e3779b97f4a7c15ULL);
    out = splitmix64(s);
  }
  return out;
}

// Stream ids for substream_seed paths.
enum StreamId : std::uint64_t {
  kPopulationStream = 1,
  kAgentStream = 2,
  kFadingStream = 3,
  kBaselineStream = 4,
  kInitStream = 5,
};

// mt19937_64 wrapper with hand-rolled samplers so that draws are
// reproducible across standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive; rejection sampling, no modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() / span * span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Standard normal via Box-Muller; second draw of each pair is cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // Poisson count by inversion (Knuth); intended for small lambda.
  int poisson(double lambda) {
    const double l = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > l);
    return k - 1;
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mcra
