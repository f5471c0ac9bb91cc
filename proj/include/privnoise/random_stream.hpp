#pragma once

#include <cmath>
#include <cstdint>

namespace privnoise {

// Counter-based deterministic random stream. A (seed, stream_id) pair fixes
// the whole draw sequence; forked streams never alias because the id is mixed
// into the counter hash. Value-semantic: copy freely, never share mutably.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id), counter_(0), have_spare_(false), spare_(0.0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream for (trial, row)-style fan-out; independent of parent state.
  RandomStream fork(std::uint64_t child_id) const {
    return RandomStream(seed_, mix(mix(stream_id_ + 0x9e3779b97f4a7c15ULL) ^ child_id));
  }

  std::uint64_t next_u64() {
    std::uint64_t x = seed_ + 0x9e3779b97f4a7c15ULL * (counter_++);
    x ^= mix(stream_id_ ^ 0xbf58476d1ce4e5b9ULL);
    return mix(x);
  }

  // Uniform on [0, 1) with 53 bits of mantissa.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; pairs cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_uniform();
    } while (u1 <= 0.0);
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // Zero-mean Laplace with scale b (variance 2 b^2), by inverse CDF.
  double next_laplace(double b) {
    const double u = next_uniform() - 0.5;
    return (u < 0.0 ? b : -b) * std::log1p(-2.0 * std::abs(u));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
  bool have_spare_;
  double spare_;
};

}  // namespace privnoise
