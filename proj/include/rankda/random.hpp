#pragma once

// Random number generation for the samplers.
//
// Generator: xoshiro256** (Blackman & Vigna). A generator is identified by a
// (seed, stream) pair; the 256-bit state is filled from a SplitMix64 sequence
// started at a mix of both values, so every chain gets its own stream and a
// set of parallel chains is reproducible regardless of thread scheduling.
// All variates are derived from raw 64-bit outputs by code in this file, so
// traces are bit-identical across standard libraries.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace rankda {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Shape values below this are rejected by Rng::gamma.
inline constexpr double kMinGammaShape = 1e-3;

class Rng {
public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) {
    std::uint64_t x = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t next() {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: empty range");
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
      while (low < threshold) {
        x = next();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::size_t>(m >> 64);
  }

  /// Standard normal (Marsaglia polar method).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// log of a Gamma(shape, 1) variate. Marsaglia-Tsang for shape >= 1; below
  /// that, a draw at shape + 1 times U^(1/shape), applied in log space.
  double log_gamma_variate(double shape) {
    if (!(shape >= kMinGammaShape)) {
      throw std::invalid_argument("gamma shape below the supported floor");
    }
    if (shape < 1.0) return log_gamma_variate(shape + 1.0) + std::log(uniform_open()) / shape;
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
    }
  }

  double gamma(double shape) { return std::exp(log_gamma_variate(shape)); }

  /// Dirichlet(shapes) drawn as normalized gamma variates (normalized in log
  /// space, so tiny shapes cannot produce 0/0).
  std::vector<double> dirichlet(std::span<const double> shapes) {
    std::vector<double> out(shapes.size());
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      out[k] = log_gamma_variate(shapes[k]);
      hi = std::max(hi, out[k]);
    }
    double total = 0.0;
    for (double& v : out) {
      v = std::exp(v - hi);
      total += v;
    }
    for (double& v : out) v /= total;
    return out;
  }

  /// Index drawn with probability proportional to exp(log_weights[i]).
  /// Inversion of the cumulative sum after max-subtraction; ties resolve to
  /// the lowest index.
  std::size_t categorical_log(std::span<const double> log_weights) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double w : log_weights) hi = std::max(hi, w);
    if (!std::isfinite(hi)) throw std::domain_error("categorical_log: no finite weight");
    double total = 0.0;
    for (double w : log_weights) total += std::exp(w - hi);
    const double target = uniform() * total;
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
      const double w = std::exp(log_weights[i] - hi);
      if (w > 0.0) last_positive = i;
      cum += w;
      if (target < cum) return i;
    }
    return last_positive;
  }

  /// Index drawn from normalized (or unnormalized) nonnegative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::domain_error("categorical: weights sum to zero");
    const double target = uniform() * total;
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_positive = i;
      cum += weights[i];
      if (target < cum) return i;
    }
    return last_positive;
  }

  friend bool operator==(const Rng&, const Rng&) = default;

private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rankda
