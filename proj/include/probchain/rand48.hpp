// Deterministic sampling: the 48-bit rand48 linear congruential generator and
// the noise draws built on top of it.

#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

namespace probchain {

// Anything that hands out uniform reals in [0,1).
template <typename R>
concept UniformSource = requires(R& r) {
  { r.next_uniform() } -> std::convertible_to<double>;
};

// rand48: x' = (0x5DEECE66D * x + 0xB) mod 2^48. Bit-compatible with
// srand48()/drand48().
class Rand48 {
 public:
  static constexpr std::uint64_t kMultiplier = 0x5DEECE66DULL;
  static constexpr std::uint64_t kIncrement = 0xBULL;
  static constexpr std::uint64_t kMask = (std::uint64_t{1} << 48) - 1;
  static constexpr std::uint64_t kSeedLow = 0x330EULL;

  Rand48() : Rand48(0u) {}
  explicit Rand48(std::uint32_t seed) { this->seed(seed); }

  void seed(std::uint32_t s) { state_ = (std::uint64_t{s} << 16) | kSeedLow; }

  [[nodiscard]] std::uint64_t state() const { return state_; }

  // Raw 48-bit step.
  std::uint64_t next_raw() {
    state_ = (kMultiplier * state_ + kIncrement) & kMask;
    return state_;
  }

  // Uniform in [0,1) with 48 bits of resolution.
  double next_uniform() {
    return static_cast<double>(static_cast<std::int64_t>(next_raw())) * 0x1p-48;
  }

 private:
  std::uint64_t state_ = 0;
};

// 2a(u - 0.5): uniform on [-a, a).
template <UniformSource R>
double next_bipolar(R& rng, double a) {
  return 2.0 * a * (rng.next_uniform() - 0.5);
}

// N(0, sigma^2) by Marsaglia's polar method. Candidates are drawn x then y;
// (x, y) is rejected when s >= 1 or s == 0. Only x*m is returned; the paired
// y*m is discarded so the generator carries no hidden state.
template <UniformSource R>
double next_gaussian(R& rng, double sigma) {
  for (;;) {
    const double x = 2.0 * rng.next_uniform() - 1.0;
    const double y = 2.0 * rng.next_uniform() - 1.0;
    const double s = x * x + y * y;
    if (s >= 1.0 || s == 0.0) continue;
    return sigma * x * std::sqrt(-2.0 * std::log(s) / s);
  }
}

enum class NoiseFamily { uniform, gaussian };

inline std::string_view to_string(NoiseFamily f) {
  return f == NoiseFamily::uniform ? "uniform" : "gaussian";
}

inline NoiseFamily parse_noise_family(std::string_view s) {
  if (s == "uniform") return NoiseFamily::uniform;
  if (s == "gaussian") return NoiseFamily::gaussian;
  throw std::invalid_argument("unknown noise family '" + std::string(s) + "'");
}

// Additive noise on a probability. For the gaussian family, `amplitude`
// multiplies a standard deviation of sqrt(1/12), i.e. that of U[0,1].
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::uniform;
  bool truncated = false;
  double amplitude = 0.0;
};

inline constexpr double kUniformSigma = 0.28867513459481288225;  // sqrt(1/12)

template <UniformSource R>
double draw_noise(R& rng, NoiseFamily family, double amplitude) {
  if (family == NoiseFamily::uniform) return next_bipolar(rng, amplitude);
  return next_gaussian(rng, amplitude * kUniformSigma);
}

template <UniformSource R>
double draw_noise(R& rng, const NoiseSpec& noise) {
  return draw_noise(rng, noise.family, noise.amplitude);
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Seed for an independent work unit, a pure function of the master seed and
// the unit's coordinates. Parallel sweeps use this so results do not depend
// on scheduling.
inline std::uint32_t derive_seed(std::uint32_t master,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = detail::splitmix64(master);
  for (std::uint64_t k : keys) h = detail::splitmix64(h ^ detail::splitmix64(k));
  return static_cast<std::uint32_t>(h >> 32);
}

inline Rand48 derived_stream(std::uint32_t master,
                             std::initializer_list<std::uint64_t> keys) {
  return Rand48(derive_seed(master, keys));
}

}  // namespace probchain
