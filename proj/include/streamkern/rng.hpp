#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace streamkern {

// SplitMix64 counter generator. The state advances by a fixed odd constant and
// each output is a finalizer of the counter, so independent substreams can be
// derived by hashing a (seed, path...) key. Adding or removing consumers of
// one substream never perturbs another.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : state_(key) {}

  // Derive a substream key from a seed and a path of labels, e.g.
  // {rep, kStreamX} or {rep, kEval, n}.
  static CounterRng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = mix(seed ^ 0x6a09e667f3bcc908ull);
    for (std::uint64_t p : path) key = mix(key ^ mix(p + 0xbb67ae8584caa73bull));
    return CounterRng(key);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform on [0,1).
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1], for logs and inverse powers.
  double next_uniform_pos() { return 1.0 - next_uniform(); }

  // Box-Muller, two uniforms per draw.
  double next_normal(double sd = 1.0) {
    const double u = next_uniform_pos();
    const double v = next_uniform();
    return sd * std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
  }

  // Bailey's polar method for Student-t with nu degrees of freedom.
  double next_student_t(double nu, double scale = 1.0) {
    const double u = next_uniform_pos();
    const double v = next_uniform();
    return scale * std::sqrt(nu * (std::pow(u, -2.0 / nu) - 1.0)) *
           std::cos(2.0 * std::numbers::pi * v);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

// Substream labels used by the simulation harness.
inline constexpr std::uint64_t kSubstreamX = 1;
inline constexpr std::uint64_t kSubstreamNoise = 2;
inline constexpr std::uint64_t kSubstreamEval = 3;

}  // namespace streamkern
