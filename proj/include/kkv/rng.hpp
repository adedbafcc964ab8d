#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace kkv {

// Seeded deterministic random stream. Each (seed, stream) pair yields an
// independent, platform-stable draw sequence, so parallel episodes keyed by
// (run seed, episode index) reproduce bit-identically at any worker count.
//
// Engine is xoshiro256++ with splitmix64 state expansion. The uniform and
// normal transforms are hand-rolled (53-bit mantissa scaling, Box-Muller)
// rather than <random> distributions, whose output is implementation-defined.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = seed;
    // Mix the stream id into the splitmix sequence so nearby ids decorrelate.
    sm ^= 0x9e3779b97f4a7c15ull * (stream + 1);
    for (auto& word : state_) word = splitmix64(sm);
    if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0) {
      state_[0] = 1;
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Zero-mean Gaussian. Consumes exactly two uniforms per call.
  double normal(double sigma = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Eigen::Vector3d normal3(double sigma) {
    Eigen::Vector3d v;
    v.x() = normal(sigma);
    v.y() = normal(sigma);
    v.z() = normal(sigma);
    return v;
  }

  // Uniform integer in [0, n). Modulo bias is negligible for the small n used here.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  // Uniform direction on the unit sphere.
  Eigen::Vector3d unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * M_PI);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_;
};

}  // namespace kkv
