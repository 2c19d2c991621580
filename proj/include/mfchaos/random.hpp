#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfchaos {

// Counter-based generator: every draw is a pure function of
// (seed, replica, stream, step, lane), so results do not depend on the order
// in which replicas or particles are processed.
class CounterRng {
 public:
  // Step value reserved for initial sampling, before the first time step.
  static constexpr std::uint64_t kInitialStep = ~std::uint64_t{0};

  CounterRng(std::uint64_t seed, std::uint64_t replica) noexcept
      : key_(mix(seed ^ mix(replica + 0x632be59bd9b4e019ULL))) {}

  [[nodiscard]] std::uint64_t bits(std::uint64_t stream, std::uint64_t step,
                                   std::uint64_t lane) const noexcept {
    std::uint64_t h = mix(key_ ^ mix(stream + 0x9e3779b97f4a7c15ULL));
    h = mix(h ^ mix(step + 0xbf58476d1ce4e5b9ULL));
    return mix(h ^ mix(lane + 0x94d049bb133111ebULL));
  }

  // Uniform on the open interval (0, 1).
  [[nodiscard]] double uniform(std::uint64_t stream, std::uint64_t step,
                               std::uint64_t lane) const noexcept {
    return (static_cast<double>(bits(stream, step, lane) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal by Box-Muller on lanes 2*lane and 2*lane + 1.
  [[nodiscard]] double normal(std::uint64_t stream, std::uint64_t step,
                              std::uint64_t lane) const noexcept {
    const double u1 = uniform(stream, step, 2 * lane);
    const double u2 = uniform(stream, step, 2 * lane + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace mfchaos
