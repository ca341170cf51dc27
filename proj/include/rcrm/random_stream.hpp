#pragma once

#include <cstdint>
#include <random>

namespace rcrm {

/// Seeded uniform stream shared by outcome generation and randomized
/// dose assignment.
///
/// mt19937_64 and seed_seq are both fully specified by the standard, and the
/// uniform is built from the top 53 bits, so a (seed, substream) pair yields
/// the same draws on every conforming platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : RandomStream(seed, 0) {}

  RandomStream(std::uint64_t seed, std::uint64_t substream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(substream),
                      static_cast<std::uint32_t>(substream >> 32)};
    engine_.seed(seq);
  }

  // Uniform on [0, 1).
  double uniform() {
    ++draws_;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

}  // namespace rcrm
