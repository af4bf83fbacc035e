#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace minbal {

// Derives an independent 64-bit seed for sub-stream `index` of `master`
// (SplitMix64 finalizer over master + (index + 1) * golden gamma).
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Seeded random stream with a platform-independent output sequence.
///
/// Bits come from std::mt19937_64, whose output is fixed by the standard.
/// Uniforms use the top 53 bits; normals use the inverse normal CDF of one
/// uniform, so every variate consumes exactly one engine draw.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }
    // Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    // Uniform index in [0, n).
    std::size_t index(std::size_t n);
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace minbal
