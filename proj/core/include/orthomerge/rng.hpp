#pragma once

#include <cstdint>
#include <random>

namespace ortho {

/// Deterministic RNG used everywhere a seed appears. Gaussians come from
/// Box-Muller on top of mt19937_64 so that streams are identical across
/// standard libraries (std::normal_distribution is not portable).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0,1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double gaussian();

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(engine_() % n);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derive an independent child seed (task index, trial index, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ortho
