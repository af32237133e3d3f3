#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ctsr {

// Seeded random source. The engine is std::mt19937_64, whose output sequence
// is fixed by the C++ standard; uniform and normal variates are derived here
// rather than through <random> distributions, which are implementation
// defined. Same seed and same call sequence give the same values everywhere.
class Rng {
public:
    static constexpr std::string_view algorithm = "mt19937_64/polar-normal/v1";

    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Standard normal (Marsaglia polar method).
    double normal();
    // Uniform integer on [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // Independent child stream; the parent is not advanced.
    Rng fork(std::uint64_t stream) const;

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);
    // k distinct indices from 0..n-1, returned in ascending order.
    std::vector<std::size_t> choose(std::size_t n, std::size_t k);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace ctsr
