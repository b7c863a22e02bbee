#pragma once

#include <cstdint>
#include <random>

namespace initlab {

// Seeded pseudorandom source used by every stochastic operation.
//
// The generator is std::mt19937_64, whose output stream is specified
// bit-exactly by the C++ standard, and the normal transform is an explicit
// Box-Muller so that draws do not depend on the standard library's
// (implementation-defined) std::normal_distribution. Identical seeds
// therefore produce identical streams on every platform.
//
// An Rng is single-owner: concurrent draws from one instance are not
// supported.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1), 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Standard normal draw (Box-Muller, spare value cached).
    double normal();

    double normal(double mean, double std) { return mean + std * normal(); }

    // Uniform index in [0, n). n must be positive.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace initlab
