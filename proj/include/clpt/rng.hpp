#pragma once

#include <cstdint>
#include <limits>

namespace clpt {

/// Counter-based generator: output n is a SplitMix64 finalizer applied to
/// key + n * golden_gamma, so any draw can be recomputed from (key, n).
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    double uniform();                       ///< [0, 1), 53-bit resolution
    double uniform(double a, double b);
    double normal();                        ///< Box-Muller, standard normal
    std::uint64_t below(std::uint64_t n);   ///< uniform integer in [0, n)

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);
/// Seed of run `index` derived from a base seed; independent of worker count.
std::uint64_t run_seed(std::uint64_t base, std::uint64_t index);

}  // namespace clpt
