#pragma once

#include <cstdint>
#include <random>

namespace qsc {

// Seeded random source with self-contained sampling routines.
// std::*_distribution output is implementation-defined, so every draw here
// is derived directly from mt19937_64 words; identical seeds give identical
// streams on every platform.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). n must be >= 1.
    int uniform_int(int n);

    // Standard normal via Box-Muller; consumes exactly two words.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Poisson sample (Knuth multiplication method; fine for small means).
    int poisson(double mean);

    // Deterministic sub-stream seed (splitmix64 mix of base and stream index).
    static uint64_t derive(uint64_t base, uint64_t stream);

  private:
    std::mt19937_64 gen_;
};

}  // namespace qsc
