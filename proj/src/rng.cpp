#include "qsc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace qsc {

int Rng::uniform_int(int n) {
    if (n < 1) {
        throw std::invalid_argument("Rng::uniform_int: n must be >= 1");
    }
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % un);
}

double Rng::normal() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int Rng::poisson(double mean) {
    if (mean < 0.0) {
        throw std::invalid_argument("Rng::poisson: mean must be >= 0");
    }
    if (mean == 0.0) {
        return 0;
    }
    const double threshold = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform01();
    } while (p > threshold);
    return k - 1;
}

uint64_t Rng::derive(uint64_t base, uint64_t stream) {
    // splitmix64 finalizer over the combined words.
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace qsc
