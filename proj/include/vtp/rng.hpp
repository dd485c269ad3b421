#pragma once

#include <cmath>
#include <cstdint>

namespace vtp {

// Seeded counter-based generator. std::mt19937_64 is portable but the
// standard distributions are not; this keeps every seeded artifact
// byte-identical across compilers and platforms.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_double() { return double(next() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1), safe as a Gumbel/log argument.
    double next_open() {
        double u = next_double();
        if (u < 1e-16) u = 1e-16;
        if (u > 1.0 - 1e-16) u = 1.0 - 1e-16;
        return u;
    }

    /// Standard normal via Box-Muller.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_open();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) { return n ? next() % n : 0; }

  private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent stream seed from a base seed and a stream tag.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    SplitMix64 g(base ^ (0x632be59bd9b4e019ull * (stream + 1)));
    return g.next();
}

} // namespace vtp
