#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace rt {

// PCG32. Self-contained so that sequences are identical across platforms and
// serializable into checkpoints as two integers.
class Rng {
public:
    explicit Rng(uint64_t seed = 0, uint64_t stream = 1) { reseed(seed, stream); }

    void reseed(uint64_t seed, uint64_t stream = 1) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
        have_spare_ = false;
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // Uniform in [0, 1).
    double uniform() { return next_u32() * (1.0 / 4294967296.0); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u32() % static_cast<uint32_t>(hi - lo + 1));
    }

    // Box-Muller; avoids std::normal_distribution so streams are portable.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-12) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    uint64_t state() const { return state_; }
    uint64_t inc() const { return inc_; }
    void restore(uint64_t state, uint64_t inc) {
        state_ = state;
        inc_ = inc;
        have_spare_ = false;
    }

    // Derives an independent deterministic stream, e.g. per dataset sample.
    static Rng derive(uint64_t seed, uint64_t key) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (key + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31), key * 2 + 1);
    }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 1;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace rt
