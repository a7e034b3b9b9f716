#pragma once

#include <cmath>
#include <cstdint>

namespace entrofield {

// Counter-free generator with cheap stream splitting. Every stochastic code
// path takes an explicit Rng so results are a pure function of (seed, stream).
class Rng {
public:
    explicit Rng(std::uint64_t seed) { seed_state(seed); }

    // Independent stream for a walker or replica. Stream construction mixes
    // the index through splitmix64 twice, so neighboring indices share no
    // state structure.
    static Rng for_stream(std::uint64_t seed, std::uint64_t index) {
        Rng r(0);
        std::uint64_t sm = seed + 0x9e3779b97f4a7c15ull * (index + 1);
        for (auto& word : r.s_) word = splitmix64(sm);
        if ((r.s_[0] | r.s_[1] | r.s_[2] | r.s_[3]) == 0) r.s_[0] = 1;
        r.cached_ = false;
        r.cache_ = 0.0;
        return r;
    }

    std::uint64_t next_u64() {
        // xoshiro256++
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform on (0,1); never returns 0 or 1
    double uniform() {
        const std::uint64_t bits = next_u64() >> 11;  // 53 bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    // standard normal, Box-Muller with one cached value
    double normal() {
        if (cached_) {
            cached_ = false;
            return cache_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cache_ = r * std::sin(a);
        cached_ = true;
        return r * std::cos(a);
    }

    static std::uint64_t splitmix64(std::uint64_t& state) {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    void seed_state(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    bool cached_ = false;
    double cache_ = 0.0;
};

}
