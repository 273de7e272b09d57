#pragma once

#include <cstdint>
#include <random>

namespace psmt {

// Seeded generator. Bounded draws use rejection sampling on top of the raw
// 64-bit stream so results do not depend on the standard library's
// distribution implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    // Uniform in [0, n). n must be nonzero.
    uint64_t below(uint64_t n)
    {
        const uint64_t floor = (0 - n) % n;  // 2^64 mod n
        uint64_t x;
        do {
            x = gen_();
        } while (x < floor);
        return x % n;
    }

    // Uniform in [0, 1).
    double unit() { return double(gen_() >> 11) * 0x1.0p-53; }

    bool coin() { return gen_() & 1; }

private:
    std::mt19937_64 gen_;
};

inline uint64_t splitmix64(uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based derivation: seed for trial `counter` on sub-stream `stream`.
inline uint64_t derive_seed(uint64_t master, uint64_t counter, uint64_t stream = 0)
{
    return splitmix64(splitmix64(master ^ splitmix64(stream)) + counter);
}

}  // namespace psmt
