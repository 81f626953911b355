#pragma once

#include <cstdint>
#include <vector>

namespace song {

// Deterministic generator with identical output on every platform.
// std::uniform_int_distribution is implementation-defined, so preprocessing,
// masking and sampling all go through this instead.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform integer in [lo, hi], inclusive. Uses rejection to stay unbiased.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return lo + static_cast<int64_t>(r % span);
    }

    // Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (always consumes two draws).
    double normal();

    // Fisher-Yates shuffle of an index vector.
    void shuffle(std::vector<size_t>& v);

    // Derives an independent stream, e.g. one per song or per loss term.
    Rng fork(uint64_t stream_id) {
        Rng r(state_ ^ (0x6a09e667f3bcc909ULL + stream_id * 0x9e3779b97f4a7c15ULL));
        r.next_u64();
        return r;
    }

private:
    uint64_t state_;
};

}  // namespace song
