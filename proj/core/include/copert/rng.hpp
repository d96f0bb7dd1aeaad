#pragma once

#include <cstdint>

namespace copert {

// Counter-based generator: output i of stream (key) is mix(key, i).
// Streams derived with split() are independent of the order in which they are drawn from.
class rng {
public:
    explicit rng(std::uint64_t seed) : key_(mix64(seed ^ 0x6a09e667f3bcc908ULL)) {}

    static std::uint64_t mix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t next_u64() { return mix64(key_ + mix64(counter_++)); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1).
    double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    std::uint64_t below(std::uint64_t bound);

    double normal();
    double exponential();
    bool bernoulli(double p) { return uniform() < p; }

    rng split(std::uint64_t stream) const { return rng(key_, stream); }
    std::uint64_t key() const { return key_; }

private:
    rng(std::uint64_t parent, std::uint64_t stream) : key_(mix64(parent ^ mix64(stream + 0x243f6a8885a308d3ULL))) {}

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace copert
