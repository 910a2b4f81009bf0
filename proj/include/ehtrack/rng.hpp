// Counter-based random streams.
#pragma once

#include <cstdint>

namespace ehtrack {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stream of uniforms addressed by (seed, stream id, counter). Two streams
/// with different ids never share draws, so the source, energy and channel
/// processes see the same sample paths whatever the policy does.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

    std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double prob) { return uniform() < prob; }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

enum class Stream : std::uint64_t { source = 1, energy = 2, channel = 3 };

inline CounterRng make_stream(std::uint64_t seed, Stream s) {
    return CounterRng(seed, static_cast<std::uint64_t>(s));
}

}  // namespace ehtrack
