#pragma once
#include <cstddef>
#include <cstdint>
#include <vector>

namespace commitlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stateless stream: draw n depends only on (seed, stream, n), so trials can run in any
// order on any thread and still reproduce bit-for-bit.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(splitmix64(seed ^ splitmix64(stream ^ 0x6a09e667f3bcc909ULL))) {}

    std::uint64_t bits(std::uint64_t counter) const { return splitmix64(key_ ^ splitmix64(counter)); }

    // Uniform on [0,1) with 53 random bits.
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t key_;
};

// Inverse-CDF draw; never returns an index whose probability is exactly zero.
inline std::size_t sample_categorical(const std::vector<double>& probs, double u) {
    double cum = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last = i;
        cum += probs[i];
        if (u < cum) return i;
    }
    return last;
}

} // namespace commitlab
