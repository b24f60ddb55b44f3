#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace driftforge::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
inline std::uint64_t fmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Hash a (seed, id...) tuple into a stream key. Streams keyed on distinct
// tuples are independent, so work can be scheduled in any order without
// changing the draws.
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = fmix64(seed + kGolden);
    h = fmix64(h ^ (a + kGolden));
    h = fmix64(h ^ (b + kGolden));
    h = fmix64(h ^ (c + kGolden));
    return h;
}

// Counter-based generator: draw i is fmix64(key + i*golden). Satisfies
// UniformRandomBitGenerator so std distributions can run on top of it.
class Stream {
  public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

    result_type operator()() {
        counter_ += kGolden;
        return fmix64(key_ + counter_);
    }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller, second value cached
    double normal() {
        if (has_cache_) {
            has_cache_ = false;
            return cache_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 6.283185307179586476925286766559 * u2;
        cache_ = r * std::sin(th);
        has_cache_ = true;
        return r * std::cos(th);
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cache_ = 0.0;
    bool has_cache_ = false;
};

// Fixed stage tags so independent pipeline stages never share a stream.
namespace tag {
inline constexpr std::uint64_t simulate = 0x51;
inline constexpr std::uint64_t observe = 0x0b;
inline constexpr std::uint64_t propagate = 0x9a;
inline constexpr std::uint64_t resample = 0x4e;
inline constexpr std::uint64_t scales = 0xb5;
inline constexpr std::uint64_t stationary = 0x57;
}  // namespace tag

}  // namespace driftforge::rng
