#ifndef RCB_RNG_HPP
#define RCB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>

namespace rcb {

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based splittable random stream (xoshiro256** core).
///
/// All draws are produced from raw 64-bit outputs with hand-written
/// transforms, so a (seed, stream) pair replays bit-identically on every
/// platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept {
        std::uint64_t s = splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
        for (auto& w : state_) {
            s = splitmix64(s);
            w = s;
        }
    }

    /// Independent child stream; does not advance this stream.
    [[nodiscard]] Rng split(std::uint64_t stream) const noexcept {
        return Rng(state_[0] ^ splitmix64(state_[3] + stream), stream);
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via the polar method.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0, v = 0.0, s = 0.0;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Standard normal conditioned on |z| <= bound (rejection).
    double truncated_normal(double bound) noexcept {
        for (;;) {
            const double z = normal();
            if (std::abs(z) <= bound) return z;
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rcb

#endif  // RCB_RNG_HPP
