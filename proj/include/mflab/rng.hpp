#pragma once

#include <cmath>
#include <cstdint>

namespace mflab::rng {

/// Finalizer of the splitmix64 generator; bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

/// Folds one component into a stream key.
constexpr std::uint64_t mix_step(std::uint64_t h, std::uint64_t v) {
    h ^= v + kGolden + (h << 12) + (h >> 4);
    return mix64(h);
}

/// Derives a child stream key from a seed and an arbitrary tuple of
/// 64-bit components (tags, indices). The whole reproducibility story
/// rests on this: every sample/trial/cell gets its own stream keyed by
/// (seed, components...), so results cannot depend on scheduling.
template <typename... Parts>
constexpr std::uint64_t derive(std::uint64_t seed, Parts... parts) {
    std::uint64_t h = mix64(seed + kGolden);
    ((h = mix_step(h, static_cast<std::uint64_t>(parts))), ...);
    return h;
}

/// xoshiro256++ engine. Small state, fast seeding via splitmix64 —
/// cheap enough to construct once per Monte Carlo sample.
class Xoshiro256pp {
  public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) {
            sm += kGolden;
            w = mix64(sm);
        }
    }

    std::uint64_t next() {
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

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

/// A self-contained random stream: uniforms and normals with fully
/// pinned algorithms (no reliance on libstdc++ distribution internals),
/// so snapshot tests stay valid across toolchains.
class Stream {
  public:
    explicit Stream(std::uint64_t key) : eng_(key) {}

    std::uint64_t bits() { return eng_.next(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_.next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n) by rejection (unbiased).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t v;
        do {
            v = eng_.next();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via the Marsaglia polar method (pair cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    Xoshiro256pp eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mflab::rng
