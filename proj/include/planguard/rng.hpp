#pragma once

#include <cstdint>
#include <random>

namespace planguard {

// splitmix64: cheap, well-mixed stream derivation. All randomness in the
// library flows through explicit seeds derived with this; nothing touches
// global RNG state.
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent child seed from a parent seed and one or more tags.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + (tag << 1));
    std::uint64_t a = splitmix64(s);
    s ^= tag * 0xff51afd7ed558ccdULL;
    return a ^ splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b) {
    return derive_seed(derive_seed(seed, tag_a), tag_b);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return derive_seed(derive_seed(seed, a, b), c);
}

// Thin wrapper over mt19937_64 seeded once; keeps call sites short.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean, double sigma) {
        return std::normal_distribution<double>(mean, sigma)(engine_);
    }

    // Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

// Deterministic coin with probability p derived from a token alone. Used for
// per-episode decisions that must be reproducible given the token.
inline bool token_coin(std::uint64_t token, std::uint64_t salt, double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    std::uint64_t s = token ^ salt;
    std::uint64_t z = splitmix64(s);
    // 53-bit mantissa fraction in [0, 1).
    double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    return u < p;
}

}  // namespace planguard
