#pragma once

#include <cstdint>
#include <cmath>
#include <cstring>
#include <string_view>
#include <vector>

namespace longal {

// splitmix64 step. Used both as a stream generator and as a finalizer for
// seed derivation, so every random decision in the project is a pure
// function of the configured seeds regardless of platform or thread count.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_u64(std::uint64_t x) {
    std::uint64_t s = x;
    return splitmix64(s);
}

// Order-sensitive combiner for deriving child seeds: hash(seed, a, b, ...).
inline std::uint64_t seed_combine(std::uint64_t seed, std::uint64_t v) {
    std::uint64_t s = seed ^ (hash_u64(v) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    return hash_u64(s);
}

inline std::uint64_t hash_string(std::string_view s) {
    // FNV-1a 64
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x00000100000001b3ULL;
    }
    return h;
}

template <typename... Rest>
std::uint64_t seed_combine(std::uint64_t seed, std::uint64_t v, Rest... rest) {
    return seed_combine(seed_combine(seed, v), static_cast<std::uint64_t>(rest)...);
}

inline std::uint64_t seed_combine_str(std::uint64_t seed, std::string_view s) {
    return seed_combine(seed, hash_string(s));
}

// Deterministic RNG with hand-rolled distributions. std:: engines are
// portable but the distributions are not, and experiment logs must be
// byte-identical across runs.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {
        // decorrelate adjacent small seeds
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    float uniform_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    // unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    int range_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller, one value per call (cache the pair mate)
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), order randomized
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        // partial Fisher-Yates: first k slots
        for (std::size_t i = 0; i < k && i < n; ++i) {
            std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k < n ? k : n);
        return idx;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stateless per-element uniform in [0,1); safe to evaluate from any thread.
inline float element_uniform(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed_combine(seed, index);
    return static_cast<float>(splitmix64(s) >> 40) * 0x1.0p-24f;
}

}  // namespace longal
