#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace safesgd {

// Purpose tags for deriving independent substreams from one master seed.
// Every consumer of randomness owns a stream keyed by (master, tag, a, b),
// so the draw order of one agent never perturbs another's.
enum class StreamTag : std::uint64_t {
    kTrainData = 1,
    kTestData = 2,
    kInit = 3,
    kMinibatch = 4,
    kGradNoise = 5,
    kAttack = 6,
    kEstimator = 7,
    kInversion = 8,
    kMisc = 9,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic RNG with explicit substream derivation. Wraps mt19937_64 and
// provides the distributions used by the library (hand-rolled so that output
// is a pure function of the seed, independent of the standard library's
// distribution internals).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t master, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t s = master;
        std::uint64_t h = detail::splitmix64(s);
        s ^= static_cast<std::uint64_t>(tag) * 0x9e3779b97f4a7c15ULL;
        h ^= detail::splitmix64(s);
        s ^= (a + 1) * 0xd1342543de82ef95ULL;
        h ^= detail::splitmix64(s);
        s ^= (b + 1) * 0xaf251af3b0f025b5ULL;
        h ^= detail::splitmix64(s);
        return Rng(h);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; one value per call, spare cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return static_cast<std::size_t>(v % n);
    }

    // k distinct indices from [0, n), returned in ascending order so that
    // downstream accumulation order does not depend on the draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + index(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace safesgd
