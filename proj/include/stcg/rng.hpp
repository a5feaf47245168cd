#pragma once

// Seeded xoshiro256** generator with a documented stream-splitting rule.
//
// Stream rule: the state of stream `s` under master seed `seed` is filled by
// four successive splitmix64 outputs started from seed ^ (s * 0x9E3779B97F4A7C15).
// Every experiment derives all randomness from (seed, stream id) pairs, so a
// single master seed reproduces a whole run.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace stcg {

std::uint64_t splitmix64(std::uint64_t& state);

class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [lo, hi] (inclusive).
    int uniform_int(int lo, int hi);
    /// Standard normal via Box-Muller (cached second value).
    double normal();
    double normal(double mean, double stddev);
    bool bernoulli(double p);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Child stream, independent of this generator's position.
    [[nodiscard]] static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(seed, stream_id);
    }

  private:
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Well-known stream ids so independent subsystems never share draws.
namespace streams {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kNoise = 5;
inline constexpr std::uint64_t kProbe = 6;
inline constexpr std::uint64_t kService = 7;
} // namespace streams

} // namespace stcg
