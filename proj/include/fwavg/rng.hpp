#pragma once

// Counter-based random number generation (Philox4x32-10).
//
// Every Monte Carlo trajectory owns an independent stream addressed by
// (experiment seed, stream index).  Draws depend only on the stream and on
// the position within it, so ensembles produce bit-identical results
// regardless of thread count or scheduling order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace fwavg {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace detail {

inline void philox_round(std::array<std::uint32_t, 4>& ctr, const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = 0xD2511F53ULL * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ULL * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

// One 128-bit Philox4x32-10 block.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        detail::philox_round(ctr, key);
        key[0] += 0x9E3779B9U;
        key[1] += 0xBB67AE85U;
    }
    return ctr;
}

// Stable sub-seed for a named experiment stage, so independent stages draw
// from disjoint stream families under one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (const char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    std::uint64_t s = master ^ h;
    return splitmix64(s);
}

class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        const std::uint64_t k = splitmix64(s);
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
        std::uint64_t t = stream ^ splitmix64(s);
        stream_tag_ = splitmix64(t);
        block_ = 0;
        lane_ = 4;
    }

    std::uint32_t next_u32() {
        if (lane_ == 4) refill();
        return buffer_[lane_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Pair of independent standard normals (Box-Muller).
    std::array<double, 2> normal_pair() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto z = normal_pair();
        spare_ = z[1];
        have_spare_ = true;
        return z[0];
    }

  private:
    void refill() {
        buffer_ = philox4x32({static_cast<std::uint32_t>(block_),
                              static_cast<std::uint32_t>(block_ >> 32),
                              static_cast<std::uint32_t>(stream_tag_),
                              static_cast<std::uint32_t>(stream_tag_ >> 32)},
                             key_);
        ++block_;
        lane_ = 0;
    }

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t stream_tag_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int lane_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace fwavg
