#pragma once

// Counter-based RNG (Philox4x32-10, Salmon et al., SC 2011).  Every random
// draw in the project is a pure function of (seed, purpose, index, position
// within the stream), so sampling is reproducible for any degree of
// parallelism and common-random-number studies can replay draws exactly.

#include <cmath>
#include <cstdint>

namespace vpsim {

namespace detail {

constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;

inline void philox_round(std::uint32_t ctr[4], const std::uint32_t key[2]) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr[0] = hi1 ^ ctr[1] ^ key[0];
    ctr[1] = lo1;
    ctr[2] = hi0 ^ ctr[3] ^ key[1];
    ctr[3] = lo0;
}

inline void philox4x32_10(std::uint32_t ctr[4], std::uint32_t k0, std::uint32_t k1) {
    std::uint32_t key[2] = {k0, k1};
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        philox_round(ctr, key);
    }
}

}  // namespace detail

// Stream purposes; part of the counter so streams never collide.
enum class RngPurpose : std::uint32_t {
    sample = 1,       // ensemble sampling (one stream per particle index)
    oracle_mc = 2,    // Monte Carlo oracle draws
    scratch = 3,      // tests and ad-hoc draws
};

class RngStream {
  public:
    RngStream(std::uint64_t seed, RngPurpose purpose, std::uint64_t index)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          purpose_(static_cast<std::uint32_t>(purpose)),
          index_(index) {}

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as input to log() and inverse CDFs.
    double next_double_pos() { return 1.0 - next_double(); }

    // Standard normal via Box-Muller; generates in pairs.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_double_pos();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    void refill() {
        buf_[0] = purpose_;
        buf_[1] = static_cast<std::uint32_t>(index_);
        buf_[2] = static_cast<std::uint32_t>(index_ >> 32);
        buf_[3] = block_++;
        detail::philox4x32_10(buf_, key0_, key1_);
        pos_ = 0;
    }

    std::uint32_t key0_, key1_, purpose_;
    std::uint64_t index_;
    std::uint32_t block_ = 0;
    std::uint32_t buf_[4] = {};
    int pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace vpsim
