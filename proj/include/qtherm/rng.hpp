#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace qtherm {

// Philox4x32-10 (Salmon et al., SC'11). Stream i of base seed s uses key (lo(s), hi(s) ^ i_lo)
// and counter word 3 = hi(i), so streams never overlap for i < 2^64.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    Philox4x32(std::uint64_t seed, std::uint64_t stream) {
        key_[0] = static_cast<std::uint32_t>(seed);
        key_[1] = static_cast<std::uint32_t>(seed >> 32) ^ static_cast<std::uint32_t>(stream);
        ctr_ = {0, 0, static_cast<std::uint32_t>(stream >> 32), 0x51ed270bu};
    }

    std::uint32_t next_u32() {
        if (pos_ == 4) {
            buf_ = generate(ctr_, key_);
            increment();
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // 53-bit uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    static Block generate(Block ctr, std::array<std::uint32_t, 2> key) {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
            std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
            Block next{static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                       static_cast<std::uint32_t>(p1),
                       static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                       static_cast<std::uint32_t>(p0)};
            ctr = next;
            key[0] += W0;
            key[1] += W1;
        }
        return ctr;
    }

private:
    void increment() {
        if (++ctr_[0] == 0) ++ctr_[1];
    }

    std::array<std::uint32_t, 2> key_{};
    Block ctr_{};
    Block buf_{};
    int pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

using Rng = Philox4x32;

}  // namespace qtherm
