#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace naive_mv {

/// Philox4x32-10 (Salmon, Moraes, Dror, Shaw; SC'11), the counter-based
/// generator of Random123. A pure function of (counter, key): any element of
/// any stream can be produced without generating its predecessors, so path p
/// of a simulation is independent of which thread produces it.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    static constexpr int kRounds = 10;

    static constexpr Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < kRounds; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }
};

/// Standard normal stream for one Monte Carlo path.
///
/// Element i of stream (seed, path) comes from Philox block i/2 with counter
/// {i/2 low, i/2 high, path low, path high} and key {seed low, seed high}; the
/// block's two 53-bit uniforms feed one Box-Muller pair, lane i%2 picks cos/sin.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, path_(path) {}

    /// Fills out[j] with element first + j of the stream.
    void fill(std::uint64_t first, std::span<double> out) const {
        std::size_t j = 0;
        std::uint64_t i = first;
        if (i % 2 == 1 && j < out.size()) {
            out[j++] = pair(i / 2)[1];
            ++i;
        }
        for (; j + 1 < out.size(); j += 2, i += 2) {
            const auto z = pair(i / 2);
            out[j] = z[0];
            out[j + 1] = z[1];
        }
        if (j < out.size()) out[j] = pair(i / 2)[0];
    }

    std::array<double, 2> pair(std::uint64_t block) const {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                                      static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)};
        const auto x = Philox4x32::generate(ctr, key_);
        const std::uint64_t a = (std::uint64_t{x[0]} << 32) | x[1];
        const std::uint64_t b = (std::uint64_t{x[2]} << 32) | x[3];
        constexpr double kUnit = 0x1.0p-53;
        const double u1 = static_cast<double>((a >> 11) + 1) * kUnit; // (0, 1]
        const double u2 = static_cast<double>(b >> 11) * kUnit;       // [0, 1)
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

private:
    Philox4x32::Key key_;
    std::uint64_t path_;
};

} // namespace naive_mv
