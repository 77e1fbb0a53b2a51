#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace xfit {

/// Identifies a reproducible random stream. Streams form a tree: a master
/// seed yields per-repetition streams, which yield per-use substreams.
/// Derivation is a pure function, so parallel workers never share state.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    RngStream substream(std::uint64_t id) const noexcept;

    friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// PCG32 (XSH-RR output, 64-bit LCG state). The stream id selects the LCG
/// increment, so equal (seed, stream) pairs give identical draws everywhere.
class Pcg32 {
public:
    explicit Pcg32(const RngStream& s) noexcept;

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Unbiased integer in [0, bound).
    std::uint32_t below(std::uint32_t bound) noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

    template <class T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = below(static_cast<std::uint32_t>(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace xfit
