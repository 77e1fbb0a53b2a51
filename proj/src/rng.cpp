#include "xfit/rng.hpp"

namespace xfit {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream RngStream::substream(std::uint64_t id) const noexcept {
    const std::uint64_t child_seed = splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
    return RngStream{child_seed, id};
}

Pcg32::Pcg32(const RngStream& s) noexcept : state_(0), inc_((s.stream << 1u) | 1u) {
    next_u32();
    state_ += s.seed;
    next_u32();
}

std::uint32_t Pcg32::next_u32() noexcept {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

std::uint64_t Pcg32::next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32u) | next_u32();
}

double Pcg32::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11u) * 0x1.0p-53;
}

// Lemire's nearly-divisionless method.
std::uint32_t Pcg32::below(std::uint32_t bound) noexcept {
    std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * bound;
    auto low = static_cast<std::uint32_t>(m);
    if (low < bound) {
        const std::uint32_t threshold = (0u - bound) % bound;
        while (low < threshold) {
            m = static_cast<std::uint64_t>(next_u32()) * bound;
            low = static_cast<std::uint32_t>(m);
        }
    }
    return static_cast<std::uint32_t>(m >> 32u);
}

}  // namespace xfit
