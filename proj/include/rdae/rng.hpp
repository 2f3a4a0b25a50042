#pragma once

#include <cstdint>

namespace rdae {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so samples can be produced in any order and
/// reproduce across platforms.
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ mix(stream + 0x6a09e667f3bcc909ULL))) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix(key_ + counter * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on the open interval (0, 1).
    constexpr double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box–Muller; draw m consumes counters 2⌊m/2⌋ and 2⌊m/2⌋+1.
    double normal(std::uint64_t m) const noexcept;

    /// Derive an independent stream for a sub-task.
    constexpr CounterRng split(std::uint64_t stream) const noexcept {
        CounterRng r(0);
        r.key_ = mix(key_ ^ mix(stream + 0xbb67ae8584caa73bULL));
        return r;
    }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
};

}  // namespace rdae
