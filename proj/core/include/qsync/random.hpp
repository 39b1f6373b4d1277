#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so streams can be split by seed, pixel or step without any
// shared generator state.

#include <array>
#include <cstdint>
#include <utility>

namespace qsync {

/// Philox4x32 with 10 rounds (Salmon et al. constants).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    [[nodiscard]] static Counter block(Counter ctr, Key key) noexcept;
};

/// Stream keyed by a 64-bit seed and a 64-bit stream id; the counter walks
/// through 128-bit positions, four 32-bit words per position.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

    /// Words at position `pos` (no internal state is touched).
    [[nodiscard]] Philox4x32::Counter at(std::uint64_t pos) const noexcept;

    /// Two independent uniforms in (0, 1) at position `pos`, 53-bit resolution.
    [[nodiscard]] std::pair<double, double> uniform2(std::uint64_t pos) const noexcept;
    /// Two independent standard normals at position `pos` (Box–Muller).
    [[nodiscard]] std::pair<double, double> normal2(std::uint64_t pos) const noexcept;

private:
    Philox4x32::Key key_;
    std::uint64_t stream_;
};

}  // namespace qsync
