#pragma once

#include <cstdint>
#include <limits>

namespace flexswap
{
    // Simulated time in nanoseconds.
    using SimTime = std::uint64_t;

    inline constexpr SimTime kNanosecond = 1;
    inline constexpr SimTime kMicrosecond = 1'000;
    inline constexpr SimTime kMillisecond = 1'000'000;
    inline constexpr SimTime kSecond = 1'000'000'000;
    inline constexpr SimTime kNever = std::numeric_limits<SimTime>::max();

    inline constexpr double to_seconds(SimTime t) noexcept { return static_cast<double>(t) / 1e9; }

    inline constexpr SimTime from_seconds(double s) noexcept
    {
        return static_cast<SimTime>(s * 1e9 + 0.5);
    }

    inline constexpr std::uint64_t kKiB = 1024;
    inline constexpr std::uint64_t kMiB = 1024 * kKiB;
    inline constexpr std::uint64_t kGiB = 1024 * kMiB;
} // namespace flexswap
