#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace flexswap::proptest
{
    enum class Invariant
    {
        LimitSafety,
        NoRedundantIo,
        LockSafety,
        Accounting,
        Determinism,
    };

    std::string to_string(Invariant inv);

    struct HarnessConfig
    {
        std::size_t ops = 48;
        std::uint64_t pages = 16;
        unsigned max_locks = 3;
    };

    struct SequenceResult
    {
        bool ok = true;
        bool deadlock = false;
        std::string failure;
        std::string fingerprint;
    };

    // One seeded random operation sequence on a small engine, checking `inv`.
    SequenceResult run_sequence(Invariant inv, std::uint64_t seed, const HarnessConfig &config = {});

    struct SuiteResult
    {
        std::size_t sequences = 0;
        std::size_t failures = 0;
        std::size_t deadlocks = 0;
        std::string first_failure;
        double seconds = 0.0;
    };

    SuiteResult run_suite(Invariant inv, std::size_t sequences, std::uint64_t base_seed,
                          const HarnessConfig &config = {});
} // namespace flexswap::proptest
