#pragma once

#include "flexswap/simulation.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace flexswap
{
    struct SweepRow
    {
        std::string value;
        RunResult result;
        double mean_resident_bytes = 0.0;
    };

    // One run per value. `param` is either a registered policy parameter ("target_promotion_rate")
    // or a dotted config path ("workload.cold_ratio"). Runs are independent and execute on up to
    // `jobs` threads; rows keep the order of `values`.
    std::vector<SweepRow> sweep(const std::string &scenario_yaml, const std::vector<std::string> &overrides,
                                const std::string &param, const std::vector<std::string> &values, unsigned jobs = 1);

    void write_sweep_csv(std::ostream &out, const std::string &param, const std::vector<SweepRow> &rows);
} // namespace flexswap
