#pragma once

#include "flexswap/policy_api.hpp"

#include <vector>

namespace flexswap
{
    // Working-set restore: remembers the resident set when the limit drops and prefetches it,
    // most recently used first, when the limit rises again.
    class WorkingSetRestore final : public Policy
    {
    public:
        std::string name() const override { return "wsr"; }
        void attach(PolicyApi &api) override;

        void on_limit_change(std::uint64_t old_limit, std::uint64_t new_limit);

        // Snapshot pages, most recently used first.
        const std::vector<PageIndex> &snapshot() const noexcept { return snapshot_; }
        std::uint64_t prefetches_accepted() const noexcept { return accepted_; }

    private:
        PolicyApi *api_ = nullptr;
        std::vector<PageIndex> snapshot_;
        std::uint64_t accepted_ = 0;
    };

    // Benchmark helper: keeps a cold region swapped out by reclaiming each page of it as soon as
    // its fault completes.
    class ColdRegionKeeper final : public Policy
    {
    public:
        ColdRegionKeeper(PageIndex first, PageIndex count) : first_(first), count_(count) {}

        std::string name() const override { return "cold_keeper"; }
        void attach(PolicyApi &api) override;

    private:
        PolicyApi *api_ = nullptr;
        PageIndex first_;
        PageIndex count_;
    };
} // namespace flexswap
