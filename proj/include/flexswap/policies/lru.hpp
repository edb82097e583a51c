#pragma once

#include "flexswap/policy_api.hpp"

#include <functional>

namespace flexswap
{
    // Resident page with the smallest (lru_stamp, index) that passes `eligible`. Throws NoVictim.
    PageIndex lru_victim(const VmMemory &memory, const std::function<bool(PageIndex)> &eligible);

    // Default limit reclaimer. With a non-zero watermark it also reclaims proactively after
    // faults so that usage stays `watermark` bytes below the limit, which leaves headroom for
    // prefetches.
    class LruReclaimer final : public Policy, public LimitReclaimer
    {
    public:
        explicit LruReclaimer(std::uint64_t watermark_bytes = 0) : watermark_(watermark_bytes) {}

        std::string name() const override { return "lru"; }
        void attach(PolicyApi &api) override;
        std::optional<PageIndex> select_victim() override;

        std::uint64_t watermark() const noexcept { return watermark_; }
        std::uint64_t proactive_reclaims() const noexcept { return proactive_; }

    private:
        void keep_watermark();

        PolicyApi *api_ = nullptr;
        std::uint64_t watermark_;
        std::uint64_t proactive_ = 0;
    };
} // namespace flexswap
