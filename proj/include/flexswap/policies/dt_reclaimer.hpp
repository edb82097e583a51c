#pragma once

#include "flexswap/policy_api.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

namespace flexswap
{
    // Counts of re-observations indexed by access distance in scan intervals.
    using DistanceHistogram = std::map<std::uint64_t, std::uint64_t>;

    // Smallest T >= 1 such that the re-observations per interval with distance >= T, relative to
    // the working set, stay within `target`. Returns `current` for an empty histogram or WSS.
    std::uint64_t propose_threshold(const DistanceHistogram &hist, double wss, double target, double intervals,
                                    std::uint64_t current);

    // Max over the most recent `window` proposals.
    std::uint64_t smooth_threshold(const std::deque<std::uint64_t> &proposals, std::size_t window = 3);

    struct DtConfig
    {
        SimTime scan_interval = 60 * kSecond;
        double target_promotion_rate = 0.02;
        std::uint64_t initial_threshold = 2;
        // Scan intervals of history feeding the histogram and the WSS estimate.
        std::size_t history = 16;
        std::size_t smoothing = 3;
    };

    // Threshold-based proactive reclaimer: pages missing from the last `threshold` bitmaps are
    // cold. The threshold follows the access-distance histogram so that roughly
    // target_promotion_rate of the working set refaults per interval.
    class DtReclaimer final : public Policy
    {
    public:
        explicit DtReclaimer(DtConfig config = {});

        std::string name() const override { return "dt"; }
        void attach(PolicyApi &api) override;

        void on_scan(const AccessBitmap &bitmap);

        std::uint64_t threshold() const noexcept { return threshold_; }
        std::uint64_t interval_index() const noexcept { return index_; }
        DistanceHistogram histogram() const;
        std::uint64_t wss_pages() const;
        const DtConfig &config() const noexcept { return config_; }
        const std::deque<std::uint64_t> &proposals() const noexcept { return proposals_; }
        std::uint64_t reclaims_requested() const noexcept { return reclaims_; }

    private:
        DtConfig config_;
        PolicyApi *api_ = nullptr;
        SubscriptionId sub_ = 0;
        std::uint64_t index_ = 0;
        std::vector<std::uint64_t> last_seen_;
        std::deque<DistanceHistogram> ring_;
        std::deque<std::uint64_t> proposals_;
        std::uint64_t threshold_;
        std::uint64_t reclaims_ = 0;
    };
} // namespace flexswap
