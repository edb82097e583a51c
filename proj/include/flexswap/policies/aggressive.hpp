#pragma once

#include "flexswap/policy_api.hpp"

#include <cstdint>
#include <deque>
#include <set>

namespace flexswap
{
    struct AggressiveConfig
    {
        SimTime tick = kSecond;
        SimTime scan_interval = kSecond;
        double k = 5.0;               // uptick factor over the trailing mean
        double floor_rate = 100.0;    // faults per second
        std::size_t trailing = 30;    // ticks in the trailing window
        std::uint64_t budget = 2 * kGiB; // bytes reclaimed per scan in reclaim mode
    };

    enum class AggressiveMode : std::uint8_t
    {
        Normal,
        Reclaim,
    };

    // True when the last tick's fault rate is an uptick: above k times the trailing mean and
    // above the absolute floor. Needs a full trailing window.
    bool is_fault_uptick(const std::deque<double> &trailing, double last_rate, double k, double floor_rate,
                         std::size_t window);

    // Detects a phase change from a fault-rate uptick, then treats every page resident at that
    // moment as old and reclaims old pages not accessed since, at a fast scan cadence.
    class AggressiveReclaimer final : public Policy
    {
    public:
        explicit AggressiveReclaimer(AggressiveConfig config = {}) : config_(config) {}

        std::string name() const override { return "aggressive"; }
        void attach(PolicyApi &api) override;

        void on_tick();
        void on_scan(const AccessBitmap &bitmap);

        AggressiveMode mode() const noexcept { return mode_; }
        std::size_t old_pages() const noexcept { return old_.size(); }
        std::uint64_t episodes() const noexcept { return episodes_; }
        std::uint64_t reclaims_requested() const noexcept { return reclaims_; }
        const AggressiveConfig &config() const noexcept { return config_; }

    private:
        void enter_reclaim();
        void leave_reclaim();

        AggressiveConfig config_;
        PolicyApi *api_ = nullptr;
        AggressiveMode mode_ = AggressiveMode::Normal;
        std::set<PageIndex> old_;
        std::deque<double> rates_;
        std::uint64_t last_count_ = 0;
        SubscriptionId sub_ = 0;
        std::uint64_t episodes_ = 0;
        std::uint64_t reclaims_ = 0;
    };
} // namespace flexswap
