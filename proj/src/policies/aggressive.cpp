#include "flexswap/policies/aggressive.hpp"

#include <numeric>

namespace flexswap
{
    bool is_fault_uptick(const std::deque<double> &trailing, double last_rate, double k, double floor_rate,
                         std::size_t window)
    {
        if (trailing.size() < window || window == 0)
        {
            return false;
        }
        const double mean = std::accumulate(trailing.end() - static_cast<std::ptrdiff_t>(window), trailing.end(), 0.0) /
                            static_cast<double>(window);
        return last_rate > k * mean && last_rate > floor_rate;
    }

    void AggressiveReclaimer::attach(PolicyApi &api)
    {
        api_ = &api;
        last_count_ = api.get_pf_count();
        api.every(config_.tick, [this] { on_tick(); });
        api.register_parameter(
            "agg_k", [this] { return config_.k; }, [this](double v) { config_.k = v; });
        api.register_parameter(
            "agg_floor", [this] { return config_.floor_rate; }, [this](double v) { config_.floor_rate = v; });
        api.register_parameter(
            "agg_budget", [this] { return static_cast<double>(config_.budget); },
            [this](double v) { config_.budget = v <= 0.0 ? 0 : static_cast<std::uint64_t>(v); });
        api.register_parameter(
            "agg_scan_interval", [this] { return to_seconds(config_.scan_interval); },
            [this](double s)
            {
                config_.scan_interval = std::max<SimTime>(1, from_seconds(s));
                if (mode_ == AggressiveMode::Reclaim)
                {
                    api_->set_scan_interval(sub_, config_.scan_interval);
                }
            });
    }

    void AggressiveReclaimer::on_tick()
    {
        const std::uint64_t count = api_->get_pf_count();
        const double rate = static_cast<double>(count - last_count_) / to_seconds(config_.tick);
        last_count_ = count;
        if (mode_ == AggressiveMode::Normal &&
            is_fault_uptick(rates_, rate, config_.k, config_.floor_rate, config_.trailing))
        {
            enter_reclaim();
        }
        rates_.push_back(rate);
        while (rates_.size() > config_.trailing)
        {
            rates_.pop_front();
        }
    }

    void AggressiveReclaimer::enter_reclaim()
    {
        mode_ = AggressiveMode::Reclaim;
        ++episodes_;
        for (const auto &[stamp, page] : api_->memory().recency())
        {
            old_.insert(page);
        }
        sub_ = api_->scan_ept(config_.scan_interval, [this](const AccessBitmap &bm) { on_scan(bm); });
    }

    void AggressiveReclaimer::leave_reclaim()
    {
        mode_ = AggressiveMode::Normal;
        old_.clear();
        api_->stop_scan(sub_);
        sub_ = 0;
    }

    void AggressiveReclaimer::on_scan(const AccessBitmap &bitmap)
    {
        if (mode_ != AggressiveMode::Reclaim)
        {
            return;
        }
        const VmMemory &mem = api_->memory();
        std::uint64_t reclaimed = 0;
        for (auto it = old_.begin(); it != old_.end();)
        {
            const PageIndex p = *it;
            const PageFrame &f = mem.frame(p);
            if (bitmap.test(p) || f.desired_state != Residency::Resident)
            {
                it = old_.erase(it);
                continue;
            }
            if (reclaimed + mem.page_bytes() > config_.budget)
            {
                ++it;
                continue;
            }
            // A rejected page (locked, or faulting right now) is not old either.
            if (api_->reclaim(p))
            {
                reclaimed += mem.page_bytes();
                ++reclaims_;
            }
            it = old_.erase(it);
        }
        if (old_.empty())
        {
            leave_reclaim();
        }
    }
} // namespace flexswap
