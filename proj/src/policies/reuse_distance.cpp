#include "flexswap/policies/reuse_distance.hpp"
#include "flexswap/policies/lru.hpp"

#include <cmath>

namespace flexswap
{
    void IpPredictor::train(std::uint64_t ip, double distance)
    {
        auto [it, inserted] = table_.try_emplace(ip, distance);
        if (!inserted)
        {
            it->second = alpha_ * distance + (1.0 - alpha_) * it->second;
        }
    }

    double IpPredictor::predict(std::uint64_t ip) const
    {
        auto it = table_.find(ip);
        return it == table_.end() ? 0.0 : it->second;
    }

    void ReuseDistanceReclaimer::attach(PolicyApi &api)
    {
        api_ = &api;
        api.on_event(PolicyEventType::PageFault,
                     [this](const PolicyEvent &ev) { on_fault(ev.fault, api_->get_pf_count()); });
        api.on_event(PolicyEventType::SwapOut, [this](const PolicyEvent &ev) { forget(ev.page); });
        api.register_parameter(
            "r_alpha", [this] { return predictor_.alpha(); }, [this](double v) { predictor_.set_alpha(v); });
    }

    void ReuseDistanceReclaimer::on_fault(const FaultEvent &ev, std::uint64_t fault_count)
    {
        if (!ev.ip)
        {
            return;
        }
        auto [it, first] = last_fault_.try_emplace(ev.page, fault_count);
        if (!first)
        {
            predictor_.train(*ev.ip, static_cast<double>(fault_count - it->second));
            it->second = fault_count;
        }
        forget(ev.page);
        const ErtEntry e{ev.page, static_cast<double>(fault_count), predictor_.predict(*ev.ip)};
        entries_.emplace(ev.page, e);
        by_key_.emplace(e.key(), ev.page);
    }

    void ReuseDistanceReclaimer::forget(PageIndex page)
    {
        auto it = entries_.find(page);
        if (it == entries_.end())
        {
            return;
        }
        by_key_.erase({it->second.key(), page});
        entries_.erase(it);
    }

    std::optional<ErtEntry> ReuseDistanceReclaimer::entry(PageIndex page) const
    {
        auto it = entries_.find(page);
        if (it == entries_.end())
        {
            return std::nullopt;
        }
        return it->second;
    }

    std::optional<PageIndex> ReuseDistanceReclaimer::ert_victim(double now,
                                                                const std::function<bool(PageIndex)> &eligible) const
    {
        // |key - now| is maximal at one of the two ends of the key order.
        std::optional<std::pair<double, PageIndex>> low;
        for (auto it = by_key_.begin(); it != by_key_.end(); ++it)
        {
            if (!eligible || eligible(it->second))
            {
                low = *it;
                break;
            }
        }
        if (!low)
        {
            return std::nullopt;
        }
        std::optional<std::pair<double, PageIndex>> high;
        for (auto it = by_key_.rbegin(); it != by_key_.rend(); ++it)
        {
            if (!eligible || eligible(it->second))
            {
                if (high && it->first != high->first)
                {
                    break;
                }
                high = *it; // keeps walking to the lowest index with the same key
            }
            else if (high && it->first != high->first)
            {
                break;
            }
        }
        const double dl = std::fabs(low->first - now);
        const double dh = std::fabs(high->first - now);
        if (dl > dh)
        {
            return low->second;
        }
        if (dh > dl)
        {
            return high->second;
        }
        return std::min(low->second, high->second);
    }

    std::optional<PageIndex> ReuseDistanceReclaimer::select_victim()
    {
        if (api_ == nullptr)
        {
            return std::nullopt;
        }
        auto eligible = [this](PageIndex p) { return api_->is_victim_candidate(p); };
        if (auto v = ert_victim(static_cast<double>(api_->get_pf_count()), eligible))
        {
            return v;
        }
        try
        {
            return lru_victim(api_->memory(), eligible);
        }
        catch (const NoVictim &)
        {
            return std::nullopt;
        }
    }
} // namespace flexswap
