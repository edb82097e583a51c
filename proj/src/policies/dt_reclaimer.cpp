#include "flexswap/policies/dt_reclaimer.hpp"

#include <algorithm>

namespace flexswap
{
    std::uint64_t propose_threshold(const DistanceHistogram &hist, double wss, double target, double intervals,
                                    std::uint64_t current)
    {
        if (hist.empty() || wss <= 0.0 || intervals <= 0.0)
        {
            return current;
        }
        // mass[d] for d descending: re-observations with distance >= d.
        std::uint64_t total = 0;
        for (const auto &kv : hist)
        {
            total += kv.second;
        }
        std::uint64_t at_least = total;
        std::uint64_t t = 1;
        auto it = hist.begin();
        while (true)
        {
            while (it != hist.end() && it->first < t)
            {
                at_least -= it->second;
                ++it;
            }
            if (static_cast<double>(at_least) / intervals / wss <= target)
            {
                return t;
            }
            if (it == hist.end())
            {
                return t;
            }
            // Jump to the next distance that changes the mass.
            t = it->first == t ? t + 1 : it->first;
        }
    }

    std::uint64_t smooth_threshold(const std::deque<std::uint64_t> &proposals, std::size_t window)
    {
        std::uint64_t best = 1;
        std::size_t n = 0;
        for (auto it = proposals.rbegin(); it != proposals.rend() && n < window; ++it, ++n)
        {
            best = std::max(best, *it);
        }
        return best;
    }

    DtReclaimer::DtReclaimer(DtConfig config) : config_(config), threshold_(std::max<std::uint64_t>(1, config.initial_threshold))
    {
        if (config_.history == 0 || config_.smoothing == 0)
        {
            throw std::invalid_argument("DtReclaimer: history and smoothing must be >= 1");
        }
    }

    void DtReclaimer::attach(PolicyApi &api)
    {
        api_ = &api;
        last_seen_.assign(api.memory().page_count(), 0);
        sub_ = api.scan_ept(config_.scan_interval, [this](const AccessBitmap &bm) { on_scan(bm); });
        api.register_parameter(
            "scan_interval", [this] { return to_seconds(config_.scan_interval); },
            [this](double seconds)
            {
                config_.scan_interval = std::max<SimTime>(1, from_seconds(seconds));
                api_->set_scan_interval(sub_, config_.scan_interval);
            });
        api.register_parameter(
            "target_promotion_rate", [this] { return config_.target_promotion_rate; },
            [this](double v) { config_.target_promotion_rate = v; });
    }

    DistanceHistogram DtReclaimer::histogram() const
    {
        DistanceHistogram sum;
        for (const auto &h : ring_)
        {
            for (const auto &kv : h)
            {
                sum[kv.first] += kv.second;
            }
        }
        return sum;
    }

    std::uint64_t DtReclaimer::wss_pages() const
    {
        const std::uint64_t oldest = index_ >= config_.history ? index_ - config_.history + 1 : 1;
        return static_cast<std::uint64_t>(
            std::count_if(last_seen_.begin(), last_seen_.end(), [oldest](std::uint64_t s) { return s >= oldest; }));
    }

    void DtReclaimer::on_scan(const AccessBitmap &bitmap)
    {
        ++index_;
        DistanceHistogram current;
        for (PageIndex p = 0; p < last_seen_.size(); ++p)
        {
            if (!bitmap.test(p))
            {
                continue;
            }
            if (last_seen_[p] != 0)
            {
                ++current[index_ - last_seen_[p]];
            }
            last_seen_[p] = index_;
        }
        ring_.push_back(std::move(current));
        while (ring_.size() > config_.history)
        {
            ring_.pop_front();
        }

        const DistanceHistogram hist = histogram();
        const std::uint64_t proposal = propose_threshold(hist, static_cast<double>(wss_pages()),
                                                         config_.target_promotion_rate,
                                                         static_cast<double>(ring_.size()), threshold_);
        proposals_.push_back(proposal);
        while (proposals_.size() > config_.smoothing)
        {
            proposals_.pop_front();
        }
        threshold_ = smooth_threshold(proposals_, config_.smoothing);

        const VmMemory &mem = api_->memory();
        for (PageIndex p = 0; p < last_seen_.size(); ++p)
        {
            // Cold: absent from bitmaps index_-threshold_+1 .. index_.
            if (last_seen_[p] + threshold_ > index_)
            {
                continue;
            }
            const PageFrame &f = mem.frame(p);
            if (f.state != Residency::Resident || f.desired_state != Residency::Resident)
            {
                continue;
            }
            if (api_->reclaim(p))
            {
                ++reclaims_;
            }
        }
    }
} // namespace flexswap
