#include "flexswap/storage_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flexswap
{
    namespace
    {
        constexpr double kEpsilonBytes = 1e-6;
    }

    DeviceParams DeviceParams::kernel_4k()
    {
        DeviceParams p;
        p.lat_sw_4k = 6'000;
        p.io_base_4k = 70'923;
        return p;
    }

    SimTime DeviceParams::worker_overhead(PageSize ps) const noexcept
    {
        const double share = std::clamp(worker_sw_fraction, 0.0, 1.0);
        return static_cast<SimTime>(std::llround(static_cast<double>(software_overhead(ps)) * share));
    }

    DeviceModel::DeviceModel(DeviceParams params) : params_(params)
    {
        if (!(params_.bandwidth_cap > 0.0))
        {
            throw std::invalid_argument("DeviceModel: bandwidth_cap must be positive");
        }
        rate_per_ns_ = params_.bandwidth_cap / 1e9;
    }

    double DeviceModel::completion_of(const Transfer &t)
    {
        return std::max(t.bytes_done_at, static_cast<double>(t.floor_at));
    }

    // Moves the processor-sharing state forward to `to`, recording when each transfer's bytes
    // finish. Transfers whose bytes are done no longer take a share.
    void DeviceModel::advance(std::vector<Transfer> &active, double &clock, double to, double rate_per_ns)
    {
        while (clock < to)
        {
            std::size_t sharing = 0;
            double min_remaining = 0.0;
            for (const Transfer &t : active)
            {
                if (t.remaining > 0.0)
                {
                    min_remaining = sharing == 0 ? t.remaining : std::min(min_remaining, t.remaining);
                    ++sharing;
                }
            }
            if (sharing == 0)
            {
                clock = to;
                return;
            }
            const double per_transfer = rate_per_ns / static_cast<double>(sharing);
            const double finish_dt = min_remaining / per_transfer;
            const double dt = std::min(finish_dt, to - clock);
            for (Transfer &t : active)
            {
                if (t.remaining > 0.0)
                {
                    t.remaining -= per_transfer * dt;
                    if (t.remaining <= kEpsilonBytes)
                    {
                        t.remaining = 0.0;
                        t.bytes_done_at = clock + dt;
                    }
                }
            }
            clock += dt;
        }
    }

    TransferId DeviceModel::start(SimTime at, PageSize ps, IoDirection dir)
    {
        return start_bytes(at, bytes_of(ps), params_.service_floor(ps), dir);
    }

    TransferId DeviceModel::start_bytes(SimTime at, std::uint64_t bytes, SimTime floor, IoDirection dir)
    {
        if (static_cast<double>(at) < clock_exact_ - 0.5)
        {
            throw std::invalid_argument("DeviceModel::start: transfer starts before device time");
        }
        advance(active_, clock_exact_, static_cast<double>(at), rate_per_ns_);
        clock_ = at;
        const TransferId id = next_id_++;
        active_.push_back(Transfer{id, bytes, dir, static_cast<double>(bytes), at + floor, 0.0});
        return id;
    }

    SimTime DeviceModel::projected_completion(TransferId id) const
    {
        auto it = std::find_if(active_.begin(), active_.end(), [id](const Transfer &t) { return t.id == id; });
        if (it == active_.end())
        {
            throw std::invalid_argument("DeviceModel::projected_completion: unknown transfer");
        }
        std::vector<Transfer> copy = active_;
        double clock = clock_exact_;
        const std::size_t index = static_cast<std::size_t>(it - active_.begin());
        // Each round frees at least one transfer's share, so this terminates.
        while (copy[index].remaining > 0.0)
        {
            advance(copy, clock, clock + 1e12, rate_per_ns_);
        }
        return static_cast<SimTime>(std::ceil(completion_of(copy[index]) - 1e-6));
    }

    std::optional<SimTime> DeviceModel::next_completion() const
    {
        if (active_.empty())
        {
            return std::nullopt;
        }
        std::optional<SimTime> best;
        for (const Transfer &t : active_)
        {
            const SimTime c = projected_completion(t.id);
            if (!best || c < *best)
            {
                best = c;
            }
        }
        return best;
    }

    std::vector<CompletedTransfer> DeviceModel::complete_until(SimTime now)
    {
        std::vector<CompletedTransfer> done;
        if (static_cast<double>(now) > clock_exact_)
        {
            advance(active_, clock_exact_, static_cast<double>(now), rate_per_ns_);
            clock_ = now;
        }
        for (auto it = active_.begin(); it != active_.end();)
        {
            if (it->remaining <= 0.0)
            {
                const SimTime c = static_cast<SimTime>(std::ceil(completion_of(*it) - 1e-6));
                if (c <= now)
                {
                    done.push_back(CompletedTransfer{it->id, c, it->bytes, it->dir});
                    bytes_completed_ += it->bytes;
                    ++ops_completed_;
                    it = active_.erase(it);
                    continue;
                }
            }
            ++it;
        }
        std::sort(done.begin(), done.end(),
                  [](const CompletedTransfer &a, const CompletedTransfer &b)
                  { return a.completion != b.completion ? a.completion < b.completion : a.id < b.id; });
        return done;
    }

    SimTime DeviceModel::submit_io(PageSize ps, IoDirection dir, SimTime t)
    {
        const TransferId id = start(t + params_.software_overhead(ps), ps, dir);
        return projected_completion(id);
    }

    SimTime DeviceModel::isolated_latency(PageSize ps) const
    {
        const double transfer_ns = static_cast<double>(bytes_of(ps)) / rate_per_ns_;
        const SimTime service = std::max(params_.service_floor(ps), static_cast<SimTime>(std::ceil(transfer_ns)));
        return params_.software_overhead(ps) + service;
    }

    ZeroPagePool::ZeroPagePool(ZeroPagePoolConfig config) : config_(config), available_(config.capacity) {}

    SimTime ZeroPagePool::take_zero_page()
    {
        if (available_ > 0)
        {
            --available_;
            return 0;
        }
        return config_.zero_cost;
    }

    void ZeroPagePool::refill_idle(SimTime idle_span)
    {
        const auto added = static_cast<std::uint64_t>(std::floor(to_seconds(idle_span) * config_.refill_rate + 1e-9));
        available_ = std::min(config_.capacity, available_ + added);
    }

    void ZeroPagePool::set_available(std::uint64_t n) { available_ = std::min(n, config_.capacity); }
} // namespace flexswap
