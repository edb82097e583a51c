#include "flexswap/policies/wsr.hpp"

namespace flexswap
{
    void WorkingSetRestore::attach(PolicyApi &api)
    {
        api_ = &api;
        api.on_event(PolicyEventType::MemoryLimitChange,
                     [this](const PolicyEvent &ev) { on_limit_change(ev.old_limit, ev.new_limit); });
    }

    void WorkingSetRestore::on_limit_change(std::uint64_t old_limit, std::uint64_t new_limit)
    {
        if (new_limit < old_limit)
        {
            snapshot_.clear();
            const auto &rec = api_->memory().recency();
            for (auto it = rec.rbegin(); it != rec.rend(); ++it)
            {
                snapshot_.push_back(it->second);
            }
            return;
        }
        if (new_limit == old_limit)
        {
            return;
        }
        const std::uint64_t page = api_->memory().page_bytes();
        for (const PageIndex p : snapshot_)
        {
            if (api_->get_memory_usage() + page > api_->get_memory_limit())
            {
                break;
            }
            if (api_->prefetch(p))
            {
                ++accepted_;
            }
        }
        snapshot_.clear();
    }

    void ColdRegionKeeper::attach(PolicyApi &api)
    {
        api_ = &api;
        api.on_event(PolicyEventType::SwapIn,
                     [this](const PolicyEvent &ev)
                     {
                         if (ev.page >= first_ && ev.page - first_ < count_)
                         {
                             api_->reclaim(ev.page);
                         }
                     });
    }
} // namespace flexswap
