#include "flexswap/policies/lru.hpp"

namespace flexswap
{
    PageIndex lru_victim(const VmMemory &memory, const std::function<bool(PageIndex)> &eligible)
    {
        for (const auto &[stamp, page] : memory.recency())
        {
            if (!memory.frame(page).locked && (!eligible || eligible(page)))
            {
                return page;
            }
        }
        throw NoVictim("no resident unlocked page");
    }

    void LruReclaimer::attach(PolicyApi &api)
    {
        api_ = &api;
        api.register_parameter(
            "lru_watermark", [this] { return static_cast<double>(watermark_); },
            [this](double v) { watermark_ = v <= 0.0 ? 0 : static_cast<std::uint64_t>(v); });
        api.on_event(PolicyEventType::PageFault, [this](const PolicyEvent &) { keep_watermark(); });
    }

    std::optional<PageIndex> LruReclaimer::select_victim()
    {
        if (api_ == nullptr)
        {
            return std::nullopt;
        }
        try
        {
            return lru_victim(api_->memory(), [this](PageIndex p) { return api_->is_victim_candidate(p); });
        }
        catch (const NoVictim &)
        {
            return std::nullopt;
        }
    }

    void LruReclaimer::keep_watermark()
    {
        if (watermark_ == 0)
        {
            return;
        }
        const std::uint64_t limit = api_->get_memory_limit();
        const std::uint64_t target = limit > watermark_ ? limit - watermark_ : 0;
        while (api_->get_memory_usage() > target)
        {
            const auto victim = select_victim();
            if (!victim || !api_->reclaim(*victim))
            {
                return;
            }
            ++proactive_;
        }
    }
} // namespace flexswap
