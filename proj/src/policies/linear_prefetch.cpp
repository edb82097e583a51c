#include "flexswap/policies/linear_prefetch.hpp"

namespace flexswap
{
    void LinearPrefetcher::attach(PolicyApi &api)
    {
        api_ = &api;
        api.on_event(PolicyEventType::PageFault, [this](const PolicyEvent &ev) { on_fault(ev.fault); });
    }

    std::optional<PageIndex> LinearPrefetcher::target(const FaultEvent &ev) const
    {
        const VmMemory &mem = api_->memory();
        if (mode_ == PrefetchMode::Hva)
        {
            if (ev.page + 1 >= mem.page_count())
            {
                return std::nullopt;
            }
            return ev.page + 1;
        }
        if (!ev.gva)
        {
            return std::nullopt;
        }
        const Gva next{ev.gva->value + mem.page_bytes()};
        const auto hva = api_->gva_to_hva(next, ev.ctx);
        if (!hva)
        {
            ++untranslatable_;
            return std::nullopt;
        }
        const PageIndex page = mem.page_of(*hva);
        if (page >= mem.page_count())
        {
            return std::nullopt;
        }
        return page;
    }

    void LinearPrefetcher::on_fault(const FaultEvent &ev)
    {
        const auto page = target(ev);
        if (!page)
        {
            return;
        }
        ++issued_;
        const SimTime walk = mode_ == PrefetchMode::Gva ? api_->walk_latency() : 0;
        if (walk == 0)
        {
            accepted_ += api_->prefetch(*page) ? 1 : 0;
            return;
        }
        api_->after(walk, [this, p = *page] { accepted_ += api_->prefetch(p) ? 1 : 0; });
    }
} // namespace flexswap
