#pragma once

#include "flexswap/policy_api.hpp"

namespace flexswap
{
    enum class PrefetchMode : std::uint8_t
    {
        Gva, // next page in the faulting guest's virtual address space
        Hva, // next host page
    };

    // Prefetches the page after each faulting page.
    class LinearPrefetcher final : public Policy
    {
    public:
        explicit LinearPrefetcher(PrefetchMode mode) : mode_(mode) {}

        std::string name() const override { return mode_ == PrefetchMode::Gva ? "linearpf_gva" : "linearpf_hva"; }
        void attach(PolicyApi &api) override;

        // The page to prefetch for `ev`, if any.
        std::optional<PageIndex> target(const FaultEvent &ev) const;
        void on_fault(const FaultEvent &ev);

        PrefetchMode mode() const noexcept { return mode_; }
        std::uint64_t issued() const noexcept { return issued_; }
        std::uint64_t accepted() const noexcept { return accepted_; }
        std::uint64_t untranslatable() const noexcept { return untranslatable_; }

    private:
        PolicyApi *api_ = nullptr;
        PrefetchMode mode_;
        std::uint64_t issued_ = 0;
        std::uint64_t accepted_ = 0;
        mutable std::uint64_t untranslatable_ = 0;
    };
} // namespace flexswap
