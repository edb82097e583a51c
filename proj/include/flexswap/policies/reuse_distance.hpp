#pragma once

#include "flexswap/policy_api.hpp"

#include <cstdint>
#include <set>
#include <unordered_map>

namespace flexswap
{
    // Exponentially averaged reuse distance per instruction-pointer tag.
    class IpPredictor
    {
    public:
        explicit IpPredictor(double alpha = 0.5) : alpha_(alpha) {}

        void train(std::uint64_t ip, double distance);
        // 0 for tags never trained.
        double predict(std::uint64_t ip) const;
        bool known(std::uint64_t ip) const { return table_.contains(ip); }

        double alpha() const noexcept { return alpha_; }
        void set_alpha(double alpha) { alpha_ = alpha; }

    private:
        double alpha_;
        std::unordered_map<std::uint64_t, double> table_;
    };

    struct ErtEntry
    {
        PageIndex page;
        double entered_at;         // fault count at insertion
        double predicted_distance; // in faults
        double key() const { return entered_at + predicted_distance; }
    };

    // Victimizes the page whose estimated reuse time is furthest from now, in either direction:
    // far in the future, or long overdue. Falls back to LRU without eligible entries.
    class ReuseDistanceReclaimer final : public Policy, public LimitReclaimer
    {
    public:
        explicit ReuseDistanceReclaimer(double alpha = 0.5) : predictor_(alpha) {}

        std::string name() const override { return "reuse_distance"; }
        void attach(PolicyApi &api) override;
        std::optional<PageIndex> select_victim() override;

        void on_fault(const FaultEvent &ev, std::uint64_t fault_count);
        void forget(PageIndex page);

        // argmax |key - now| over entries passing `eligible`; ties go to the lowest index.
        std::optional<PageIndex> ert_victim(double now, const std::function<bool(PageIndex)> &eligible) const;

        const IpPredictor &predictor() const noexcept { return predictor_; }
        std::optional<ErtEntry> entry(PageIndex page) const;
        std::size_t table_size() const noexcept { return entries_.size(); }

    private:
        PolicyApi *api_ = nullptr;
        IpPredictor predictor_;
        std::unordered_map<PageIndex, std::uint64_t> last_fault_;
        std::unordered_map<PageIndex, ErtEntry> entries_;
        std::set<std::pair<double, PageIndex>> by_key_;
    };
} // namespace flexswap
