#pragma once

#include "flexswap/vm_memory.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <list>
#include <optional>
#include <unordered_map>

namespace flexswap
{
    enum class QueueClass : std::uint8_t
    {
        Fault,
        Reclaim,
        Prefetch,
    };

    struct QueueEntry
    {
        PageIndex page;
        QueueClass cls;
        bool forced;
    };

    // Holds page indications only, never operations: the worker reads the page's desired state
    // at dequeue time. At most one entry per page. Forced reclaim entries, which make room for
    // a fault that is being admitted, are served ahead of every class.
    class SwapQueue
    {
    public:
        using Order = std::array<QueueClass, 3>;
        static constexpr Order kDefaultOrder{QueueClass::Fault, QueueClass::Reclaim, QueueClass::Prefetch};

        explicit SwapQueue(Order order = kDefaultOrder);

        // Enqueues `page`, or moves an existing entry to a higher-priority class. Returns true
        // if a new entry was created.
        bool push(PageIndex page, QueueClass cls, bool forced = false);

        // Removes and returns the highest-priority entry whose page passes `eligible`.
        std::optional<QueueEntry> pop(const std::function<bool(PageIndex)> &eligible);

        bool contains(PageIndex page) const { return index_.contains(page); }
        std::optional<QueueClass> class_of(PageIndex page) const;
        bool erase(PageIndex page);
        // First entry of class `cls`, in service order, whose page passes `pred`.
        std::optional<PageIndex> find_first(QueueClass cls, const std::function<bool(PageIndex)> &pred) const;

        std::size_t size() const noexcept { return index_.size(); }
        bool empty() const noexcept { return index_.empty(); }
        std::size_t size_of(QueueClass cls) const;
        const Order &order() const noexcept { return order_; }

    private:
        // Lane 0 holds forced reclaims; lanes 1..3 follow `order_`.
        std::size_t lane_of(QueueClass cls, bool forced) const;
        int rank(QueueClass cls) const;

        struct Slot
        {
            std::size_t lane;
            QueueClass cls;
            bool forced;
            std::list<PageIndex>::iterator it;
        };

        Order order_;
        std::array<std::list<PageIndex>, 4> lanes_;
        std::unordered_map<PageIndex, Slot> index_;
    };
} // namespace flexswap
