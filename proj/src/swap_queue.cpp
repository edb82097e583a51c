#include "flexswap/swap_queue.hpp"

#include <algorithm>
#include <stdexcept>

namespace flexswap
{
    SwapQueue::SwapQueue(Order order) : order_(order)
    {
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        {
            throw std::invalid_argument("SwapQueue: priority order must name each class once");
        }
    }

    int SwapQueue::rank(QueueClass cls) const
    {
        for (std::size_t i = 0; i < order_.size(); ++i)
        {
            if (order_[i] == cls)
            {
                return static_cast<int>(i);
            }
        }
        return static_cast<int>(order_.size());
    }

    std::size_t SwapQueue::lane_of(QueueClass cls, bool forced) const
    {
        if (forced)
        {
            return 0;
        }
        return 1 + static_cast<std::size_t>(rank(cls));
    }

    bool SwapQueue::push(PageIndex page, QueueClass cls, bool forced)
    {
        const std::size_t lane = lane_of(cls, forced);
        auto found = index_.find(page);
        if (found != index_.end())
        {
            Slot &slot = found->second;
            if (lane < slot.lane)
            {
                lanes_[slot.lane].erase(slot.it);
                lanes_[lane].push_back(page);
                slot = Slot{lane, cls, forced, std::prev(lanes_[lane].end())};
            }
            return false;
        }
        lanes_[lane].push_back(page);
        index_.emplace(page, Slot{lane, cls, forced, std::prev(lanes_[lane].end())});
        return true;
    }

    std::optional<QueueEntry> SwapQueue::pop(const std::function<bool(PageIndex)> &eligible)
    {
        for (auto &lane : lanes_)
        {
            for (auto it = lane.begin(); it != lane.end(); ++it)
            {
                const PageIndex page = *it;
                if (eligible && !eligible(page))
                {
                    continue;
                }
                const Slot slot = index_.at(page);
                lane.erase(it);
                index_.erase(page);
                return QueueEntry{page, slot.cls, slot.forced};
            }
        }
        return std::nullopt;
    }

    std::optional<QueueClass> SwapQueue::class_of(PageIndex page) const
    {
        auto it = index_.find(page);
        if (it == index_.end())
        {
            return std::nullopt;
        }
        return it->second.cls;
    }

    bool SwapQueue::erase(PageIndex page)
    {
        auto it = index_.find(page);
        if (it == index_.end())
        {
            return false;
        }
        lanes_[it->second.lane].erase(it->second.it);
        index_.erase(it);
        return true;
    }

    std::optional<PageIndex> SwapQueue::find_first(QueueClass cls, const std::function<bool(PageIndex)> &pred) const
    {
        for (const auto &lane : lanes_)
        {
            for (const PageIndex page : lane)
            {
                const Slot &slot = index_.at(page);
                if (slot.cls == cls && !slot.forced && pred(page))
                {
                    return page;
                }
            }
        }
        return std::nullopt;
    }

    std::size_t SwapQueue::size_of(QueueClass cls) const
    {
        return static_cast<std::size_t>(
            std::count_if(index_.begin(), index_.end(), [cls](const auto &kv) { return kv.second.cls == cls; }));
    }
} // namespace flexswap
