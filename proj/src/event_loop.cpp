#include "flexswap/event_loop.hpp"

#include <stdexcept>

namespace flexswap
{
    std::string_view to_string(EventKind kind) noexcept
    {
        switch (kind)
        {
        case EventKind::Generic:
            return "generic";
        case EventKind::FaultCompletion:
            return "fault-completion";
        case EventKind::ScanTick:
            return "scan-tick";
        case EventKind::PolicyTick:
            return "policy-tick";
        case EventKind::WorkloadAccess:
            return "workload-access";
        case EventKind::IoCompletion:
            return "io-completion";
        case EventKind::Notification:
            return "notification";
        case EventKind::LimitChange:
            return "limit-change";
        case EventKind::Sample:
            return "sample";
        }
        return "unknown";
    }

    EventId EventLoop::schedule(SimTime delay, EventKind kind, Handler handler)
    {
        if (delay > kNever - now_)
        {
            throw std::overflow_error("EventLoop::schedule: fire time overflows");
        }
        return schedule_at(now_ + delay, kind, std::move(handler));
    }

    EventId EventLoop::schedule_at(SimTime when, EventKind kind, Handler handler)
    {
        if (when < now_)
        {
            throw std::invalid_argument("EventLoop::schedule_at: time is in the past");
        }
        const std::uint64_t seq = next_seq_++;
        if (seq / 64 >= done_bits_.size())
        {
            done_bits_.resize(seq / 64 + 1, 0);
        }
        queue_.push(Node{when, seq, kind, std::move(handler)});
        ++live_;
        return EventId{seq};
    }

    bool EventLoop::is_done(std::uint64_t seq) const noexcept
    {
        return (done_bits_[seq / 64] >> (seq % 64)) & 1u;
    }

    void EventLoop::mark_done(std::uint64_t seq)
    {
        done_bits_[seq / 64] |= (std::uint64_t{1} << (seq % 64));
    }

    bool EventLoop::cancel(EventId id)
    {
        if (id.value >= next_seq_ || is_done(id.value))
        {
            return false;
        }
        mark_done(id.value);
        --live_;
        return true;
    }

    void EventLoop::drop_cancelled_head()
    {
        while (!queue_.empty() && is_done(queue_.top().seq))
        {
            queue_.pop();
        }
    }

    SimTime EventLoop::horizon() const noexcept
    {
        SimTime next = window_end_;
        // The heap head may be a cancelled event; that only makes the horizon conservative.
        if (!queue_.empty() && queue_.top().fire_at < next)
        {
            next = queue_.top().fire_at;
        }
        return next;
    }

    bool EventLoop::fire_next(SimTime limit)
    {
        drop_cancelled_head();
        if (queue_.empty() || queue_.top().fire_at > limit)
        {
            return false;
        }
        // priority_queue::top is const; the node is moved out before pop.
        Node node = std::move(const_cast<Node &>(queue_.top()));
        queue_.pop();
        mark_done(node.seq);
        --live_;
        now_ = node.fire_at;
        if (tracing_)
        {
            trace_.push_back(FiredEvent{node.fire_at, node.seq, node.kind});
        }
        node.handler();
        if (observer_)
        {
            observer_(FiredEvent{node.fire_at, node.seq, node.kind});
        }
        return true;
    }

    std::size_t EventLoop::run_until(SimTime t_end)
    {
        if (running_)
        {
            throw std::logic_error("EventLoop::run_until: re-entered from a handler");
        }
        if (t_end < now_)
        {
            throw std::invalid_argument("EventLoop::run_until: t_end is before now()");
        }
        running_ = true;
        window_end_ = t_end;
        std::size_t processed = 0;
        try
        {
            while (fire_next(t_end))
            {
                ++processed;
            }
        }
        catch (...)
        {
            running_ = false;
            window_end_ = kNever;
            throw;
        }
        running_ = false;
        window_end_ = kNever;
        now_ = t_end;
        return processed;
    }

    std::size_t EventLoop::run_to_completion(SimTime limit)
    {
        if (running_)
        {
            throw std::logic_error("EventLoop::run_to_completion: re-entered from a handler");
        }
        running_ = true;
        window_end_ = limit;
        std::size_t processed = 0;
        try
        {
            while (fire_next(limit))
            {
                ++processed;
            }
        }
        catch (...)
        {
            running_ = false;
            window_end_ = kNever;
            throw;
        }
        running_ = false;
        window_end_ = kNever;
        return processed;
    }
} // namespace flexswap
