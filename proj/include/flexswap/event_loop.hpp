#pragma once

#include "flexswap/time.hpp"

#include <cstdint>
#include <functional>
#include <queue>
#include <string_view>
#include <vector>

namespace flexswap
{
    enum class EventKind : std::uint8_t
    {
        Generic,
        FaultCompletion,
        ScanTick,
        PolicyTick,
        WorkloadAccess,
        IoCompletion,
        Notification,
        LimitChange,
        Sample,
    };

    std::string_view to_string(EventKind kind) noexcept;

    struct EventId
    {
        std::uint64_t value = 0;
        friend constexpr bool operator==(EventId, EventId) = default;
    };

    // One fired event, as recorded in the optional trace.
    struct FiredEvent
    {
        SimTime fire_at;
        std::uint64_t seq;
        EventKind kind;
        friend constexpr bool operator==(const FiredEvent &, const FiredEvent &) = default;
    };

    // Single-threaded discrete-event loop. Events fire in (fire_at, seq) order, where seq is the
    // insertion counter, so equal-time events fire in the order they were scheduled.
    class EventLoop
    {
    public:
        using Handler = std::function<void()>;

        EventLoop() = default;
        EventLoop(const EventLoop &) = delete;
        EventLoop &operator=(const EventLoop &) = delete;

        EventId schedule(SimTime delay, EventKind kind, Handler handler);
        EventId schedule_at(SimTime when, EventKind kind, Handler handler);

        // Returns false if the event already fired or was cancelled.
        bool cancel(EventId id);

        // Processes every event with fire_at <= t_end, then sets now() to t_end.
        std::size_t run_until(SimTime t_end);

        // Processes events until the queue is empty or `limit` is reached.
        std::size_t run_to_completion(SimTime limit = kNever);

        SimTime now() const noexcept { return now_; }
        bool empty() const noexcept { return live_ == 0; }
        std::size_t pending() const noexcept { return live_; }

        // Earliest time at which anything else can happen: the next queued event or the end of
        // the current run_until window, whichever comes first. Handlers use this to batch
        // work that cannot interact with other events.
        SimTime horizon() const noexcept;

        void enable_trace(bool on) { tracing_ = on; }
        // Called after every handler returns. Used by invariant checkers.
        void set_observer(std::function<void(const FiredEvent &)> observer) { observer_ = std::move(observer); }
        const std::vector<FiredEvent> &trace() const noexcept { return trace_; }

    private:
        struct Node
        {
            SimTime fire_at;
            std::uint64_t seq;
            EventKind kind;
            Handler handler;
        };
        struct Later
        {
            bool operator()(const Node &a, const Node &b) const noexcept
            {
                if (a.fire_at != b.fire_at)
                {
                    return a.fire_at > b.fire_at;
                }
                return a.seq > b.seq;
            }
        };

        bool is_done(std::uint64_t seq) const noexcept;
        void mark_done(std::uint64_t seq);
        void drop_cancelled_head();
        bool fire_next(SimTime limit);

        std::priority_queue<Node, std::vector<Node>, Later> queue_;
        std::vector<std::uint64_t> done_bits_;
        SimTime now_ = 0;
        SimTime window_end_ = kNever;
        std::uint64_t next_seq_ = 0;
        std::size_t live_ = 0;
        bool running_ = false;
        bool tracing_ = false;
        std::vector<FiredEvent> trace_;
        std::function<void(const FiredEvent &)> observer_;
    };
} // namespace flexswap
