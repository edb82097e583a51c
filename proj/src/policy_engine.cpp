#include "flexswap/policy_engine.hpp"

#include <algorithm>
#include <utility>

namespace flexswap
{
    void ParameterRegistry::add(const std::string &name, ParamRead read, ParamWrite write)
    {
        if (entries_.contains(name))
        {
            throw DuplicateName("parameter already registered: " + name);
        }
        entries_.emplace(name, Entry{std::move(read), std::move(write)});
    }

    double ParameterRegistry::get(const std::string &name) const
    {
        auto it = entries_.find(name);
        if (it == entries_.end())
        {
            throw std::out_of_range("unknown parameter: " + name);
        }
        return it->second.read();
    }

    void ParameterRegistry::set(const std::string &name, double value)
    {
        auto it = entries_.find(name);
        if (it == entries_.end())
        {
            throw std::out_of_range("unknown parameter: " + name);
        }
        it->second.write(value);
    }

    std::vector<std::string> ParameterRegistry::names() const
    {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto &kv : entries_)
        {
            out.push_back(kv.first);
        }
        return out;
    }

    PolicyEngine::PolicyEngine(EventLoop &loop, VmMemory &memory, const AddressSpace &space, DeviceModel &device,
                               ZeroPagePool &zero_pool, EngineConfig config)
        : loop_(loop), memory_(memory), space_(space), device_(device), zero_pool_(zero_pool), config_(config),
          limit_(config.memory_limit), queue_(config.priority), inflight_(memory.page_count(), false),
          populated_before_(memory.page_count(), false)
    {
        if (config_.workers == 0)
        {
            throw std::invalid_argument("PolicyEngine: at least one worker is required");
        }
        sync_initial_state();
    }

    PolicyEngine::~PolicyEngine() = default;

    void PolicyEngine::sync_initial_state()
    {
        usage_ = 0;
        for (PageIndex p = 0; p < memory_.page_count(); ++p)
        {
            const PageFrame &f = memory_.frame(p);
            memory_.set_desired(p, f.state);
            if (f.state == Residency::Resident)
            {
                usage_ += page_bytes();
            }
            populated_before_[p] = f.state == Residency::Resident || f.backed;
        }
    }

    void PolicyEngine::register_policy(std::shared_ptr<Policy> policy)
    {
        for (const auto &existing : policies_)
        {
            if (existing->name() == policy->name())
            {
                throw DuplicateName("policy already registered: " + policy->name());
            }
        }
        policies_.push_back(policy);
        policy->attach(*this);
    }

    std::uint64_t PolicyEngine::recount_usage() const
    {
        std::uint64_t n = 0;
        for (PageIndex p = 0; p < memory_.page_count(); ++p)
        {
            if (memory_.frame(p).desired_state == Residency::Resident)
            {
                ++n;
            }
        }
        return n * page_bytes();
    }

    bool PolicyEngine::has_waiters(PageIndex page) const
    {
        auto it = waiters_.find(page);
        return it != waiters_.end() && !it->second.empty();
    }

    bool PolicyEngine::is_victim_candidate(PageIndex page) const
    {
        if (page >= memory_.page_count())
        {
            return false;
        }
        const PageFrame &f = memory_.frame(page);
        return f.state == Residency::Resident && f.desired_state == Residency::Resident && !f.locked &&
               !inflight_[page] && !has_waiters(page);
    }

    bool PolicyEngine::all_pinned() const
    {
        for (PageIndex p = 0; p < memory_.page_count(); ++p)
        {
            const PageFrame &f = memory_.frame(p);
            if (f.desired_state == Residency::Resident && !f.locked)
            {
                return false;
            }
        }
        return true;
    }

    void PolicyEngine::mark_desired(PageIndex page, Residency desired)
    {
        const PageFrame &f = memory_.frame(page);
        if (f.desired_state == desired)
        {
            return;
        }
        memory_.set_desired(page, desired);
        if (desired == Residency::Resident)
        {
            usage_ += page_bytes();
        }
        else
        {
            usage_ -= page_bytes();
        }
    }

    void PolicyEngine::notify(const PolicyEvent &ev)
    {
        auto it = subscribers_.find(ev.type);
        if (it == subscribers_.end())
        {
            return;
        }
        for (const EventCallback &cb : it->second)
        {
            loop_.schedule(0, EventKind::Notification, [cb, ev] { cb(ev); });
        }
    }

    // Fault admission

    void PolicyEngine::submit_fault(const FaultEvent &ev, std::function<void()> resume)
    {
        const SimTime delay = device_.params().delivery_overhead(memory_.page_size());
        loop_.schedule(delay, EventKind::FaultCompletion,
                       [this, ev, resume = std::move(resume)]() mutable { admit(ev, std::move(resume), true); });
    }

    void PolicyEngine::admit(const FaultEvent &ev, std::function<void()> resume, bool counted)
    {
        const PageIndex page = ev.page;
        const PageFrame &f = memory_.frame(page);
        const bool hit = f.state == Residency::Resident && f.mapped;
        if (counted)
        {
            ++stats_.faults;
            if (f.state == Residency::Resident)
            {
                ++stats_.minor_faults;
            }
            else
            {
                ++stats_.major_faults;
                if (populated_before_[page])
                {
                    ++stats_.refaults;
                }
                else
                {
                    ++stats_.first_touch_faults;
                }
            }
            PolicyEvent pe;
            pe.type = PolicyEventType::PageFault;
            pe.time = loop_.now();
            pe.page = page;
            pe.fault = ev;
            pe.fault.minor = f.state == Residency::Resident;
            notify(pe);
        }

        if (f.desired_state != Residency::Resident && !try_admit(page))
        {
            waiters_[page].push_back(std::move(resume));
            deferred_.push_back(page);
            ++stats_.deferred_admissions;
            if (all_pinned())
            {
                throw DeadlockDetected("fault on page " + std::to_string(page) +
                                       " cannot be admitted: every resident page is locked");
            }
            return;
        }
        if (hit)
        {
            resume();
            return;
        }
        waiters_[page].push_back(std::move(resume));
        // An in-flight swap-in wakes every waiter when it lands.
        if (!inflight_[page])
        {
            queue_.push(page, QueueClass::Fault);
            pump();
        }
    }

    bool PolicyEngine::try_admit(PageIndex page)
    {
        while (usage_ + page_bytes() > limit_)
        {
            if (!forced_reclaim_one() && !cancel_one_prefetch())
            {
                return false;
            }
        }
        mark_desired(page, Residency::Resident);
        return true;
    }

    std::optional<PageIndex> PolicyEngine::pick_victim()
    {
        if (reclaimer_ != nullptr)
        {
            const auto v = reclaimer_->select_victim();
            if (v && is_victim_candidate(*v))
            {
                return v;
            }
        }
        for (const auto &entry : memory_.recency())
        {
            if (is_victim_candidate(entry.second))
            {
                return entry.second;
            }
        }
        return std::nullopt;
    }

    bool PolicyEngine::forced_reclaim_one()
    {
        const auto victim = pick_victim();
        if (!victim)
        {
            return false;
        }
        mark_desired(*victim, Residency::SwappedOut);
        queue_.push(*victim, QueueClass::Reclaim, true);
        ++stats_.forced_reclaims;
        return true;
    }

    bool PolicyEngine::cancel_one_prefetch()
    {
        const auto page = queue_.find_first(QueueClass::Prefetch,
                                            [this](PageIndex p)
                                            {
                                                const PageFrame &f = memory_.frame(p);
                                                return f.desired_state == Residency::Resident &&
                                                       f.state == Residency::SwappedOut && !inflight_[p] &&
                                                       !has_waiters(p) && !f.locked;
                                            });
        if (!page)
        {
            return false;
        }
        mark_desired(*page, Residency::SwappedOut);
        return true;
    }

    void PolicyEngine::retry_deferred()
    {
        while (!deferred_.empty())
        {
            const PageIndex page = deferred_.front();
            if (memory_.frame(page).desired_state != Residency::Resident && !try_admit(page))
            {
                break;
            }
            deferred_.pop_front();
            queue_.push(page, QueueClass::Fault);
        }
        pump();
    }

    void PolicyEngine::enforce_limit()
    {
        limit_debt_ = false;
        while (usage_ > limit_)
        {
            if (const auto victim = pick_victim())
            {
                mark_desired(*victim, Residency::SwappedOut);
                queue_.push(*victim, QueueClass::Reclaim);
                continue;
            }
            if (cancel_one_prefetch())
            {
                continue;
            }
            if (all_pinned())
            {
                throw DeadlockDetected("memory limit " + std::to_string(limit_) +
                                       " cannot be met: remaining pages are locked");
            }
            // Pages still being swapped in become victims once they land.
            limit_debt_ = true;
            break;
        }
        pump();
    }

    void PolicyEngine::set_memory_limit(std::uint64_t bytes)
    {
        const std::uint64_t old = limit_;
        limit_ = bytes;
        PolicyEvent pe;
        pe.type = PolicyEventType::MemoryLimitChange;
        pe.time = loop_.now();
        pe.old_limit = old;
        pe.new_limit = bytes;
        notify(pe);
        if (usage_ > limit_)
        {
            // Runs after the notifications above, so policies observe the pre-reclaim state.
            loop_.schedule(0, EventKind::LimitChange, [this] { enforce_limit(); });
        }
        else
        {
            retry_deferred();
        }
    }

    // Locking

    void PolicyEngine::lock_page(PageIndex page, std::function<void()> on_locked)
    {
        memory_.lock(page);
        const PageFrame &f = memory_.frame(page);
        if (f.state == Residency::Resident && f.mapped)
        {
            if (f.desired_state == Residency::Resident)
            {
                on_locked();
                return;
            }
            // Pending reclaim: take the page back without an access fault.
            FaultEvent ev;
            ev.page = page;
            ev.time = loop_.now();
            ev.minor = true;
            admit(ev, std::move(on_locked), false);
            return;
        }
        FaultEvent ev;
        ev.page = page;
        ev.time = loop_.now();
        ev.minor = f.state == Residency::Resident;
        submit_fault(ev, std::move(on_locked));
    }

    void PolicyEngine::unlock_page(PageIndex page)
    {
        memory_.unlock(page);
        retry_deferred();
        if (limit_debt_)
        {
            enforce_limit();
        }
    }

    // Policy requests

    bool PolicyEngine::reclaim(PageIndex page)
    {
        ++stats_.reclaim_requests;
        if (page >= memory_.page_count())
        {
            return false;
        }
        const PageFrame &f = memory_.frame(page);
        if (f.desired_state != Residency::Resident || f.locked || has_waiters(page))
        {
            return false;
        }
        mark_desired(page, Residency::SwappedOut);
        queue_.push(page, QueueClass::Reclaim);
        ++stats_.reclaim_accepted;
        pump();
        return true;
    }

    bool PolicyEngine::prefetch(PageIndex page)
    {
        ++stats_.prefetch_requests;
        if (page >= memory_.page_count())
        {
            return false;
        }
        const PageFrame &f = memory_.frame(page);
        if (f.state == Residency::Resident || f.desired_state == Residency::Resident)
        {
            return false;
        }
        if (usage_ + page_bytes() > limit_)
        {
            return false;
        }
        mark_desired(page, Residency::Resident);
        queue_.push(page, QueueClass::Prefetch);
        ++stats_.prefetch_accepted;
        pump();
        return true;
    }

    void PolicyEngine::on_event(PolicyEventType type, EventCallback cb) { subscribers_[type].push_back(std::move(cb)); }

    std::optional<Hva> PolicyEngine::gva_to_hva(Gva gva, GuestContext ctx) const
    {
        if (!space_.has_context(ctx))
        {
            return std::nullopt;
        }
        return space_.gva_to_hva(ctx, gva);
    }

    Residency PolicyEngine::get_page_state(PageIndex page) const { return memory_.frame(page).state; }

    std::uint64_t PolicyEngine::query(QueryKind kind, PageIndex page) const
    {
        switch (kind)
        {
        case QueryKind::PageState:
            return static_cast<std::uint64_t>(get_page_state(page));
        case QueryKind::MemoryLimit:
            return limit_;
        case QueryKind::MemoryUsage:
            return usage_;
        case QueryKind::PfCount:
            return stats_.faults;
        }
        return 0;
    }

    void PolicyEngine::register_parameter(const std::string &name, ParamRead read, ParamWrite write)
    {
        params_.add(name, std::move(read), std::move(write));
    }

    // Swapper workers

    void PolicyEngine::pump()
    {
        if (pumping_)
        {
            pump_again_ = true;
            return;
        }
        pumping_ = true;
        do
        {
            pump_again_ = false;
            while (busy_ < config_.workers)
            {
                const auto entry = queue_.pop([this](PageIndex p) { return !inflight_[p]; });
                if (!entry)
                {
                    break;
                }
                process(*entry);
            }
        } while (pump_again_);
        pumping_ = false;
    }

    void PolicyEngine::worker_begin()
    {
        if (busy_ == 0)
        {
            zero_pool_.refill_idle(loop_.now() - idle_since_);
        }
        ++busy_;
    }

    void PolicyEngine::worker_done()
    {
        --busy_;
        if (busy_ == 0)
        {
            idle_since_ = loop_.now();
        }
        pump();
    }

    void PolicyEngine::wake_waiters(PageIndex page)
    {
        auto it = waiters_.find(page);
        if (it == waiters_.end())
        {
            return;
        }
        std::vector<std::function<void()>> ready = std::move(it->second);
        waiters_.erase(it);
        for (auto &cb : ready)
        {
            cb();
        }
    }

    bool PolicyEngine::process(const QueueEntry &entry)
    {
        const PageIndex page = entry.page;
        const PageFrame &f = memory_.frame(page);
        if (logging_)
        {
            dequeue_log_.push_back(DequeueRecord{loop_.now(), page, entry.cls, f.state, f.desired_state});
        }
        if (f.desired_state == Residency::Resident)
        {
            if (f.state == Residency::SwappedOut)
            {
                start_swap_in(page);
                return true;
            }
            if (has_waiters(page))
            {
                if (f.mapped)
                {
                    wake_waiters(page);
                    return false;
                }
                // Prefetched data is already resident; the worker only installs it.
                inflight_[page] = true;
                worker_begin();
                loop_.schedule(device_.params().worker_overhead(memory_.page_size()), EventKind::FaultCompletion,
                               [this, page]
                               {
                                   inflight_[page] = false;
                                   memory_.map(page, loop_.now());
                                   wake_waiters(page);
                                   worker_done();
                               });
                return true;
            }
            ++stats_.noop_dequeues;
            return false;
        }
        if (f.state == Residency::Resident && !f.locked)
        {
            start_swap_out(page);
            return inflight_[page];
        }
        ++stats_.noop_dequeues;
        return false;
    }

    void PolicyEngine::start_swap_in(PageIndex page)
    {
        inflight_[page] = true;
        worker_begin();
        ++stats_.swap_ins;
        const SimTime worker = device_.params().worker_overhead(memory_.page_size());
        if (memory_.frame(page).backed)
        {
            ++stats_.device_reads;
            stats_.bytes_read += page_bytes();
            device_submit(page, IoDirection::Read,
                          [this, page, worker]
                          { loop_.schedule(worker, EventKind::FaultCompletion, [this, page] { finish_swap_in(page); }); });
            return;
        }
        ++stats_.zero_fills;
        SimTime extra = 0;
        if (memory_.page_size() == PageSize::Huge)
        {
            extra = zero_pool_.take_zero_page();
        }
        loop_.schedule(extra + worker, EventKind::FaultCompletion, [this, page] { finish_swap_in(page); });
    }

    void PolicyEngine::finish_swap_in(PageIndex page)
    {
        inflight_[page] = false;
        populated_before_[page] = true;
        if (has_waiters(page))
        {
            memory_.map(page, loop_.now());
            wake_waiters(page);
        }
        else
        {
            memory_.populate(page);
        }
        PolicyEvent pe;
        pe.type = PolicyEventType::SwapIn;
        pe.time = loop_.now();
        pe.page = page;
        notify(pe);
        if (!deferred_.empty())
        {
            retry_deferred();
        }
        if (limit_debt_)
        {
            enforce_limit();
        }
        worker_done();
    }

    void PolicyEngine::start_swap_out(PageIndex page)
    {
        const bool write = memory_.needs_writeback(page, config_.clean_page_skip);
        memory_.unmap(page);
        ++stats_.swap_outs;
        if (!write)
        {
            finish_swap_out(page, false);
            return;
        }
        inflight_[page] = true;
        worker_begin();
        ++stats_.device_writes;
        stats_.bytes_written += page_bytes();
        device_submit(page, IoDirection::Write, [this, page] { finish_swap_out(page, true); });
    }

    void PolicyEngine::finish_swap_out(PageIndex page, bool written)
    {
        if (written)
        {
            memory_.mark_backed(page, true);
        }
        PolicyEvent pe;
        pe.type = PolicyEventType::SwapOut;
        pe.time = loop_.now();
        pe.page = page;
        notify(pe);
        if (written)
        {
            inflight_[page] = false;
            // Wanted back while the write was in flight.
            if (memory_.frame(page).desired_state == Residency::Resident)
            {
                queue_.push(page, has_waiters(page) ? QueueClass::Fault : QueueClass::Prefetch);
            }
            worker_done();
        }
    }

    // Device completions

    void PolicyEngine::device_submit(PageIndex page, IoDirection dir, std::function<void()> done)
    {
        const TransferId id = device_.start(loop_.now(), memory_.page_size(), dir);
        io_waiters_.emplace(id, std::move(done));
        if (logging_)
        {
            device_log_.push_back(DeviceOp{loop_.now(), page, dir});
        }
        device_reschedule();
    }

    void PolicyEngine::device_reschedule()
    {
        const auto next = device_.next_completion();
        if (!next)
        {
            if (device_event_)
            {
                loop_.cancel(*device_event_);
                device_event_.reset();
            }
            return;
        }
        const SimTime at = std::max(*next, loop_.now());
        if (device_event_ && device_event_at_ == at)
        {
            return;
        }
        if (device_event_)
        {
            loop_.cancel(*device_event_);
        }
        device_event_at_ = at;
        device_event_ = loop_.schedule_at(at, EventKind::IoCompletion, [this] { device_tick(); });
    }

    void PolicyEngine::device_tick()
    {
        device_event_.reset();
        const auto done = device_.complete_until(loop_.now());
        for (const CompletedTransfer &t : done)
        {
            auto it = io_waiters_.find(t.id);
            if (it == io_waiters_.end())
            {
                continue;
            }
            auto cb = std::move(it->second);
            io_waiters_.erase(it);
            cb();
        }
        if (done.empty() && !device_event_)
        {
            // Rounding left a completion a fraction of a nanosecond in the future.
            const auto next = device_.next_completion();
            if (next)
            {
                device_event_at_ = std::max(*next, loop_.now() + 1);
                device_event_ = loop_.schedule_at(device_event_at_, EventKind::IoCompletion, [this] { device_tick(); });
            }
            return;
        }
        device_reschedule();
    }

    // EPT scanner

    SubscriptionId PolicyEngine::scan_ept(SimTime interval, ScanCallback cb)
    {
        if (interval == 0)
        {
            throw std::invalid_argument("scan_ept: interval must be positive");
        }
        // Baseline scan: the new subscriber only sees accesses made after it subscribed. Bits
        // cleared here are handed to the existing subscribers.
        const SimTime now = loop_.now();
        if (!last_scan_ || last_scan_->scan_time != now)
        {
            last_scan_ = memory_.scan_and_clear_all(now);
            for (auto &kv : scans_)
            {
                if (kv.second.active)
                {
                    kv.second.accumulated.merge(*last_scan_);
                }
            }
        }
        const SubscriptionId id = next_sub_++;
        ScanSub sub{interval, now, std::move(cb), AccessBitmap{}, EventId{}, true};
        sub.accumulated.bits.assign(memory_.page_count(), false);
        scans_.emplace(id, std::move(sub));
        schedule_scan(id);
        return id;
    }

    void PolicyEngine::schedule_scan(SubscriptionId id)
    {
        ScanSub &sub = scans_.at(id);
        const SimTime at = std::max(loop_.now(), sub.last_delivery + sub.interval);
        sub.pending = loop_.schedule_at(at, EventKind::ScanTick, [this, id] { run_scan(id); });
    }

    void PolicyEngine::run_scan(SubscriptionId id)
    {
        auto it = scans_.find(id);
        if (it == scans_.end() || !it->second.active)
        {
            return;
        }
        const SimTime now = loop_.now();
        if (!last_scan_ || last_scan_->scan_time != now)
        {
            last_scan_ = memory_.scan_and_clear_all(now);
            for (auto &kv : scans_)
            {
                if (kv.second.active)
                {
                    kv.second.accumulated.merge(*last_scan_);
                }
            }
        }
        ScanSub &sub = it->second;
        AccessBitmap delivered = std::move(sub.accumulated);
        delivered.scan_time = now;
        sub.accumulated = AccessBitmap{};
        sub.accumulated.bits.assign(memory_.page_count(), false);
        sub.last_delivery = now;
        schedule_scan(id);
        // Copy: the callback may stop or re-register scans.
        ScanCallback cb = sub.cb;
        cb(delivered);
    }

    void PolicyEngine::set_scan_interval(SubscriptionId id, SimTime interval)
    {
        if (interval == 0)
        {
            throw std::invalid_argument("set_scan_interval: interval must be positive");
        }
        ScanSub &sub = scans_.at(id);
        loop_.cancel(sub.pending);
        sub.interval = interval;
        schedule_scan(id);
    }

    SimTime PolicyEngine::scan_interval(SubscriptionId id) const { return scans_.at(id).interval; }

    void PolicyEngine::stop_scan(SubscriptionId id)
    {
        auto it = scans_.find(id);
        if (it == scans_.end())
        {
            return;
        }
        loop_.cancel(it->second.pending);
        scans_.erase(it);
    }

    // Timers

    TimerId PolicyEngine::every(SimTime interval, std::function<void()> cb)
    {
        if (interval == 0)
        {
            throw std::invalid_argument("every: interval must be positive");
        }
        const TimerId id = next_timer_++;
        timers_.emplace(id, Timer{interval, std::move(cb), EventId{}, true});
        schedule_timer(id);
        return id;
    }

    void PolicyEngine::schedule_timer(TimerId id)
    {
        Timer &t = timers_.at(id);
        t.pending = loop_.schedule(t.interval, EventKind::PolicyTick,
                                   [this, id]
                                   {
                                       auto it = timers_.find(id);
                                       if (it == timers_.end())
                                       {
                                           return;
                                       }
                                       schedule_timer(id);
                                       auto cb = it->second.cb;
                                       cb();
                                   });
    }

    void PolicyEngine::after(SimTime delay, std::function<void()> cb)
    {
        loop_.schedule(delay, EventKind::PolicyTick, std::move(cb));
    }

    void PolicyEngine::cancel_timer(TimerId id)
    {
        auto it = timers_.find(id);
        if (it == timers_.end())
        {
            return;
        }
        loop_.cancel(it->second.pending);
        timers_.erase(it);
    }
} // namespace flexswap
