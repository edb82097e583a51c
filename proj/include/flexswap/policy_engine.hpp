#pragma once

#include "flexswap/event_loop.hpp"
#include "flexswap/policy_api.hpp"
#include "flexswap/storage_model.hpp"
#include "flexswap/swap_queue.hpp"
#include "flexswap/vm_memory.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace flexswap
{
    class DeadlockDetected : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct EngineConfig
    {
        unsigned workers = 2;
        bool clean_page_skip = true;
        SwapQueue::Order priority = SwapQueue::kDefaultOrder;
        std::uint64_t memory_limit = ~std::uint64_t{0};
    };

    struct EngineStats
    {
        std::uint64_t faults = 0;
        std::uint64_t major_faults = 0;
        std::uint64_t minor_faults = 0;
        std::uint64_t first_touch_faults = 0;
        std::uint64_t refaults = 0;
        std::uint64_t prefetch_requests = 0;
        std::uint64_t prefetch_accepted = 0;
        std::uint64_t reclaim_requests = 0;
        std::uint64_t reclaim_accepted = 0;
        std::uint64_t forced_reclaims = 0;
        std::uint64_t deferred_admissions = 0;
        std::uint64_t noop_dequeues = 0;
        std::uint64_t swap_ins = 0;
        std::uint64_t swap_outs = 0;
        std::uint64_t device_reads = 0;
        std::uint64_t device_writes = 0;
        std::uint64_t zero_fills = 0;
        std::uint64_t bytes_read = 0;
        std::uint64_t bytes_written = 0;
    };

    struct DeviceOp
    {
        SimTime time;
        PageIndex page;
        IoDirection dir;
    };

    struct DequeueRecord
    {
        SimTime time;
        PageIndex page;
        QueueClass cls;
        Residency state;
        Residency desired;
    };

    // Name -> (read, write) callbacks, shared by all policies of one engine.
    class ParameterRegistry
    {
    public:
        void add(const std::string &name, ParamRead read, ParamWrite write);
        bool contains(const std::string &name) const { return entries_.contains(name); }
        double get(const std::string &name) const;
        void set(const std::string &name, double value);
        std::vector<std::string> names() const;

    private:
        struct Entry
        {
            ParamRead read;
            ParamWrite write;
        };
        std::map<std::string, Entry> entries_;
    };

    // Memory-limit accounting, the desired-state swap queue with its workers, forced
    // reclamation, and the policy-facing API.
    class PolicyEngine final : public PolicyApi
    {
    public:
        PolicyEngine(EventLoop &loop, VmMemory &memory, const AddressSpace &space, DeviceModel &device,
                     ZeroPagePool &zero_pool, EngineConfig config = {});
        ~PolicyEngine() override;

        PolicyEngine(const PolicyEngine &) = delete;
        PolicyEngine &operator=(const PolicyEngine &) = delete;

        void register_policy(std::shared_ptr<Policy> policy);
        void set_limit_reclaimer(LimitReclaimer *reclaimer) { reclaimer_ = reclaimer; }

        // A guest access faulted. `resume` runs once the page is mapped.
        void submit_fault(const FaultEvent &ev, std::function<void()> resume);

        // Locks the page and completes once it is resident and mapped.
        void lock_page(PageIndex page, std::function<void()> on_locked);
        void unlock_page(PageIndex page);

        void set_memory_limit(std::uint64_t bytes);
        std::uint64_t query(QueryKind kind, PageIndex page = 0) const;

        // Sets desired states to match frames prepared with VmMemory::set_initial_state.
        void sync_initial_state();

        // PolicyApi
        bool reclaim(PageIndex page) override;
        bool prefetch(PageIndex page) override;
        void on_event(PolicyEventType type, EventCallback cb) override;
        std::optional<Hva> gva_to_hva(Gva gva, GuestContext ctx) const override;
        SubscriptionId scan_ept(SimTime interval, ScanCallback cb) override;
        void set_scan_interval(SubscriptionId sub, SimTime interval) override;
        SimTime scan_interval(SubscriptionId sub) const override;
        void stop_scan(SubscriptionId sub) override;
        Residency get_page_state(PageIndex page) const override;
        std::uint64_t get_memory_limit() const override { return limit_; }
        std::uint64_t get_memory_usage() const override { return usage_; }
        std::uint64_t get_pf_count() const override { return stats_.faults; }
        void register_parameter(const std::string &name, ParamRead read, ParamWrite write) override;
        SimTime now() const override { return loop_.now(); }
        TimerId every(SimTime interval, std::function<void()> cb) override;
        void after(SimTime delay, std::function<void()> cb) override;
        void cancel_timer(TimerId id) override;
        const VmMemory &memory() const override { return memory_; }
        SimTime walk_latency() const override { return space_.walk_latency(); }
        bool is_victim_candidate(PageIndex page) const override;

        ParameterRegistry &parameters() noexcept { return params_; }
        const ParameterRegistry &parameters() const noexcept { return params_; }
        const EngineStats &stats() const noexcept { return stats_; }
        const SwapQueue &queue() const noexcept { return queue_; }
        const EngineConfig &config() const noexcept { return config_; }
        unsigned busy_workers() const noexcept { return busy_; }
        bool idle() const noexcept { return busy_ == 0 && queue_.empty() && deferred_.empty(); }
        bool in_flight(PageIndex page) const { return inflight_.at(page); }
        bool has_waiters(PageIndex page) const;

        // Usage recomputed from the desired states.
        std::uint64_t recount_usage() const;

        void enable_logs(bool on) { logging_ = on; }
        const std::vector<DeviceOp> &device_log() const noexcept { return device_log_; }
        const std::vector<DequeueRecord> &dequeue_log() const noexcept { return dequeue_log_; }

    private:
        struct ScanSub
        {
            SimTime interval;
            SimTime last_delivery;
            ScanCallback cb;
            AccessBitmap accumulated;
            EventId pending;
            bool active;
        };
        struct Timer
        {
            SimTime interval;
            std::function<void()> cb;
            EventId pending;
            bool active;
        };

        std::uint64_t page_bytes() const noexcept { return memory_.page_bytes(); }
        void notify(const PolicyEvent &ev);

        void admit(const FaultEvent &ev, std::function<void()> resume, bool counted);
        // Makes room for one more resident page and marks `page` desired-resident. Returns false
        // if no room can be made yet.
        bool try_admit(PageIndex page);
        bool forced_reclaim_one();
        std::optional<PageIndex> pick_victim();
        bool cancel_one_prefetch();
        void retry_deferred();
        void enforce_limit();
        void mark_desired(PageIndex page, Residency desired);

        void pump();
        // Returns true if the entry started asynchronous work on a worker.
        bool process(const QueueEntry &entry);
        void start_swap_in(PageIndex page);
        void finish_swap_in(PageIndex page);
        void start_swap_out(PageIndex page);
        void finish_swap_out(PageIndex page, bool written);
        void worker_begin();
        void worker_done();
        void wake_waiters(PageIndex page);
        // Every desired-resident page is locked, so no victim can ever appear.
        bool all_pinned() const;

        void device_submit(PageIndex page, IoDirection dir, std::function<void()> done);
        void device_reschedule();
        void device_tick();

        void schedule_scan(SubscriptionId id);
        void run_scan(SubscriptionId id);
        void schedule_timer(TimerId id);

        EventLoop &loop_;
        VmMemory &memory_;
        const AddressSpace &space_;
        DeviceModel &device_;
        ZeroPagePool &zero_pool_;
        EngineConfig config_;

        std::uint64_t limit_;
        std::uint64_t usage_ = 0;
        SwapQueue queue_;
        std::vector<bool> inflight_;
        std::vector<bool> populated_before_;
        std::unordered_map<PageIndex, std::vector<std::function<void()>>> waiters_;
        std::deque<PageIndex> deferred_;
        bool limit_debt_ = false;
        unsigned busy_ = 0;
        SimTime idle_since_ = 0;
        bool pumping_ = false;
        bool pump_again_ = false;

        LimitReclaimer *reclaimer_ = nullptr;
        std::vector<std::shared_ptr<Policy>> policies_;
        std::map<PolicyEventType, std::vector<EventCallback>> subscribers_;
        ParameterRegistry params_;

        std::map<SubscriptionId, ScanSub> scans_;
        SubscriptionId next_sub_ = 1;
        std::optional<AccessBitmap> last_scan_;
        std::map<TimerId, Timer> timers_;
        TimerId next_timer_ = 1;

        std::unordered_map<TransferId, std::function<void()>> io_waiters_;
        std::optional<EventId> device_event_;
        SimTime device_event_at_ = 0;

        EngineStats stats_;
        bool logging_ = false;
        std::vector<DeviceOp> device_log_;
        std::vector<DequeueRecord> dequeue_log_;
    };
} // namespace flexswap
