#pragma once

#include "flexswap/address_model.hpp"
#include "flexswap/time.hpp"
#include "flexswap/vm_memory.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace flexswap
{
    enum class PolicyEventType : std::uint8_t
    {
        PageFault,
        MemoryLimitChange,
        SwapOut,
        SwapIn,
    };

    struct PolicyEvent
    {
        PolicyEventType type = PolicyEventType::PageFault;
        SimTime time = 0;
        PageIndex page = 0;
        FaultEvent fault;           // PageFault only
        std::uint64_t old_limit = 0; // MemoryLimitChange only
        std::uint64_t new_limit = 0;
    };

    enum class QueryKind : std::uint8_t
    {
        PageState,
        MemoryLimit,
        MemoryUsage,
        PfCount,
    };

    using EventCallback = std::function<void(const PolicyEvent &)>;
    using ScanCallback = std::function<void(const AccessBitmap &)>;
    using ParamRead = std::function<double()>;
    using ParamWrite = std::function<void(double)>;

    using SubscriptionId = std::uint64_t;
    using TimerId = std::uint64_t;

    class DuplicateName : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    class NoVictim : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // The only way a policy affects the VM. Every call is non-blocking and may be rejected;
    // nothing a policy does through this interface can break the engine's invariants.
    class PolicyApi
    {
    public:
        virtual ~PolicyApi() = default;

        virtual bool reclaim(PageIndex page) = 0;
        virtual bool prefetch(PageIndex page) = 0;
        virtual void on_event(PolicyEventType type, EventCallback cb) = 0;
        virtual std::optional<Hva> gva_to_hva(Gva gva, GuestContext ctx) const = 0;

        // Delivers the pages accessed since this subscription's previous delivery, every
        // `interval`.
        virtual SubscriptionId scan_ept(SimTime interval, ScanCallback cb) = 0;
        virtual void set_scan_interval(SubscriptionId sub, SimTime interval) = 0;
        virtual SimTime scan_interval(SubscriptionId sub) const = 0;
        virtual void stop_scan(SubscriptionId sub) = 0;

        virtual Residency get_page_state(PageIndex page) const = 0;
        virtual std::uint64_t get_memory_limit() const = 0;
        virtual std::uint64_t get_memory_usage() const = 0;
        virtual std::uint64_t get_pf_count() const = 0;
        virtual void register_parameter(const std::string &name, ParamRead read, ParamWrite write) = 0;

        // Simulator services: a clock, timers, and read-only page introspection.
        virtual SimTime now() const = 0;
        virtual TimerId every(SimTime interval, std::function<void()> cb) = 0;
        virtual void after(SimTime delay, std::function<void()> cb) = 0;
        virtual void cancel_timer(TimerId id) = 0;
        virtual const VmMemory &memory() const = 0;
        virtual SimTime walk_latency() const = 0;
        // A page the engine would accept as a reclaim victim right now.
        virtual bool is_victim_candidate(PageIndex page) const = 0;
    };

    class Policy
    {
    public:
        virtual ~Policy() = default;
        virtual std::string name() const = 0;
        virtual void attach(PolicyApi &api) = 0;
    };

    // Chooses victims for forced reclamation. Called synchronously by the engine.
    class LimitReclaimer
    {
    public:
        virtual ~LimitReclaimer() = default;
        virtual std::optional<PageIndex> select_victim() = 0;
    };
} // namespace flexswap
