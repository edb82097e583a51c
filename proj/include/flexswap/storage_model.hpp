#pragma once

#include "flexswap/address_model.hpp"
#include "flexswap/time.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace flexswap
{
    enum class IoDirection : std::uint8_t
    {
        Read,
        Write,
    };

    // Fault-path latency parameters. Defaults are derived from the measured breakdown: a
    // kernel 4kB fault costs 6us of exit overhead at a 7.8% share (~76.9us total), the
    // userspace 4kB path adds 12us with a 22us exit cost, and a 2MB fault costs 11x the kernel
    // 4kB fault with a 4.2% exit share. Bandwidth is the measured 2.6GB/s device ceiling.
    struct DeviceParams
    {
        SimTime lat_sw_4k = 22'000;
        SimTime lat_sw_2m = 35'538;
        SimTime io_base_4k = 66'923;
        SimTime io_base_2m = 810'615;
        double bandwidth_cap = 2.6e9; // bytes per second, reads and writes combined
        // Share of the software overhead spent by the swapper worker after the transfer
        // (mapping and completing the fault). The rest is fault delivery before the fault
        // reaches the queue.
        double worker_sw_fraction = 0.5;

        // The in-kernel 4kB swap path, used as the reference for latency ratios.
        static DeviceParams kernel_4k();

        SimTime software_overhead(PageSize ps) const noexcept { return ps == PageSize::Huge ? lat_sw_2m : lat_sw_4k; }
        SimTime service_floor(PageSize ps) const noexcept { return ps == PageSize::Huge ? io_base_2m : io_base_4k; }
        SimTime worker_overhead(PageSize ps) const noexcept;
        SimTime delivery_overhead(PageSize ps) const noexcept { return software_overhead(ps) - worker_overhead(ps); }
    };

    using TransferId = std::uint64_t;

    struct CompletedTransfer
    {
        TransferId id;
        SimTime completion;
        std::uint64_t bytes;
        IoDirection dir;
    };

    // Processor-sharing model of the swap device: all in-flight transfers share bandwidth_cap
    // equally, and no transfer completes earlier than its service floor after it started.
    // n identical transfers started together each take max(floor, n * bytes / cap).
    class DeviceModel
    {
    public:
        explicit DeviceModel(DeviceParams params = {});

        // Registers a transfer entering the device at `at` (>= device time).
        TransferId start(SimTime at, PageSize ps, IoDirection dir);
        TransferId start_bytes(SimTime at, std::uint64_t bytes, SimTime floor, IoDirection dir);

        // Completion time of `id` if nothing else arrives.
        SimTime projected_completion(TransferId id) const;
        std::optional<SimTime> next_completion() const;
        // Advances the device clock and returns every transfer completed by `now`.
        std::vector<CompletedTransfer> complete_until(SimTime now);

        // Submits a transfer whose software path begins at `t` and returns its projected
        // completion: t + software overhead + shared service time.
        SimTime submit_io(PageSize ps, IoDirection dir, SimTime t);

        // Latency of one fault on an otherwise idle device.
        SimTime isolated_latency(PageSize ps) const;

        const DeviceParams &params() const noexcept { return params_; }
        std::size_t inflight() const noexcept { return active_.size(); }
        std::uint64_t bytes_completed() const noexcept { return bytes_completed_; }
        std::uint64_t ops_completed() const noexcept { return ops_completed_; }
        SimTime device_time() const noexcept { return clock_; }

    private:
        struct Transfer
        {
            TransferId id;
            std::uint64_t bytes;
            IoDirection dir;
            double remaining; // bytes
            SimTime floor_at;
            double bytes_done_at; // ns, valid when remaining == 0
        };

        static void advance(std::vector<Transfer> &active, double &clock, double to, double rate_per_ns);
        static double completion_of(const Transfer &t);

        DeviceParams params_;
        double rate_per_ns_;
        std::vector<Transfer> active_;
        double clock_exact_ = 0.0;
        SimTime clock_ = 0;
        TransferId next_id_ = 1;
        std::uint64_t bytes_completed_ = 0;
        std::uint64_t ops_completed_ = 0;
    };

    // Pre-zeroed 2MB pages kept ready so first touches skip the ~100us zeroing.
    struct ZeroPagePoolConfig
    {
        std::uint64_t capacity = 64;
        double refill_rate = 1000.0; // pages per second of idle time
        SimTime zero_cost = 100 * kMicrosecond;
    };

    class ZeroPagePool
    {
    public:
        explicit ZeroPagePool(ZeroPagePoolConfig config = {});

        // Extra latency for obtaining a zeroed 2MB page.
        SimTime take_zero_page();
        void refill_idle(SimTime idle_span);

        std::uint64_t available() const noexcept { return available_; }
        std::uint64_t capacity() const noexcept { return config_.capacity; }
        void set_available(std::uint64_t n);
        const ZeroPagePoolConfig &config() const noexcept { return config_; }

    private:
        ZeroPagePoolConfig config_;
        std::uint64_t available_;
    };
} // namespace flexswap
