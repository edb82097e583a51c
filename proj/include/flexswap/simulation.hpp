#pragma once

#include "flexswap/address_model.hpp"
#include "flexswap/event_loop.hpp"
#include "flexswap/policy_engine.hpp"
#include "flexswap/scenario.hpp"
#include "flexswap/storage_model.hpp"
#include "flexswap/vm_memory.hpp"
#include "flexswap/workloads.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace flexswap
{
    // One row of metrics.csv. Counters are cumulative; rates cover the preceding interval.
    struct Sample
    {
        SimTime time = 0;
        std::uint64_t resident_bytes = 0;
        std::uint64_t usage_bytes = 0;
        std::uint64_t limit_bytes = 0;
        std::uint64_t faults = 0;
        std::uint64_t major_faults = 0;
        std::uint64_t minor_faults = 0;
        std::uint64_t refaults = 0;
        double fault_rate = 0.0;    // faults per second
        std::uint64_t read_bytes = 0;
        std::uint64_t written_bytes = 0;
        double io_throughput = 0.0; // bytes per second, both directions
        std::uint64_t accesses = 0;
        std::uint64_t prefetches_accepted = 0;
        std::uint64_t reclaims_accepted = 0;
    };

    struct MarkerRecord
    {
        std::string name;
        SimTime time = 0;
    };

    using PolicyCounters = std::map<std::string, std::map<std::string, double>>;

    struct RunResult
    {
        std::string scenario;
        std::uint64_t seed = 0;
        PageSize page_size = PageSize::Huge;
        std::uint64_t vm_bytes = 0;
        SimTime duration = 0;
        // Time the last vCPU finished, or the end of the run if some did not.
        SimTime runtime = 0;
        SimTime end_time = 0;
        bool completed = false;

        std::vector<Sample> samples;
        std::vector<MarkerRecord> markers;
        EngineStats stats;
        std::uint64_t accesses = 0;
        std::uint64_t dropped_accesses = 0; // no guest translation
        double mean_access_latency_ns = 0.0;
        std::uint64_t final_resident_bytes = 0;
        std::uint64_t peak_resident_bytes = 0; // over samples and the final state
        SimTime scanner_cpu = 0;
        std::uint64_t ptes_scanned = 0;
        PolicyCounters policies;
    };

    struct SimulationOptions
    {
        bool trace_events = false;
        bool engine_logs = false;
    };

    // One scenario wired end to end: address space, VM memory, device, engine, policies and
    // one workload stream per vCPU. Either call run(), or drive it with start(), advance_to()
    // and finish() to inspect state mid-run.
    class Simulation
    {
    public:
        explicit Simulation(Scenario scenario, SimulationOptions options = {});
        ~Simulation();

        Simulation(const Simulation &) = delete;
        Simulation &operator=(const Simulation &) = delete;

        RunResult run();

        void start();
        // Runs events up to `t` (clamped to the scenario duration), taking the samples due.
        void advance_to(SimTime t);
        RunResult finish();

        bool workload_done() const;
        SimTime now() const { return loop_.now(); }

        const Scenario &scenario() const noexcept { return scenario_; }
        EventLoop &loop() noexcept { return loop_; }
        AddressSpace &space() noexcept { return *space_; }
        VmMemory &memory() noexcept { return *memory_; }
        DeviceModel &device() noexcept { return *device_; }
        PolicyEngine &engine() noexcept { return *engine_; }
        const std::vector<std::shared_ptr<Policy>> &policies() const noexcept { return policies_; }
        const std::vector<Sample> &samples() const noexcept { return samples_; }
        const std::vector<MarkerRecord> &markers() const noexcept { return markers_; }
        std::optional<SimTime> marker_time(const std::string &name) const;

        std::uint64_t accesses() const noexcept;
        // Host pages backing guest range [begin, end) of the workload context.
        std::vector<PageIndex> pages_of_range(std::uint64_t begin, std::uint64_t end) const;

        template <typename P>
        P *find_policy() const
        {
            for (const auto &p : policies_)
            {
                if (auto *hit = dynamic_cast<P *>(p.get()))
                {
                    return hit;
                }
            }
            return nullptr;
        }

    private:
        struct Vcpu;

        void build_policies();
        void apply_layout();
        void schedule_limits();
        void step_vcpu(Vcpu &v);
        void take_sample();
        PolicyCounters policy_counters() const;

        Scenario scenario_;
        SimulationOptions options_;
        EventLoop loop_;
        std::unique_ptr<AddressSpace> space_;
        std::unique_ptr<VmMemory> memory_;
        std::unique_ptr<DeviceModel> device_;
        std::unique_ptr<ZeroPagePool> zero_pool_;
        std::unique_ptr<PolicyEngine> engine_;
        std::vector<std::shared_ptr<Policy>> policies_;
        std::vector<std::unique_ptr<Vcpu>> vcpus_;
        std::vector<MarkerRecord> markers_;
        std::vector<Sample> samples_;
        SimTime next_sample_ = 0;
        Sample last_sample_;
        std::uint64_t peak_resident_ = 0;
        bool started_ = false;
    };

    RunResult run_scenario(const Scenario &scenario, SimulationOptions options = {});
} // namespace flexswap
