#pragma once

#include "flexswap/policies/aggressive.hpp"
#include "flexswap/policies/dt_reclaimer.hpp"
#include "flexswap/policies/linear_prefetch.hpp"
#include "flexswap/policy_engine.hpp"
#include "flexswap/storage_model.hpp"
#include "flexswap/vm_memory.hpp"
#include "flexswap/workloads.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace YAML
{
    class Node;
}

namespace flexswap
{
    // Configuration error with the offending location.
    class ConfigError : public std::runtime_error
    {
    public:
        ConfigError(const std::string &what, int line = -1)
            : std::runtime_error(line >= 0 ? "line " + std::to_string(line + 1) + ": " + what : what), line_(line)
        {
        }
        int line() const noexcept { return line_; }

    private:
        int line_;
    };

    // "8GiB", "512MiB", "4k", "2M", or a plain byte count.
    std::uint64_t parse_size(const std::string &text);
    // "60s", "100us", "5ms", "250ns", or plain seconds.
    SimTime parse_duration(const std::string &text);
    PageSize parse_page_size(const std::string &text);

    enum class PolicyType : std::uint8_t
    {
        Lru,
        Dt,
        ReuseDistance,
        Aggressive,
        LinearPf,
        Wsr,
        ColdKeeper,
    };

    std::string to_string(PolicyType type);

    struct PolicySpec
    {
        PolicyType type = PolicyType::Lru;
        std::uint64_t lru_watermark = 0;
        DtConfig dt;
        double r_alpha = 0.5;
        AggressiveConfig aggressive;
        PrefetchMode prefetch_mode = PrefetchMode::Gva;
    };

    enum class LimitBasis : std::uint8_t
    {
        Bytes,
        FractionOfVm,
        FractionOfWss,
        Unlimited,
    };

    struct LimitEntry
    {
        SimTime at = 0;
        LimitBasis basis = LimitBasis::Bytes;
        double value = 0.0;
    };

    struct VmSpec
    {
        std::uint64_t size = kGiB;
        PageSize page_size = PageSize::Huge;
        SimTime hot_latency = 0;
        SimTime cold_penalty_after_clear = 0;
        SimTime scan_cost_per_pte = 10;
        LruSource lru_source = LruSource::Exact;
        double scramble = 0.0;
        double walk_fail_fraction = 0.0;
        SimTime walk_latency = 0;
        std::uint64_t hva_base = 0;
    };

    struct Scenario
    {
        std::string name = "scenario";
        std::uint64_t seed = 1;
        SimTime duration = 60 * kSecond;
        SimTime sample_interval = kSecond;
        // End the run once every vCPU has finished its stream.
        bool stop_when_done = true;
        VmSpec vm;
        DeviceParams device;
        ZeroPagePoolConfig zero_pool;
        EngineConfig engine;
        std::vector<PolicySpec> policies;
        WorkloadSpec workload;
        unsigned vcpus = 1;
        std::vector<LimitEntry> limits;
        // Registry parameters applied after the policies attach.
        std::map<std::string, double> parameters;
    };

    // Bytes of the workload's working set, used by fraction_of_wss limits.
    std::uint64_t working_set_bytes(const WorkloadSpec &spec);
    std::uint64_t resolve_limit(const LimitEntry &entry, const Scenario &scenario);

    Scenario load_scenario_file(const std::string &path, const std::vector<std::string> &overrides = {});
    Scenario load_scenario_string(const std::string &text, const std::vector<std::string> &overrides = {});
    Scenario scenario_from_yaml(const YAML::Node &root);

    // Applies "dotted.key=value" to a YAML document; list items are addressed by index.
    void apply_override(YAML::Node &root, const std::string &assignment);

    void validate(const Scenario &scenario);
} // namespace flexswap
