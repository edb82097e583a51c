#pragma once

#include "flexswap/address_model.hpp"
#include "flexswap/time.hpp"
#include "flexswap/vm_memory.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace flexswap
{
    enum class WorkloadKind : std::uint8_t
    {
        ColdRatioRandom,
        AlternatingHalves,
        SequentialWrite,
        Phased,
        KeyValue,
        BlockedReuse,
        Trace,
    };

    std::string to_string(WorkloadKind kind);
    WorkloadKind workload_kind_from_string(const std::string &name);

    enum class KeyDistribution : std::uint8_t
    {
        Gauss,
        Random,
        Sequential,
    };

    std::string to_string(KeyDistribution dist);
    KeyDistribution key_distribution_from_string(const std::string &name);

    struct PhaseSpec
    {
        std::uint64_t offset = 0; // bytes into the region
        std::uint64_t bytes = 0;
        SimTime duration = 0;
    };

    struct WorkloadSpec
    {
        WorkloadKind kind = WorkloadKind::ColdRatioRandom;
        std::uint64_t region_bytes = 0;
        std::uint64_t seed = 1;
        GuestContext ctx{1};
        SimTime gap = 0;            // think time between accesses
        double write_fraction = 0.0;
        std::uint64_t max_accesses = 0; // 0: unbounded
        std::optional<InitialState> initial;

        // cold_ratio_random: hot region first, cold region after it.
        std::uint64_t hot_bytes = 0;
        double cold_ratio = 0.0;

        // alternating_halves
        SimTime half_period = 60 * kSecond;

        // sequential_write
        std::uint64_t stride_bytes = 4 * kKiB;
        std::uint64_t passes = 1;

        // phased
        bool build_phase = true;
        std::vector<PhaseSpec> phases;

        // keyvalue
        KeyDistribution distribution = KeyDistribution::Gauss;
        double sd_fraction = 0.125; // gauss standard deviation relative to the region
        std::uint64_t value_bytes = 1 * kKiB;

        // blocked_reuse
        std::uint64_t block_bytes = 256 * kKiB;
        std::uint64_t a_blocks = 8;
        std::uint64_t b_blocks = 32;
        std::uint64_t inner_repeats = 1;
        std::uint64_t outer_repeats = 1;

        // trace
        std::string trace_path;
    };

    struct Access
    {
        SimTime delay = 0; // before this access
        GuestContext ctx;
        Gva gva;
        AccessKind rw = AccessKind::Read;
        std::uint64_t ip = 0;
        friend bool operator==(const Access &, const Access &) = default;
    };

    // Named synchronization point between runs of the same workload.
    struct Marker
    {
        std::string name;
    };

    using Step = std::variant<Access, Marker>;

    // Initial state of a byte range of the region (guest virtual addresses).
    struct LayoutRange
    {
        std::uint64_t begin;
        std::uint64_t end;
        InitialState state;
    };

    // One stream of accesses, as issued by one vCPU.
    class Workload
    {
    public:
        virtual ~Workload() = default;
        // Next step at simulated time `now`, or nullopt when the stream ends.
        virtual std::optional<Step> next(SimTime now) = 0;
    };

    // Builds stream `stream` of `streams` for `spec`. Random kinds draw independent sequences per
    // stream; sweeping kinds split the region between streams.
    std::unique_ptr<Workload> make_workload(const WorkloadSpec &spec, std::uint64_t stream = 0,
                                            std::uint64_t streams = 1);

    std::vector<LayoutRange> initial_layout(const WorkloadSpec &spec);

    // Guest mapping directive: scramble fraction for the guest page table of this scenario.
    double warmup_scramble(bool enabled);

    // Byte range [begin, end) of every guest address the workload may touch.
    std::pair<std::uint64_t, std::uint64_t> footprint(const WorkloadSpec &spec);

    // Line format: time_ns,ctx,gva_hex,r|w,ip_tag
    struct TraceRecord
    {
        SimTime time;
        Access access;
    };

    std::string format_trace_line(const TraceRecord &rec);
    TraceRecord parse_trace_line(const std::string &line);
    std::vector<TraceRecord> read_trace(std::istream &in);
    void write_trace(std::ostream &out, const std::vector<TraceRecord> &records);

    // Replays recorded accesses; delays reproduce the recorded spacing.
    class TraceWorkload final : public Workload
    {
    public:
        explicit TraceWorkload(std::vector<TraceRecord> records) : records_(std::move(records)) {}
        std::optional<Step> next(SimTime now) override;

    private:
        std::vector<TraceRecord> records_;
        std::size_t pos_ = 0;
        SimTime last_ = 0;
    };
} // namespace flexswap
