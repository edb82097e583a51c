#include "flexswap/workloads.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace flexswap
{
    namespace
    {
        constexpr std::uint64_t kGranule = 4 * kKiB;

        // Site tags for the synthetic instruction pointers.
        constexpr std::uint64_t kIpHot = 1;
        constexpr std::uint64_t kIpCold = 2;
        constexpr std::uint64_t kIpHalves = 3;
        constexpr std::uint64_t kIpSequential = 4;
        constexpr std::uint64_t kIpBuild = 5;
        constexpr std::uint64_t kIpPhase = 6;
        constexpr std::uint64_t kIpGet = 10;
        constexpr std::uint64_t kIpSet = 11;
        constexpr std::uint64_t kIpBlockA = 20;
        constexpr std::uint64_t kIpBlockB = 21;

        std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream)
        {
            return splitmix64(seed ^ splitmix64(stream + 0x5bd1e995));
        }

        class Generator : public Workload
        {
        public:
            Generator(const WorkloadSpec &spec, std::uint64_t stream, std::uint64_t streams)
                : spec_(spec), stream_(stream), streams_(std::max<std::uint64_t>(1, streams)),
                  rng_(stream_seed(spec.seed, stream))
            {
            }

            std::optional<Step> next(SimTime now) final
            {
                if (pending_marker_)
                {
                    Marker m{std::move(*pending_marker_)};
                    pending_marker_.reset();
                    return m;
                }
                if (spec_.max_accesses != 0 && issued_ >= spec_.max_accesses)
                {
                    return std::nullopt;
                }
                auto step = produce(now);
                if (step && std::holds_alternative<Access>(*step))
                {
                    ++issued_;
                }
                return step;
            }

        protected:
            virtual std::optional<Step> produce(SimTime now) = 0;

            Access make(std::uint64_t offset, AccessKind rw, std::uint64_t ip) const
            {
                return Access{spec_.gap, spec_.ctx, Gva{offset}, rw, ip};
            }

            AccessKind draw_rw()
            {
                if (spec_.write_fraction <= 0.0)
                {
                    return AccessKind::Read;
                }
                return unit_(rng_) < spec_.write_fraction ? AccessKind::Write : AccessKind::Read;
            }

            std::uint64_t uniform_granule(std::uint64_t begin, std::uint64_t bytes)
            {
                const std::uint64_t n = std::max<std::uint64_t>(1, bytes / kGranule);
                return begin + std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_) * kGranule;
            }

            // Emits `name` before the next access.
            std::optional<Step> marker_then(std::string name, Access access)
            {
                pending_access_ = access;
                return Marker{std::move(name)};
            }

            WorkloadSpec spec_;
            std::uint64_t stream_;
            std::uint64_t streams_;
            std::mt19937_64 rng_;
            std::uniform_real_distribution<double> unit_{0.0, 1.0};
            std::optional<std::string> pending_marker_;
            std::optional<Access> pending_access_;
            std::uint64_t issued_ = 0;
        };

        class ColdRatioRandom final : public Generator
        {
        public:
            using Generator::Generator;

        protected:
            std::optional<Step> produce(SimTime) override
            {
                const std::uint64_t cold_bytes = spec_.region_bytes - spec_.hot_bytes;
                const bool cold = cold_bytes > 0 && unit_(rng_) < spec_.cold_ratio;
                if (cold)
                {
                    return make(uniform_granule(spec_.hot_bytes, cold_bytes), draw_rw(), kIpCold);
                }
                return make(uniform_granule(0, spec_.hot_bytes), draw_rw(), kIpHot);
            }
        };

        class AlternatingHalves final : public Generator
        {
        public:
            using Generator::Generator;

        protected:
            std::optional<Step> produce(SimTime now) override
            {
                if (pending_access_)
                {
                    Access a = *pending_access_;
                    pending_access_.reset();
                    return a;
                }
                const std::uint64_t period = std::max<SimTime>(1, spec_.half_period);
                const std::uint64_t k = now / period;
                const std::uint64_t half = spec_.region_bytes / 2;
                const std::uint64_t begin = k % 2 == 0 ? 0 : half;
                Access a = make(uniform_granule(begin, half), draw_rw(), kIpHalves);
                if (!last_half_ || *last_half_ != k)
                {
                    last_half_ = k;
                    return marker_then("half_" + std::to_string(k), a);
                }
                return a;
            }

        private:
            std::optional<std::uint64_t> last_half_;
        };

        class SequentialWrite final : public Generator
        {
        public:
            SequentialWrite(const WorkloadSpec &spec, std::uint64_t stream, std::uint64_t streams)
                : Generator(spec, stream, streams), offset_(stream * std::max<std::uint64_t>(1, spec.stride_bytes))
            {
            }

        protected:
            std::optional<Step> produce(SimTime) override
            {
                if (pending_access_)
                {
                    Access a = *pending_access_;
                    pending_access_.reset();
                    return a;
                }
                const std::uint64_t stride = std::max<std::uint64_t>(1, spec_.stride_bytes);
                if (offset_ >= spec_.region_bytes)
                {
                    ++pass_;
                    offset_ = stream_ * stride;
                    started_ = false;
                }
                if (pass_ >= spec_.passes || offset_ >= spec_.region_bytes)
                {
                    return std::nullopt;
                }
                Access a = make(offset_, AccessKind::Write, kIpSequential);
                offset_ += stride * streams_;
                if (!started_)
                {
                    started_ = true;
                    return marker_then("pass_" + std::to_string(pass_), a);
                }
                return a;
            }

        private:
            std::uint64_t offset_;
            std::uint64_t pass_ = 0;
            bool started_ = false;
        };

        class Phased final : public Generator
        {
        public:
            Phased(const WorkloadSpec &spec, std::uint64_t stream, std::uint64_t streams)
                : Generator(spec, stream, streams), building_(spec.build_phase), build_offset_(stream * kGranule)
            {
            }

        protected:
            std::optional<Step> produce(SimTime now) override
            {
                if (pending_access_)
                {
                    Access a = *pending_access_;
                    pending_access_.reset();
                    return a;
                }
                if (building_)
                {
                    if (build_offset_ < spec_.region_bytes)
                    {
                        Access a = make(build_offset_, AccessKind::Write, kIpBuild);
                        build_offset_ += kGranule * streams_;
                        return a;
                    }
                    building_ = false;
                    pending_marker_ = "build_done";
                }
                if (phase_ >= spec_.phases.size())
                {
                    if (pending_marker_)
                    {
                        return next_marker();
                    }
                    return std::nullopt;
                }
                if (!phase_start_)
                {
                    phase_start_ = now;
                    if (pending_marker_)
                    {
                        // build_done, then the phase marker, then the access
                        auto first = next_marker();
                        pending_marker_ = "phase_" + std::to_string(phase_);
                        return first;
                    }
                    return Marker{"phase_" + std::to_string(phase_)};
                }
                const PhaseSpec &ph = spec_.phases[phase_];
                if (now >= *phase_start_ + ph.duration)
                {
                    ++phase_;
                    phase_start_.reset();
                    return produce(now);
                }
                return make(uniform_granule(ph.offset, ph.bytes), draw_rw(), kIpPhase);
            }

        private:
            std::optional<Step> next_marker()
            {
                Marker m{std::move(*pending_marker_)};
                pending_marker_.reset();
                return m;
            }

            bool building_;
            std::uint64_t build_offset_;
            std::size_t phase_ = 0;
            std::optional<SimTime> phase_start_;
        };

        class KeyValue final : public Generator
        {
        public:
            KeyValue(const WorkloadSpec &spec, std::uint64_t stream, std::uint64_t streams)
                : Generator(spec, stream, streams),
                  keys_(std::max<std::uint64_t>(1, spec.region_bytes / std::max<std::uint64_t>(1, spec.value_bytes))),
                  next_key_(stream)
            {
            }

        protected:
            std::optional<Step> produce(SimTime) override
            {
                std::uint64_t key = 0;
                switch (spec_.distribution)
                {
                case KeyDistribution::Gauss:
                {
                    const double mean = static_cast<double>(keys_) / 2.0;
                    const double sd = std::max(1.0, spec_.sd_fraction * static_cast<double>(keys_));
                    std::normal_distribution<double> dist(mean, sd);
                    double x = 0.0;
                    do
                    {
                        x = std::floor(dist(rng_));
                    } while (x < 0.0 || x >= static_cast<double>(keys_));
                    key = static_cast<std::uint64_t>(x);
                    break;
                }
                case KeyDistribution::Random:
                    key = std::uniform_int_distribution<std::uint64_t>(0, keys_ - 1)(rng_);
                    break;
                case KeyDistribution::Sequential:
                    key = next_key_ % keys_;
                    next_key_ += streams_;
                    break;
                }
                const AccessKind rw = draw_rw();
                return make(key * spec_.value_bytes, rw, rw == AccessKind::Write ? kIpSet : kIpGet);
            }

        private:
            std::uint64_t keys_;
            std::uint64_t next_key_;
        };

        // Tiled product sweep: for every A block, each B block is swept once, interleaved with
        // the A block. A blocks are reused at short distance; B is a cyclic sweep.
        class BlockedReuse final : public Generator
        {
        public:
            BlockedReuse(const WorkloadSpec &spec, std::uint64_t stream, std::uint64_t streams)
                : Generator(spec, stream, streams),
                  pages_(std::max<std::uint64_t>(1, spec.block_bytes / kGranule)), k_(stream)
            {
            }

        protected:
            std::optional<Step> produce(SimTime) override
            {
                while (outer_ < spec_.outer_repeats)
                {
                    if (k_ >= pages_)
                    {
                        k_ = stream_;
                        advance();
                        continue;
                    }
                    const std::uint64_t block = spec_.block_bytes;
                    const std::uint64_t a_base = i_ * block;
                    const std::uint64_t b_base = spec_.a_blocks * block + j_ * block;
                    if (!b_turn_)
                    {
                        b_turn_ = true;
                        return make(a_base + k_ * kGranule, draw_rw(), kIpBlockA);
                    }
                    b_turn_ = false;
                    const std::uint64_t k = k_;
                    k_ += streams_;
                    return make(b_base + k * kGranule, AccessKind::Read, kIpBlockB);
                }
                return std::nullopt;
            }

        private:
            void advance()
            {
                if (++rep_ < spec_.inner_repeats)
                {
                    return;
                }
                rep_ = 0;
                if (++j_ < spec_.b_blocks)
                {
                    return;
                }
                j_ = 0;
                if (++i_ < spec_.a_blocks)
                {
                    return;
                }
                i_ = 0;
                ++outer_;
            }

            std::uint64_t pages_;
            std::uint64_t k_;
            std::uint64_t i_ = 0;
            std::uint64_t j_ = 0;
            std::uint64_t rep_ = 0;
            std::uint64_t outer_ = 0;
            bool b_turn_ = false;
        };
    } // namespace

    std::string to_string(WorkloadKind kind)
    {
        switch (kind)
        {
        case WorkloadKind::ColdRatioRandom:
            return "cold_ratio_random";
        case WorkloadKind::AlternatingHalves:
            return "alternating_halves";
        case WorkloadKind::SequentialWrite:
            return "sequential_write";
        case WorkloadKind::Phased:
            return "phased";
        case WorkloadKind::KeyValue:
            return "keyvalue";
        case WorkloadKind::BlockedReuse:
            return "blocked_reuse";
        case WorkloadKind::Trace:
            return "trace";
        }
        return "unknown";
    }

    WorkloadKind workload_kind_from_string(const std::string &name)
    {
        for (auto kind : {WorkloadKind::ColdRatioRandom, WorkloadKind::AlternatingHalves, WorkloadKind::SequentialWrite,
                          WorkloadKind::Phased, WorkloadKind::KeyValue, WorkloadKind::BlockedReuse, WorkloadKind::Trace})
        {
            if (to_string(kind) == name)
            {
                return kind;
            }
        }
        throw std::invalid_argument("unknown workload kind: " + name);
    }

    std::string to_string(KeyDistribution dist)
    {
        switch (dist)
        {
        case KeyDistribution::Gauss:
            return "gauss";
        case KeyDistribution::Random:
            return "random";
        case KeyDistribution::Sequential:
            return "sequential";
        }
        return "unknown";
    }

    KeyDistribution key_distribution_from_string(const std::string &name)
    {
        for (auto d : {KeyDistribution::Gauss, KeyDistribution::Random, KeyDistribution::Sequential})
        {
            if (to_string(d) == name)
            {
                return d;
            }
        }
        throw std::invalid_argument("unknown key distribution: " + name);
    }

    std::unique_ptr<Workload> make_workload(const WorkloadSpec &spec, std::uint64_t stream, std::uint64_t streams)
    {
        if (spec.kind != WorkloadKind::Trace && spec.region_bytes == 0)
        {
            throw std::invalid_argument("workload region_bytes must be positive");
        }
        switch (spec.kind)
        {
        case WorkloadKind::ColdRatioRandom:
            if (spec.hot_bytes == 0 || spec.hot_bytes > spec.region_bytes)
            {
                throw std::invalid_argument("cold_ratio_random: hot_bytes must be in (0, region_bytes]");
            }
            if (spec.cold_ratio < 0.0 || spec.cold_ratio > 1.0)
            {
                throw std::invalid_argument("cold_ratio_random: cold_ratio must be in [0, 1]");
            }
            return std::make_unique<ColdRatioRandom>(spec, stream, streams);
        case WorkloadKind::AlternatingHalves:
            return std::make_unique<AlternatingHalves>(spec, stream, streams);
        case WorkloadKind::SequentialWrite:
            return std::make_unique<SequentialWrite>(spec, stream, streams);
        case WorkloadKind::Phased:
            for (const PhaseSpec &p : spec.phases)
            {
                if (p.bytes == 0 || p.offset + p.bytes > spec.region_bytes)
                {
                    throw std::invalid_argument("phased: phase range outside the region");
                }
            }
            return std::make_unique<Phased>(spec, stream, streams);
        case WorkloadKind::KeyValue:
            return std::make_unique<KeyValue>(spec, stream, streams);
        case WorkloadKind::BlockedReuse:
            if ((spec.a_blocks + spec.b_blocks) * spec.block_bytes > spec.region_bytes)
            {
                throw std::invalid_argument("blocked_reuse: blocks exceed the region");
            }
            return std::make_unique<BlockedReuse>(spec, stream, streams);
        case WorkloadKind::Trace:
        {
            std::ifstream in(spec.trace_path);
            if (!in)
            {
                throw std::runtime_error("cannot open trace " + spec.trace_path);
            }
            auto records = read_trace(in);
            if (streams > 1)
            {
                std::vector<TraceRecord> mine;
                for (std::size_t i = stream; i < records.size(); i += streams)
                {
                    mine.push_back(records[i]);
                }
                records = std::move(mine);
            }
            return std::make_unique<TraceWorkload>(std::move(records));
        }
        }
        throw std::invalid_argument("unknown workload kind");
    }

    std::vector<LayoutRange> initial_layout(const WorkloadSpec &spec)
    {
        const std::uint64_t region = spec.region_bytes;
        if (spec.initial)
        {
            return {LayoutRange{0, region, *spec.initial}};
        }
        switch (spec.kind)
        {
        case WorkloadKind::ColdRatioRandom:
            return {LayoutRange{0, spec.hot_bytes, InitialState::Resident},
                    LayoutRange{spec.hot_bytes, region, InitialState::Swapped}};
        case WorkloadKind::SequentialWrite:
            return {LayoutRange{0, region, InitialState::Swapped}};
        case WorkloadKind::Phased:
            return {LayoutRange{0, region, spec.build_phase ? InitialState::Untouched : InitialState::Resident}};
        case WorkloadKind::BlockedReuse:
            // Operands are filled by the application, so every page enters through a fault.
            return {LayoutRange{0, region, InitialState::Untouched}};
        case WorkloadKind::AlternatingHalves:
        case WorkloadKind::KeyValue:
        case WorkloadKind::Trace:
            return {LayoutRange{0, region, InitialState::Resident}};
        }
        return {};
    }

    double warmup_scramble(bool enabled) { return enabled ? 1.0 : 0.0; }

    std::pair<std::uint64_t, std::uint64_t> footprint(const WorkloadSpec &spec) { return {0, spec.region_bytes}; }

    std::string format_trace_line(const TraceRecord &rec)
    {
        std::ostringstream os;
        os << rec.time << ',' << rec.access.ctx.id << ",0x" << std::hex << rec.access.gva.value << std::dec << ','
           << (rec.access.rw == AccessKind::Write ? 'w' : 'r') << ',' << rec.access.ip;
        return os.str();
    }

    TraceRecord parse_trace_line(const std::string &line)
    {
        std::vector<std::string> fields;
        std::string field;
        std::istringstream is(line);
        while (std::getline(is, field, ','))
        {
            fields.push_back(field);
        }
        if (fields.size() != 5)
        {
            throw std::invalid_argument("trace line needs 5 fields: " + line);
        }
        auto parse_u64 = [&line](std::string s, int base)
        {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            if (base == 16 && (s.starts_with("0x") || s.starts_with("0X")))
            {
                s = s.substr(2);
            }
            std::uint64_t v = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
            if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
            {
                throw std::invalid_argument("bad number in trace line: " + line);
            }
            return v;
        };
        TraceRecord rec{};
        rec.time = parse_u64(fields[0], 10);
        rec.access.ctx = GuestContext{parse_u64(fields[1], 10)};
        rec.access.gva = Gva{parse_u64(fields[2], 16)};
        std::string rw = fields[3];
        rw.erase(std::remove_if(rw.begin(), rw.end(), ::isspace), rw.end());
        if (rw == "r")
        {
            rec.access.rw = AccessKind::Read;
        }
        else if (rw == "w")
        {
            rec.access.rw = AccessKind::Write;
        }
        else
        {
            throw std::invalid_argument("access kind must be r or w: " + line);
        }
        rec.access.ip = parse_u64(fields[4], 10);
        return rec;
    }

    std::vector<TraceRecord> read_trace(std::istream &in)
    {
        std::vector<TraceRecord> out;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line))
        {
            ++lineno;
            if (line.empty() || line[0] == '#')
            {
                continue;
            }
            try
            {
                out.push_back(parse_trace_line(line));
            }
            catch (const std::invalid_argument &e)
            {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        return out;
    }

    void write_trace(std::ostream &out, const std::vector<TraceRecord> &records)
    {
        for (const TraceRecord &r : records)
        {
            out << format_trace_line(r) << '\n';
        }
    }

    std::optional<Step> TraceWorkload::next(SimTime)
    {
        if (pos_ >= records_.size())
        {
            return std::nullopt;
        }
        const TraceRecord &r = records_[pos_++];
        Access a = r.access;
        a.delay = r.time >= last_ ? r.time - last_ : 0;
        last_ = r.time;
        return a;
    }
} // namespace flexswap
