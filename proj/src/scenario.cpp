#include "flexswap/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace flexswap
{
    namespace
    {
        std::string trim(std::string s)
        {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r\n") + 1);
            return s;
        }

        std::string lower(std::string s)
        {
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
            return s;
        }

        // Splits "12.5GiB" into 12.5 and "gib".
        std::pair<double, std::string> split_number(const std::string &text)
        {
            const std::string t = trim(text);
            std::size_t pos = 0;
            double value = 0.0;
            try
            {
                value = std::stod(t, &pos);
            }
            catch (const std::exception &)
            {
                throw std::invalid_argument("not a number: '" + text + "'");
            }
            if (value < 0.0)
            {
                throw std::invalid_argument("negative value: '" + text + "'");
            }
            return {value, lower(trim(t.substr(pos)))};
        }

        int line_of(const YAML::Node &n) { return n.Mark().line; }

        void check_keys(const YAML::Node &node, const std::set<std::string> &allowed, const std::string &where)
        {
            if (!node.IsMap())
            {
                throw ConfigError(where + " must be a mapping", line_of(node));
            }
            for (const auto &kv : node)
            {
                const std::string key = kv.first.as<std::string>();
                if (!allowed.contains(key))
                {
                    throw ConfigError("unknown key '" + key + "' in " + where, line_of(kv.first));
                }
            }
        }

        template <typename F>
        auto guarded(const YAML::Node &node, const std::string &key, F &&f) -> decltype(f(std::string{}))
        {
            try
            {
                return f(node.as<std::string>());
            }
            catch (const ConfigError &)
            {
                throw;
            }
            catch (const std::exception &e)
            {
                throw ConfigError(key + ": " + e.what(), line_of(node));
            }
        }

        std::uint64_t get_size(const YAML::Node &parent, const std::string &key, std::uint64_t fallback)
        {
            const YAML::Node n = parent[key];
            if (!n)
            {
                return fallback;
            }
            return guarded(n, key, [](const std::string &s) { return parse_size(s); });
        }

        SimTime get_duration(const YAML::Node &parent, const std::string &key, SimTime fallback)
        {
            const YAML::Node n = parent[key];
            if (!n)
            {
                return fallback;
            }
            return guarded(n, key, [](const std::string &s) { return parse_duration(s); });
        }

        double get_double(const YAML::Node &parent, const std::string &key, double fallback)
        {
            const YAML::Node n = parent[key];
            if (!n)
            {
                return fallback;
            }
            return guarded(n, key,
                           [](const std::string &s)
                           {
                               std::size_t pos = 0;
                               const double v = std::stod(s, &pos);
                               if (pos != trim(s).size())
                               {
                                   throw std::invalid_argument("not a number: '" + s + "'");
                               }
                               return v;
                           });
        }

        std::uint64_t get_u64(const YAML::Node &parent, const std::string &key, std::uint64_t fallback)
        {
            const double v = get_double(parent, key, static_cast<double>(fallback));
            if (v < 0.0 || v != std::floor(v))
            {
                throw ConfigError(key + ": expected a non-negative integer", line_of(parent[key]));
            }
            return static_cast<std::uint64_t>(v);
        }

        bool get_bool(const YAML::Node &parent, const std::string &key, bool fallback)
        {
            const YAML::Node n = parent[key];
            if (!n)
            {
                return fallback;
            }
            try
            {
                return n.as<bool>();
            }
            catch (const std::exception &)
            {
                throw ConfigError(key + ": expected true or false", line_of(n));
            }
        }

        std::string get_string(const YAML::Node &parent, const std::string &key, const std::string &fallback)
        {
            const YAML::Node n = parent[key];
            return n ? n.as<std::string>() : fallback;
        }

        VmSpec parse_vm(const YAML::Node &n)
        {
            check_keys(n,
                       {"size", "page_size", "hot_latency", "cold_penalty_after_clear", "scan_cost_per_pte",
                        "lru_source", "scramble", "walk_fail_fraction", "walk_latency", "hva_base"},
                       "vm");
            VmSpec vm;
            vm.size = get_size(n, "size", vm.size);
            if (n["page_size"])
            {
                vm.page_size = guarded(n["page_size"], "page_size", [](const std::string &s) { return parse_page_size(s); });
            }
            vm.hot_latency = get_duration(n, "hot_latency", vm.hot_latency);
            vm.cold_penalty_after_clear = get_duration(n, "cold_penalty_after_clear", vm.cold_penalty_after_clear);
            vm.scan_cost_per_pte = get_duration(n, "scan_cost_per_pte", vm.scan_cost_per_pte);
            const std::string src = get_string(n, "lru_source", "exact");
            if (src == "exact")
            {
                vm.lru_source = LruSource::Exact;
            }
            else if (src == "scan")
            {
                vm.lru_source = LruSource::Scan;
            }
            else
            {
                throw ConfigError("lru_source must be exact or scan", line_of(n["lru_source"]));
            }
            vm.scramble = get_double(n, "scramble", vm.scramble);
            vm.walk_fail_fraction = get_double(n, "walk_fail_fraction", vm.walk_fail_fraction);
            vm.walk_latency = get_duration(n, "walk_latency", vm.walk_latency);
            vm.hva_base = get_size(n, "hva_base", vm.hva_base);
            return vm;
        }

        DeviceParams parse_device(const YAML::Node &n)
        {
            check_keys(n,
                       {"profile", "lat_sw_4k", "lat_sw_2m", "io_base_4k", "io_base_2m", "bandwidth_cap",
                        "worker_sw_fraction"},
                       "device");
            DeviceParams d;
            const std::string profile = get_string(n, "profile", "user");
            if (profile == "kernel")
            {
                d = DeviceParams::kernel_4k();
            }
            else if (profile != "user")
            {
                throw ConfigError("device profile must be user or kernel", line_of(n["profile"]));
            }
            d.lat_sw_4k = get_duration(n, "lat_sw_4k", d.lat_sw_4k);
            d.lat_sw_2m = get_duration(n, "lat_sw_2m", d.lat_sw_2m);
            d.io_base_4k = get_duration(n, "io_base_4k", d.io_base_4k);
            d.io_base_2m = get_duration(n, "io_base_2m", d.io_base_2m);
            d.bandwidth_cap = get_double(n, "bandwidth_cap", d.bandwidth_cap);
            d.worker_sw_fraction = get_double(n, "worker_sw_fraction", d.worker_sw_fraction);
            return d;
        }

        ZeroPagePoolConfig parse_zero_pool(const YAML::Node &n)
        {
            check_keys(n, {"capacity", "refill_rate", "zero_cost"}, "zero_pool");
            ZeroPagePoolConfig z;
            z.capacity = get_u64(n, "capacity", z.capacity);
            z.refill_rate = get_double(n, "refill_rate", z.refill_rate);
            z.zero_cost = get_duration(n, "zero_cost", z.zero_cost);
            return z;
        }

        QueueClass parse_class(const YAML::Node &n)
        {
            const std::string s = n.as<std::string>();
            if (s == "fault")
            {
                return QueueClass::Fault;
            }
            if (s == "reclaim")
            {
                return QueueClass::Reclaim;
            }
            if (s == "prefetch")
            {
                return QueueClass::Prefetch;
            }
            throw ConfigError("queue class must be fault, reclaim or prefetch", line_of(n));
        }

        EngineConfig parse_engine(const YAML::Node &n)
        {
            check_keys(n, {"workers", "clean_page_skip", "priority"}, "engine");
            EngineConfig e;
            e.workers = static_cast<unsigned>(get_u64(n, "workers", e.workers));
            e.clean_page_skip = get_bool(n, "clean_page_skip", e.clean_page_skip);
            if (const YAML::Node p = n["priority"])
            {
                if (!p.IsSequence() || p.size() != 3)
                {
                    throw ConfigError("priority must list the three queue classes", line_of(p));
                }
                for (std::size_t i = 0; i < 3; ++i)
                {
                    e.priority[i] = parse_class(p[i]);
                }
                auto sorted = e.priority;
                std::sort(sorted.begin(), sorted.end());
                if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                {
                    throw ConfigError("priority must name each class once", line_of(p));
                }
            }
            return e;
        }

        PolicySpec parse_policy(const YAML::Node &n)
        {
            if (!n.IsMap() || !n["type"])
            {
                throw ConfigError("each policy needs a type", line_of(n));
            }
            const std::string type = n["type"].as<std::string>();
            PolicySpec p;
            if (type == "lru")
            {
                check_keys(n, {"type", "watermark"}, "lru policy");
                p.type = PolicyType::Lru;
                p.lru_watermark = get_size(n, "watermark", 0);
            }
            else if (type == "dt")
            {
                check_keys(n,
                           {"type", "scan_interval", "target_promotion_rate", "initial_threshold", "history",
                            "smoothing"},
                           "dt policy");
                p.type = PolicyType::Dt;
                p.dt.scan_interval = get_duration(n, "scan_interval", p.dt.scan_interval);
                p.dt.target_promotion_rate = get_double(n, "target_promotion_rate", p.dt.target_promotion_rate);
                p.dt.initial_threshold = get_u64(n, "initial_threshold", p.dt.initial_threshold);
                p.dt.history = get_u64(n, "history", p.dt.history);
                p.dt.smoothing = get_u64(n, "smoothing", p.dt.smoothing);
                if (p.dt.scan_interval == 0 || p.dt.history == 0 || p.dt.smoothing == 0)
                {
                    throw ConfigError("dt: scan_interval, history and smoothing must be positive", line_of(n));
                }
            }
            else if (type == "reuse_distance")
            {
                check_keys(n, {"type", "alpha"}, "reuse_distance policy");
                p.type = PolicyType::ReuseDistance;
                p.r_alpha = get_double(n, "alpha", p.r_alpha);
            }
            else if (type == "aggressive")
            {
                check_keys(n, {"type", "tick", "scan_interval", "k", "floor", "trailing", "budget"},
                           "aggressive policy");
                p.type = PolicyType::Aggressive;
                auto &a = p.aggressive;
                a.tick = get_duration(n, "tick", a.tick);
                a.scan_interval = get_duration(n, "scan_interval", a.scan_interval);
                a.k = get_double(n, "k", a.k);
                a.floor_rate = get_double(n, "floor", a.floor_rate);
                a.trailing = get_u64(n, "trailing", a.trailing);
                a.budget = get_size(n, "budget", a.budget);
                if (a.tick == 0 || a.scan_interval == 0)
                {
                    throw ConfigError("aggressive: tick and scan_interval must be positive", line_of(n));
                }
            }
            else if (type == "linearpf")
            {
                check_keys(n, {"type", "mode"}, "linearpf policy");
                p.type = PolicyType::LinearPf;
                const std::string mode = get_string(n, "mode", "gva");
                if (mode == "gva")
                {
                    p.prefetch_mode = PrefetchMode::Gva;
                }
                else if (mode == "hva")
                {
                    p.prefetch_mode = PrefetchMode::Hva;
                }
                else
                {
                    throw ConfigError("linearpf mode must be gva or hva", line_of(n["mode"]));
                }
            }
            else if (type == "wsr")
            {
                check_keys(n, {"type"}, "wsr policy");
                p.type = PolicyType::Wsr;
            }
            else if (type == "cold_keeper")
            {
                check_keys(n, {"type"}, "cold_keeper policy");
                p.type = PolicyType::ColdKeeper;
            }
            else
            {
                throw ConfigError("unknown policy type '" + type + "'", line_of(n["type"]));
            }
            return p;
        }

        InitialState parse_initial(const YAML::Node &n)
        {
            const std::string s = n.as<std::string>();
            if (s == "untouched")
            {
                return InitialState::Untouched;
            }
            if (s == "resident")
            {
                return InitialState::Resident;
            }
            if (s == "swapped")
            {
                return InitialState::Swapped;
            }
            throw ConfigError("initial must be untouched, resident or swapped", line_of(n));
        }

        WorkloadSpec parse_workload(const YAML::Node &n, std::uint64_t seed, bool &scramble)
        {
            check_keys(n,
                       {"kind", "region", "seed", "ctx", "gap", "write_fraction", "max_accesses", "initial", "hot",
                        "cold_ratio", "half_period", "stride", "passes", "build_phase", "phases", "distribution",
                        "sd_fraction", "value_size", "block", "a_blocks", "b_blocks", "inner_repeats",
                        "outer_repeats", "trace", "warmup_scramble"},
                       "workload");
            WorkloadSpec w;
            if (!n["kind"])
            {
                throw ConfigError("workload needs a kind", line_of(n));
            }
            w.kind = guarded(n["kind"], "kind", [](const std::string &s) { return workload_kind_from_string(s); });
            w.region_bytes = get_size(n, "region", 0);
            w.seed = get_u64(n, "seed", seed);
            w.ctx = GuestContext{get_u64(n, "ctx", 1)};
            w.gap = get_duration(n, "gap", 0);
            w.write_fraction = get_double(n, "write_fraction", 0.0);
            w.max_accesses = get_u64(n, "max_accesses", 0);
            if (n["initial"])
            {
                w.initial = parse_initial(n["initial"]);
            }
            w.hot_bytes = get_size(n, "hot", 0);
            w.cold_ratio = get_double(n, "cold_ratio", 0.0);
            w.half_period = get_duration(n, "half_period", w.half_period);
            w.stride_bytes = get_size(n, "stride", w.stride_bytes);
            w.passes = get_u64(n, "passes", w.passes);
            w.build_phase = get_bool(n, "build_phase", w.build_phase);
            if (const YAML::Node phases = n["phases"])
            {
                if (!phases.IsSequence())
                {
                    throw ConfigError("phases must be a list", line_of(phases));
                }
                for (const YAML::Node &ph : phases)
                {
                    check_keys(ph, {"offset", "size", "duration"}, "phase");
                    PhaseSpec spec;
                    spec.offset = get_size(ph, "offset", 0);
                    spec.bytes = get_size(ph, "size", 0);
                    spec.duration = get_duration(ph, "duration", 0);
                    w.phases.push_back(spec);
                }
            }
            if (n["distribution"])
            {
                w.distribution = guarded(n["distribution"], "distribution",
                                         [](const std::string &s) { return key_distribution_from_string(s); });
            }
            w.sd_fraction = get_double(n, "sd_fraction", w.sd_fraction);
            w.value_bytes = get_size(n, "value_size", w.value_bytes);
            w.block_bytes = get_size(n, "block", w.block_bytes);
            w.a_blocks = get_u64(n, "a_blocks", w.a_blocks);
            w.b_blocks = get_u64(n, "b_blocks", w.b_blocks);
            w.inner_repeats = get_u64(n, "inner_repeats", w.inner_repeats);
            w.outer_repeats = get_u64(n, "outer_repeats", w.outer_repeats);
            w.trace_path = get_string(n, "trace", "");
            scramble = get_bool(n, "warmup_scramble", false);
            return w;
        }

        LimitEntry parse_limit(const YAML::Node &n)
        {
            check_keys(n, {"at", "bytes", "fraction_of_vm", "fraction_of_wss", "unlimited"}, "limit");
            LimitEntry e;
            e.at = get_duration(n, "at", 0);
            int given = 0;
            if (n["bytes"])
            {
                e.basis = LimitBasis::Bytes;
                e.value = static_cast<double>(get_size(n, "bytes", 0));
                ++given;
            }
            if (n["fraction_of_vm"])
            {
                e.basis = LimitBasis::FractionOfVm;
                e.value = get_double(n, "fraction_of_vm", 1.0);
                ++given;
            }
            if (n["fraction_of_wss"])
            {
                e.basis = LimitBasis::FractionOfWss;
                e.value = get_double(n, "fraction_of_wss", 1.0);
                ++given;
            }
            if (n["unlimited"] && get_bool(n, "unlimited", false))
            {
                e.basis = LimitBasis::Unlimited;
                ++given;
            }
            if (given != 1)
            {
                throw ConfigError("limit needs exactly one of bytes, fraction_of_vm, fraction_of_wss, unlimited",
                                  line_of(n));
            }
            return e;
        }

        YAML::Node parse_scalar_value(const std::string &value)
        {
            // Let the YAML parser type the value ("true", "[a, b]", "12").
            try
            {
                return YAML::Load(value);
            }
            catch (const YAML::Exception &)
            {
                return YAML::Node(value);
            }
        }
    } // namespace

    std::uint64_t parse_size(const std::string &text)
    {
        const auto [value, unit] = split_number(text);
        double mult = 1.0;
        if (unit.empty() || unit == "b")
        {
            mult = 1.0;
        }
        else if (unit == "k" || unit == "kb" || unit == "kib")
        {
            mult = static_cast<double>(kKiB);
        }
        else if (unit == "m" || unit == "mb" || unit == "mib")
        {
            mult = static_cast<double>(kMiB);
        }
        else if (unit == "g" || unit == "gb" || unit == "gib")
        {
            mult = static_cast<double>(kGiB);
        }
        else if (unit == "t" || unit == "tb" || unit == "tib")
        {
            mult = static_cast<double>(kGiB) * 1024.0;
        }
        else
        {
            throw std::invalid_argument("unknown size unit '" + unit + "'");
        }
        return static_cast<std::uint64_t>(std::llround(value * mult));
    }

    SimTime parse_duration(const std::string &text)
    {
        const auto [value, unit] = split_number(text);
        double mult = 1e9;
        if (unit.empty() || unit == "s")
        {
            mult = 1e9;
        }
        else if (unit == "ms")
        {
            mult = 1e6;
        }
        else if (unit == "us")
        {
            mult = 1e3;
        }
        else if (unit == "ns")
        {
            mult = 1.0;
        }
        else if (unit == "min")
        {
            mult = 60e9;
        }
        else
        {
            throw std::invalid_argument("unknown time unit '" + unit + "'");
        }
        return static_cast<SimTime>(std::llround(value * mult));
    }

    PageSize parse_page_size(const std::string &text)
    {
        const std::uint64_t bytes = parse_size(text);
        if (bytes == bytes_of(PageSize::Small))
        {
            return PageSize::Small;
        }
        if (bytes == bytes_of(PageSize::Huge))
        {
            return PageSize::Huge;
        }
        throw std::invalid_argument("page size must be 4k or 2M");
    }

    std::string to_string(PolicyType type)
    {
        switch (type)
        {
        case PolicyType::Lru:
            return "lru";
        case PolicyType::Dt:
            return "dt";
        case PolicyType::ReuseDistance:
            return "reuse_distance";
        case PolicyType::Aggressive:
            return "aggressive";
        case PolicyType::LinearPf:
            return "linearpf";
        case PolicyType::Wsr:
            return "wsr";
        case PolicyType::ColdKeeper:
            return "cold_keeper";
        }
        return "unknown";
    }

    std::uint64_t working_set_bytes(const WorkloadSpec &spec)
    {
        switch (spec.kind)
        {
        case WorkloadKind::BlockedReuse:
            return (spec.a_blocks + spec.b_blocks) * spec.block_bytes;
        case WorkloadKind::Phased:
        {
            std::uint64_t best = 0;
            for (const PhaseSpec &p : spec.phases)
            {
                best = std::max(best, p.bytes);
            }
            return best == 0 ? spec.region_bytes : best;
        }
        case WorkloadKind::ColdRatioRandom:
            return spec.hot_bytes;
        default:
            return spec.region_bytes;
        }
    }

    std::uint64_t resolve_limit(const LimitEntry &entry, const Scenario &scenario)
    {
        const double page = static_cast<double>(bytes_of(scenario.vm.page_size));
        double bytes = 0.0;
        switch (entry.basis)
        {
        case LimitBasis::Unlimited:
            return ~std::uint64_t{0};
        case LimitBasis::Bytes:
            bytes = entry.value;
            break;
        case LimitBasis::FractionOfVm:
            bytes = entry.value * static_cast<double>(scenario.vm.size);
            break;
        case LimitBasis::FractionOfWss:
            bytes = entry.value * static_cast<double>(working_set_bytes(scenario.workload));
            break;
        }
        // Whole pages only.
        return static_cast<std::uint64_t>(std::floor(bytes / page + 1e-9) * page);
    }

    void apply_override(YAML::Node &root, const std::string &assignment)
    {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0)
        {
            throw ConfigError("override must look like key.path=value: " + assignment);
        }
        const std::string path = trim(assignment.substr(0, eq));
        const std::string value = trim(assignment.substr(eq + 1));
        std::vector<std::string> parts;
        std::stringstream ss(path);
        std::string part;
        while (std::getline(ss, part, '.'))
        {
            parts.push_back(part);
        }
        // yaml-cpp nodes are handles; walking with operator[] on copies edits the document.
        std::vector<YAML::Node> chain{root};
        for (std::size_t i = 0; i + 1 < parts.size(); ++i)
        {
            YAML::Node cur = chain.back();
            const bool index = !parts[i].empty() && std::all_of(parts[i].begin(), parts[i].end(), ::isdigit);
            if (index && cur.IsSequence())
            {
                const std::size_t k = std::stoul(parts[i]);
                if (k >= cur.size())
                {
                    throw ConfigError("override index out of range: " + path);
                }
                chain.push_back(cur[k]);
            }
            else
            {
                chain.push_back(cur[parts[i]]);
            }
        }
        YAML::Node parent = chain.back();
        const std::string &last = parts.back();
        const bool index = !last.empty() && std::all_of(last.begin(), last.end(), ::isdigit);
        if (index && parent.IsSequence())
        {
            const std::size_t k = std::stoul(last);
            if (k >= parent.size())
            {
                throw ConfigError("override index out of range: " + path);
            }
            parent[k] = parse_scalar_value(value);
        }
        else
        {
            parent[last] = parse_scalar_value(value);
        }
    }

    Scenario scenario_from_yaml(const YAML::Node &root)
    {
        check_keys(root,
                   {"name", "seed", "duration", "sample_interval", "stop_when_done", "vm", "device", "zero_pool",
                    "engine", "policies", "workload", "vcpus", "limits", "parameters"},
                   "scenario");
        Scenario s;
        s.name = get_string(root, "name", s.name);
        s.seed = get_u64(root, "seed", s.seed);
        s.duration = get_duration(root, "duration", s.duration);
        s.sample_interval = get_duration(root, "sample_interval", s.sample_interval);
        s.stop_when_done = get_bool(root, "stop_when_done", s.stop_when_done);
        if (root["vm"])
        {
            s.vm = parse_vm(root["vm"]);
        }
        if (root["device"])
        {
            s.device = parse_device(root["device"]);
        }
        if (root["zero_pool"])
        {
            s.zero_pool = parse_zero_pool(root["zero_pool"]);
        }
        if (root["engine"])
        {
            s.engine = parse_engine(root["engine"]);
        }
        if (const YAML::Node pols = root["policies"])
        {
            if (!pols.IsSequence())
            {
                throw ConfigError("policies must be a list", line_of(pols));
            }
            for (const YAML::Node &p : pols)
            {
                s.policies.push_back(parse_policy(p));
            }
        }
        if (!root["workload"])
        {
            throw ConfigError("scenario needs a workload", line_of(root));
        }
        bool scramble = false;
        s.workload = parse_workload(root["workload"], s.seed, scramble);
        if (scramble)
        {
            s.vm.scramble = warmup_scramble(true);
        }
        s.vcpus = static_cast<unsigned>(get_u64(root, "vcpus", 1));
        if (const YAML::Node limits = root["limits"])
        {
            if (!limits.IsSequence())
            {
                throw ConfigError("limits must be a list", line_of(limits));
            }
            SimTime prev = 0;
            for (const YAML::Node &l : limits)
            {
                LimitEntry e = parse_limit(l);
                if (e.at < prev)
                {
                    throw ConfigError("limit schedule times must be sorted", line_of(l));
                }
                prev = e.at;
                s.limits.push_back(e);
            }
        }
        if (const YAML::Node params = root["parameters"])
        {
            check_keys(params,
                       {"scan_interval", "target_promotion_rate", "agg_k", "agg_floor", "agg_budget",
                        "agg_scan_interval", "r_alpha", "lru_watermark"},
                       "parameters");
            for (const auto &kv : params)
            {
                s.parameters[kv.first.as<std::string>()] = get_double(params, kv.first.as<std::string>(), 0.0);
            }
        }
        try
        {
            validate(s);
        }
        catch (const std::invalid_argument &e)
        {
            throw ConfigError(e.what(), line_of(root));
        }
        return s;
    }

    void validate(const Scenario &s)
    {
        const std::uint64_t page = bytes_of(s.vm.page_size);
        if (s.vm.size == 0 || s.vm.size % page != 0)
        {
            throw std::invalid_argument("vm.size must be a positive multiple of the page size");
        }
        if (s.vm.scramble < 0.0 || s.vm.scramble > 1.0)
        {
            throw std::invalid_argument("vm.scramble must be in [0, 1]");
        }
        if (s.vm.walk_fail_fraction < 0.0 || s.vm.walk_fail_fraction > 1.0)
        {
            throw std::invalid_argument("vm.walk_fail_fraction must be in [0, 1]");
        }
        if (s.workload.kind != WorkloadKind::Trace)
        {
            if (s.workload.region_bytes == 0 || s.workload.region_bytes > s.vm.size)
            {
                throw std::invalid_argument("workload.region must be positive and fit in the VM");
            }
        }
        if (s.vcpus == 0)
        {
            throw std::invalid_argument("vcpus must be >= 1");
        }
        if (s.engine.workers == 0)
        {
            throw std::invalid_argument("engine.workers must be >= 1");
        }
        if (s.sample_interval == 0)
        {
            throw std::invalid_argument("sample_interval must be positive");
        }
        if (!std::is_sorted(s.limits.begin(), s.limits.end(),
                            [](const LimitEntry &a, const LimitEntry &b) { return a.at < b.at; }))
        {
            throw std::invalid_argument("limit schedule times must be sorted");
        }
        std::set<PolicyType> seen;
        for (const PolicySpec &p : s.policies)
        {
            if (!seen.insert(p.type).second)
            {
                throw std::invalid_argument("policy listed twice: " + to_string(p.type));
            }
        }
        if (seen.contains(PolicyType::Lru) && seen.contains(PolicyType::ReuseDistance))
        {
            throw std::invalid_argument("lru and reuse_distance are both limit reclaimers; pick one");
        }
        if (seen.contains(PolicyType::ColdKeeper) && s.workload.kind != WorkloadKind::ColdRatioRandom)
        {
            throw std::invalid_argument("cold_keeper needs a cold_ratio_random workload");
        }
    }

    Scenario load_scenario_string(const std::string &text, const std::vector<std::string> &overrides)
    {
        YAML::Node root;
        try
        {
            root = YAML::Load(text);
        }
        catch (const YAML::Exception &e)
        {
            throw ConfigError(e.msg, e.mark.line);
        }
        for (const std::string &o : overrides)
        {
            apply_override(root, o);
        }
        try
        {
            return scenario_from_yaml(root);
        }
        catch (const YAML::Exception &e)
        {
            throw ConfigError(e.msg, e.mark.line);
        }
    }

    Scenario load_scenario_file(const std::string &path, const std::vector<std::string> &overrides)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw ConfigError("cannot open scenario file " + path);
        }
        std::stringstream ss;
        ss << in.rdbuf();
        try
        {
            return load_scenario_string(ss.str(), overrides);
        }
        catch (const ConfigError &e)
        {
            throw ConfigError(path + ": " + e.what());
        }
    }
} // namespace flexswap
