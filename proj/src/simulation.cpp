#include "flexswap/simulation.hpp"

#include "flexswap/policies/aggressive.hpp"
#include "flexswap/policies/dt_reclaimer.hpp"
#include "flexswap/policies/linear_prefetch.hpp"
#include "flexswap/policies/lru.hpp"
#include "flexswap/policies/reuse_distance.hpp"
#include "flexswap/policies/wsr.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace flexswap
{
    struct Simulation::Vcpu
    {
        std::unique_ptr<Workload> workload;
        std::optional<Access> pending;
        // Local clock; runs ahead of the loop while accesses hit.
        SimTime t = 0;
        bool done = false;
        bool waiting = false;
        SimTime finished_at = 0;
        std::uint64_t accesses = 0;
        std::uint64_t dropped = 0;
        double latency_sum = 0.0;
    };

    Simulation::Simulation(Scenario scenario, SimulationOptions options)
        : scenario_(std::move(scenario)), options_(options)
    {
        validate(scenario_);
        const VmSpec &vm = scenario_.vm;
        const PageSize ps = vm.page_size;
        const std::uint64_t n_pages = vm.size / bytes_of(ps);

        space_ = std::make_unique<AddressSpace>(HostMapping(vm.hva_base, vm.size));
        space_->register_context(
            GuestPageTable::build(scenario_.workload.ctx, scenario_.seed, n_pages, vm.scramble, ps));
        space_->set_walk_failures(vm.walk_fail_fraction, scenario_.seed);
        space_->set_walk_latency(vm.walk_latency);

        VmMemoryConfig mc;
        mc.page_size = ps;
        mc.n_pages = n_pages;
        mc.hot_latency = vm.hot_latency;
        mc.cold_penalty_after_clear = vm.cold_penalty_after_clear;
        mc.scan_cost_per_pte = vm.scan_cost_per_pte;
        mc.lru_source = vm.lru_source;
        memory_ = std::make_unique<VmMemory>(mc, *space_);
        apply_layout();

        device_ = std::make_unique<DeviceModel>(scenario_.device);
        zero_pool_ = std::make_unique<ZeroPagePool>(scenario_.zero_pool);
        loop_.enable_trace(options_.trace_events);
        engine_ = std::make_unique<PolicyEngine>(loop_, *memory_, *space_, *device_, *zero_pool_, scenario_.engine);
        engine_->enable_logs(options_.engine_logs);
        build_policies();

        for (const auto &[name, value] : scenario_.parameters)
        {
            if (!engine_->parameters().contains(name))
            {
                throw ConfigError("parameter '" + name + "' is not registered by any configured policy");
            }
            engine_->parameters().set(name, value);
        }

        for (unsigned i = 0; i < scenario_.vcpus; ++i)
        {
            auto v = std::make_unique<Vcpu>();
            if (scenario_.workload.kind == WorkloadKind::Trace)
            {
                std::ifstream in(scenario_.workload.trace_path);
                if (!in)
                {
                    throw ConfigError("cannot open trace " + scenario_.workload.trace_path);
                }
                v->workload = std::make_unique<TraceWorkload>(read_trace(in));
            }
            else
            {
                v->workload = make_workload(scenario_.workload, i, scenario_.vcpus);
            }
            vcpus_.push_back(std::move(v));
        }
    }

    Simulation::~Simulation() = default;

    void Simulation::apply_layout()
    {
        if (scenario_.workload.kind == WorkloadKind::Trace)
        {
            return;
        }
        const std::uint64_t pb = memory_->page_bytes();
        for (const LayoutRange &r : initial_layout(scenario_.workload))
        {
            for (std::uint64_t g = r.begin / pb * pb; g < r.end; g += pb)
            {
                if (auto page = memory_->page_of(scenario_.workload.ctx, Gva{g}))
                {
                    memory_->set_initial_state(*page, r.state);
                }
            }
        }
    }

    std::vector<PageIndex> Simulation::pages_of_range(std::uint64_t begin, std::uint64_t end) const
    {
        const std::uint64_t pb = memory_->page_bytes();
        std::set<PageIndex> pages;
        for (std::uint64_t g = begin / pb * pb; g < end; g += pb)
        {
            if (auto page = memory_->page_of(scenario_.workload.ctx, Gva{g}))
            {
                pages.insert(*page);
            }
        }
        return {pages.begin(), pages.end()};
    }

    void Simulation::build_policies()
    {
        LimitReclaimer *reclaimer = nullptr;
        for (const PolicySpec &spec : scenario_.policies)
        {
            std::shared_ptr<Policy> p;
            switch (spec.type)
            {
            case PolicyType::Lru:
            {
                auto lru = std::make_shared<LruReclaimer>(spec.lru_watermark);
                reclaimer = reclaimer ? reclaimer : lru.get();
                p = lru;
                break;
            }
            case PolicyType::ReuseDistance:
            {
                auto r = std::make_shared<ReuseDistanceReclaimer>(spec.r_alpha);
                reclaimer = reclaimer ? reclaimer : r.get();
                p = r;
                break;
            }
            case PolicyType::Dt:
                p = std::make_shared<DtReclaimer>(spec.dt);
                break;
            case PolicyType::Aggressive:
                p = std::make_shared<AggressiveReclaimer>(spec.aggressive);
                break;
            case PolicyType::LinearPf:
                p = std::make_shared<LinearPrefetcher>(spec.prefetch_mode);
                break;
            case PolicyType::Wsr:
                p = std::make_shared<WorkingSetRestore>();
                break;
            case PolicyType::ColdKeeper:
            {
                const WorkloadSpec &w = scenario_.workload;
                const auto pages = pages_of_range(w.hot_bytes, w.region_bytes);
                if (pages.empty())
                {
                    throw ConfigError("cold_keeper: workload has no cold region");
                }
                if (pages.back() - pages.front() + 1 != pages.size())
                {
                    throw ConfigError("cold_keeper needs a contiguous cold region (scramble 0)");
                }
                p = std::make_shared<ColdRegionKeeper>(pages.front(), pages.size());
                break;
            }
            }
            policies_.push_back(p);
            engine_->register_policy(p);
        }
        engine_->set_limit_reclaimer(reclaimer);
    }

    void Simulation::schedule_limits()
    {
        for (const LimitEntry &e : scenario_.limits)
        {
            const std::uint64_t bytes = resolve_limit(e, scenario_);
            loop_.schedule_at(e.at, EventKind::LimitChange, [this, bytes] { engine_->set_memory_limit(bytes); });
        }
    }

    void Simulation::start()
    {
        if (started_)
        {
            return;
        }
        started_ = true;
        schedule_limits();
        for (auto &v : vcpus_)
        {
            Vcpu *raw = v.get();
            loop_.schedule_at(0, EventKind::WorkloadAccess, [this, raw] { step_vcpu(*raw); });
        }
        next_sample_ = scenario_.sample_interval;
        peak_resident_ = memory_->resident_bytes();
    }

    // Runs accesses from the vCPU's local clock. Hits are batched as long as the local clock
    // stays before the loop horizon; a fault hands the access to the engine and the vCPU
    // sleeps until the page is mapped, then retries it.
    void Simulation::step_vcpu(Vcpu &v)
    {
        bool first = true;
        while (!v.done)
        {
            if (!v.pending)
            {
                std::optional<Step> step = v.workload->next(v.t);
                if (!step)
                {
                    v.done = true;
                    v.finished_at = v.t;
                    return;
                }
                if (const Marker *m = std::get_if<Marker>(&*step))
                {
                    const bool seen = std::any_of(markers_.begin(), markers_.end(),
                                                  [&](const MarkerRecord &r) { return r.name == m->name; });
                    if (!seen)
                    {
                        markers_.push_back({m->name, v.t});
                    }
                    continue;
                }
                v.pending = std::get<Access>(*step);
                v.t += v.pending->delay;
            }
            const bool at_now = v.t <= loop_.now();
            if (!(first && at_now) && v.t >= loop_.horizon())
            {
                loop_.schedule_at(std::max(v.t, loop_.now()), EventKind::WorkloadAccess, [this, &v] { step_vcpu(v); });
                return;
            }
            first = false;
            const Access a = *v.pending;
            AccessResult res;
            try
            {
                res = memory_->access(a.ctx, a.gva, a.rw, a.ip, v.t);
            }
            catch (const NoTranslation &)
            {
                ++v.dropped;
                v.pending.reset();
                continue;
            }
            if (const Hit *h = std::get_if<Hit>(&res))
            {
                v.t += h->latency;
                v.latency_sum += static_cast<double>(h->latency);
                ++v.accesses;
                v.pending.reset();
                continue;
            }
            if (v.t > loop_.now())
            {
                // Fault ahead of the loop: replay it when the loop catches up.
                loop_.schedule_at(v.t, EventKind::WorkloadAccess, [this, &v] { step_vcpu(v); });
                return;
            }
            FaultEvent ev = std::get<FaultEvent>(res);
            ev.time = loop_.now();
            const SimTime fault_at = loop_.now();
            v.waiting = true;
            engine_->submit_fault(ev,
                                  [this, &v, fault_at]
                                  {
                                      v.latency_sum += static_cast<double>(loop_.now() - fault_at);
                                      v.t = loop_.now();
                                      v.waiting = false;
                                      loop_.schedule(0, EventKind::FaultCompletion, [this, &v] { step_vcpu(v); });
                                  });
            return;
        }
    }

    bool Simulation::workload_done() const
    {
        return std::all_of(vcpus_.begin(), vcpus_.end(), [](const auto &v) { return v->done; });
    }

    std::uint64_t Simulation::accesses() const noexcept
    {
        std::uint64_t n = 0;
        for (const auto &v : vcpus_)
        {
            n += v->accesses;
        }
        return n;
    }

    std::optional<SimTime> Simulation::marker_time(const std::string &name) const
    {
        for (const MarkerRecord &m : markers_)
        {
            if (m.name == name)
            {
                return m.time;
            }
        }
        return std::nullopt;
    }

    void Simulation::take_sample()
    {
        const EngineStats &st = engine_->stats();
        Sample s;
        s.time = loop_.now();
        s.resident_bytes = memory_->resident_bytes();
        s.usage_bytes = engine_->get_memory_usage();
        s.limit_bytes = engine_->get_memory_limit();
        s.faults = st.faults;
        s.major_faults = st.major_faults;
        s.minor_faults = st.minor_faults;
        s.refaults = st.refaults;
        s.read_bytes = st.bytes_read;
        s.written_bytes = st.bytes_written;
        s.accesses = accesses();
        s.prefetches_accepted = st.prefetch_accepted;
        s.reclaims_accepted = st.reclaim_accepted;
        const double span = to_seconds(s.time - last_sample_.time);
        if (span > 0.0)
        {
            s.fault_rate = static_cast<double>(s.faults - last_sample_.faults) / span;
            s.io_throughput =
                static_cast<double>(s.read_bytes + s.written_bytes - last_sample_.read_bytes - last_sample_.written_bytes) /
                span;
        }
        peak_resident_ = std::max(peak_resident_, s.resident_bytes);
        samples_.push_back(s);
        last_sample_ = s;
    }

    void Simulation::advance_to(SimTime t)
    {
        start();
        t = std::min(t, scenario_.duration);
        while (loop_.now() < t || (loop_.now() == t && next_sample_ == t))
        {
            if (scenario_.stop_when_done && workload_done())
            {
                return;
            }
            const SimTime target = std::min(t, next_sample_);
            loop_.run_until(target);
            if (target == next_sample_)
            {
                take_sample();
                next_sample_ += scenario_.sample_interval;
            }
            if (loop_.now() >= t)
            {
                break;
            }
        }
    }

    RunResult Simulation::finish()
    {
        start();
        advance_to(scenario_.duration);
        const SimTime end = loop_.now();
        if (samples_.empty() ? end > 0 : samples_.back().time != end)
        {
            take_sample();
        }

        RunResult r;
        r.scenario = scenario_.name;
        r.seed = scenario_.seed;
        r.page_size = scenario_.vm.page_size;
        r.vm_bytes = scenario_.vm.size;
        r.duration = scenario_.duration;
        r.end_time = end;
        r.completed = workload_done();
        r.runtime = end;
        if (r.completed)
        {
            r.runtime = 0;
            for (const auto &v : vcpus_)
            {
                r.runtime = std::max(r.runtime, v->finished_at);
            }
        }
        r.samples = samples_;
        r.markers = markers_;
        r.stats = engine_->stats();
        double latency = 0.0;
        for (const auto &v : vcpus_)
        {
            r.accesses += v->accesses;
            r.dropped_accesses += v->dropped;
            latency += v->latency_sum;
        }
        r.mean_access_latency_ns = r.accesses ? latency / static_cast<double>(r.accesses) : 0.0;
        r.final_resident_bytes = memory_->resident_bytes();
        r.peak_resident_bytes = std::max(peak_resident_, r.final_resident_bytes);
        r.scanner_cpu = memory_->scanner_cpu();
        r.ptes_scanned = memory_->ptes_scanned();
        r.policies = policy_counters();
        return r;
    }

    RunResult Simulation::run()
    {
        start();
        return finish();
    }

    PolicyCounters Simulation::policy_counters() const
    {
        PolicyCounters out;
        for (const auto &p : policies_)
        {
            auto &c = out[p->name()];
            if (auto *dt = dynamic_cast<const DtReclaimer *>(p.get()))
            {
                c["threshold"] = static_cast<double>(dt->threshold());
                c["intervals"] = static_cast<double>(dt->interval_index());
                c["reclaims_requested"] = static_cast<double>(dt->reclaims_requested());
                c["wss_pages"] = static_cast<double>(dt->wss_pages());
            }
            else if (auto *lru = dynamic_cast<const LruReclaimer *>(p.get()))
            {
                c["watermark_bytes"] = static_cast<double>(lru->watermark());
                c["proactive_reclaims"] = static_cast<double>(lru->proactive_reclaims());
            }
            else if (auto *rd = dynamic_cast<const ReuseDistanceReclaimer *>(p.get()))
            {
                c["ert_entries"] = static_cast<double>(rd->table_size());
            }
            else if (auto *agg = dynamic_cast<const AggressiveReclaimer *>(p.get()))
            {
                c["episodes"] = static_cast<double>(agg->episodes());
                c["reclaims_requested"] = static_cast<double>(agg->reclaims_requested());
            }
            else if (auto *pf = dynamic_cast<const LinearPrefetcher *>(p.get()))
            {
                c["issued"] = static_cast<double>(pf->issued());
                c["accepted"] = static_cast<double>(pf->accepted());
                c["untranslatable"] = static_cast<double>(pf->untranslatable());
            }
            else if (auto *wsr = dynamic_cast<const WorkingSetRestore *>(p.get()))
            {
                c["snapshot_pages"] = static_cast<double>(wsr->snapshot().size());
                c["prefetches_accepted"] = static_cast<double>(wsr->prefetches_accepted());
            }
        }
        return out;
    }

    RunResult run_scenario(const Scenario &scenario, SimulationOptions options)
    {
        Simulation sim(scenario, options);
        return sim.run();
    }
} // namespace flexswap
