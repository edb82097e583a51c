#include "property_harness.hpp"

#include "flexswap/address_model.hpp"
#include "flexswap/event_loop.hpp"
#include "flexswap/policies/lru.hpp"
#include "flexswap/policies/reuse_distance.hpp"
#include "flexswap/policy_engine.hpp"
#include "flexswap/storage_model.hpp"
#include "flexswap/vm_memory.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <vector>

namespace flexswap::proptest
{
    std::string to_string(Invariant inv)
    {
        switch (inv)
        {
        case Invariant::LimitSafety:
            return "limit-safety";
        case Invariant::NoRedundantIo:
            return "no-redundant-io";
        case Invariant::LockSafety:
            return "lock-safety";
        case Invariant::Accounting:
            return "accounting";
        case Invariant::Determinism:
            return "determinism";
        }
        return "unknown";
    }

    namespace
    {
        enum class Op
        {
            Fault,
            Prefetch,
            Reclaim,
            Limit,
            Lock,
            Unlock,
            Advance,
        };

        struct Weights
        {
            std::vector<double> w;
        };

        Weights weights_for(Invariant inv)
        {
            // Fault, Prefetch, Reclaim, Limit, Lock, Unlock, Advance
            switch (inv)
            {
            case Invariant::LimitSafety:
                return {{30, 15, 10, 15, 5, 5, 20}};
            case Invariant::LockSafety:
                return {{25, 10, 20, 8, 15, 10, 12}};
            case Invariant::NoRedundantIo:
                return {{25, 25, 25, 5, 4, 4, 12}};
            default:
                return {{30, 15, 15, 8, 6, 6, 20}};
            }
        }

        enum class LockState
        {
            Pending,
            Held,
        };

        class Run
        {
        public:
            Run(Invariant inv, std::uint64_t seed, const HarnessConfig &config)
                : inv_(inv), config_(config), rng_(seed),
                  ps_(rng_() % 2 == 0 ? PageSize::Small : PageSize::Huge),
                  space_(HostMapping(0, config.pages * bytes_of(ps_)))
            {
                space_.register_context(GuestPageTable::build(ctx_, seed, config.pages, 0.0, ps_));
                VmMemoryConfig mc;
                mc.page_size = ps_;
                mc.n_pages = config.pages;
                memory_ = std::make_unique<VmMemory>(mc, space_);
                for (PageIndex p = 0; p < config.pages; ++p)
                {
                    memory_->set_initial_state(p, static_cast<InitialState>(rng_() % 3));
                }
                ZeroPagePoolConfig zc;
                zc.capacity = rng_() % 4;
                pool_ = std::make_unique<ZeroPagePool>(zc);
                EngineConfig ec;
                ec.workers = 1 + static_cast<unsigned>(rng_() % 3);
                ec.clean_page_skip = rng_() % 4 != 0;
                engine_ = std::make_unique<PolicyEngine>(loop_, *memory_, space_, device_, *pool_, ec);
                switch (rng_() % 3)
                {
                case 0:
                    break;
                case 1: {
                    auto lru = std::make_shared<LruReclaimer>(rng_() % 2 == 0 ? 0 : memory_->page_bytes());
                    engine_->set_limit_reclaimer(lru.get());
                    engine_->register_policy(lru);
                    break;
                }
                default: {
                    auto r = std::make_shared<ReuseDistanceReclaimer>();
                    engine_->set_limit_reclaimer(r.get());
                    engine_->register_policy(r);
                    break;
                }
                }
                engine_->sync_initial_state();
                engine_->enable_logs(true);
                loop_.enable_trace(inv == Invariant::Determinism);
                loop_.set_observer([this](const FiredEvent &) { check_continuous(); });
            }

            SequenceResult execute()
            {
                SequenceResult out;
                try
                {
                    set_limit(pick_limit_pages());
                    check_continuous();
                    const Weights w = weights_for(inv_);
                    std::discrete_distribution<int> pick(w.w.begin(), w.w.end());
                    for (std::size_t i = 0; i < config_.ops && failure_.empty(); ++i)
                    {
                        step(static_cast<Op>(pick(rng_)));
                        check_continuous();
                    }
                    // Release every lock so the queue can drain.
                    loop_.run_to_completion();
                    for (auto &[page, st] : locks_)
                    {
                        engine_->unlock_page(page);
                    }
                    locks_.clear();
                    loop_.run_to_completion();
                    check_continuous();
                    check_final();
                }
                catch (const DeadlockDetected &)
                {
                    out.deadlock = true;
                }
                catch (const std::exception &e)
                {
                    fail(std::string("exception: ") + e.what());
                }
                out.ok = failure_.empty();
                out.failure = failure_;
                out.fingerprint = fingerprint();
                return out;
            }

        private:
            std::uint64_t pick_limit_pages()
            {
                const std::uint64_t lo = config_.max_locks + 2;
                const std::uint64_t hi = std::max(lo, config_.pages);
                return lo + rng_() % (hi - lo + 1);
            }

            void set_limit(std::uint64_t pages)
            {
                engine_->set_memory_limit(pages * memory_->page_bytes());
            }

            PageIndex any_page() { return rng_() % config_.pages; }

            void touch(PageIndex page, AccessKind rw, std::uint64_t ip, int depth)
            {
                const AccessResult r = memory_->access_page(page, ctx_, Gva{page * memory_->page_bytes()}, rw, ip,
                                                            loop_.now());
                if (const auto *ev = std::get_if<FaultEvent>(&r))
                {
                    if (depth > 4)
                    {
                        return;
                    }
                    engine_->submit_fault(*ev,
                                          [this, page, rw, ip, depth]
                                          {
                                              loop_.schedule(0, EventKind::Generic,
                                                             [this, page, rw, ip, depth] { touch(page, rw, ip, depth + 1); });
                                          });
                }
            }

            void step(Op op)
            {
                switch (op)
                {
                case Op::Fault:
                    touch(any_page(), rng_() % 2 == 0 ? AccessKind::Read : AccessKind::Write, rng_() % 4, 0);
                    break;
                case Op::Prefetch:
                    engine_->prefetch(any_page());
                    break;
                case Op::Reclaim:
                    engine_->reclaim(any_page());
                    break;
                case Op::Limit:
                    if (rng_() % 8 == 0)
                    {
                        engine_->set_memory_limit(~std::uint64_t{0});
                    }
                    else
                    {
                        set_limit(pick_limit_pages());
                    }
                    break;
                case Op::Lock: {
                    if (locks_.size() >= config_.max_locks)
                    {
                        break;
                    }
                    const PageIndex p = any_page();
                    if (locks_.contains(p))
                    {
                        break;
                    }
                    locks_[p] = LockState::Pending;
                    engine_->lock_page(p,
                                       [this, p]
                                       {
                                           auto it = locks_.find(p);
                                           if (it != locks_.end())
                                           {
                                               it->second = LockState::Held;
                                               check_lock(p);
                                           }
                                       });
                    break;
                }
                case Op::Unlock: {
                    std::vector<PageIndex> held;
                    for (const auto &[p, st] : locks_)
                    {
                        if (st == LockState::Held)
                        {
                            held.push_back(p);
                        }
                    }
                    if (held.empty())
                    {
                        break;
                    }
                    const PageIndex p = held[rng_() % held.size()];
                    engine_->unlock_page(p);
                    locks_.erase(p);
                    break;
                }
                case Op::Advance: {
                    static constexpr SimTime kSteps[] = {0, kMicrosecond, 20 * kMicrosecond, 100 * kMicrosecond,
                                                         kMillisecond, 5 * kMillisecond};
                    loop_.run_until(loop_.now() + kSteps[rng_() % std::size(kSteps)]);
                    break;
                }
                }
            }

            void fail(const std::string &what)
            {
                if (failure_.empty())
                {
                    std::ostringstream os;
                    os << "t=" << loop_.now() << "ns: " << what;
                    failure_ = os.str();
                }
            }

            void check_lock(PageIndex p)
            {
                const PageFrame &f = memory_->frame(p);
                if (f.state != Residency::Resident || !f.mapped || !f.locked)
                {
                    fail("held lock on page " + std::to_string(p) + " is not resident and mapped");
                }
            }

            void check_continuous()
            {
                if (inv_ == Invariant::Accounting)
                {
                    const std::uint64_t incr = engine_->get_memory_usage();
                    const std::uint64_t recount = engine_->recount_usage();
                    if (incr != recount)
                    {
                        fail("usage " + std::to_string(incr) + " != recount " + std::to_string(recount));
                    }
                    std::uint64_t resident = 0;
                    for (PageIndex p = 0; p < memory_->page_count(); ++p)
                    {
                        resident += memory_->frame(p).state == Residency::Resident ? 1 : 0;
                    }
                    if (resident != memory_->resident_pages())
                    {
                        fail("resident_pages " + std::to_string(memory_->resident_pages()) + " != recount " +
                             std::to_string(resident));
                    }
                }
                if (inv_ == Invariant::LockSafety)
                {
                    for (const auto &[p, st] : locks_)
                    {
                        if (st == LockState::Held)
                        {
                            check_lock(p);
                        }
                    }
                }
            }

            void check_final()
            {
                if (inv_ == Invariant::LimitSafety)
                {
                    if (!engine_->idle())
                    {
                        fail("engine not idle after drain");
                    }
                    if (memory_->resident_bytes() > engine_->get_memory_limit())
                    {
                        fail("resident " + std::to_string(memory_->resident_bytes()) + " > limit " +
                             std::to_string(engine_->get_memory_limit()));
                    }
                    for (PageIndex p = 0; p < memory_->page_count(); ++p)
                    {
                        const PageFrame &f = memory_->frame(p);
                        if (f.state != f.desired_state)
                        {
                            fail("page " + std::to_string(p) + " did not converge to its desired state");
                        }
                    }
                }
                if (inv_ == Invariant::NoRedundantIo)
                {
                    std::map<PageIndex, std::uint64_t> ops;
                    std::map<PageIndex, std::uint64_t> changes;
                    for (const DeviceOp &op : engine_->device_log())
                    {
                        ++ops[op.page];
                    }
                    for (const DequeueRecord &r : engine_->dequeue_log())
                    {
                        if (r.state != r.desired)
                        {
                            ++changes[r.page];
                        }
                    }
                    for (const auto &[p, n] : ops)
                    {
                        if (n > changes[p])
                        {
                            fail("page " + std::to_string(p) + ": " + std::to_string(n) + " device ops for " +
                                 std::to_string(changes[p]) + " state changes");
                        }
                    }
                }
            }

            std::string fingerprint() const
            {
                if (inv_ != Invariant::Determinism)
                {
                    return {};
                }
                std::ostringstream os;
                for (const FiredEvent &e : loop_.trace())
                {
                    os << e.fire_at << ' ' << e.seq << ' ' << static_cast<int>(e.kind) << '\n';
                }
                for (const DeviceOp &op : engine_->device_log())
                {
                    os << "io " << op.time << ' ' << op.page << ' ' << static_cast<int>(op.dir) << '\n';
                }
                for (const DequeueRecord &r : engine_->dequeue_log())
                {
                    os << "dq " << r.time << ' ' << r.page << ' ' << static_cast<int>(r.cls) << '\n';
                }
                for (PageIndex p = 0; p < memory_->page_count(); ++p)
                {
                    const PageFrame &f = memory_->frame(p);
                    os << "pg " << p << ' ' << static_cast<int>(f.state) << f.mapped << f.dirty_bit << f.backed
                       << ' ' << f.lru_stamp << '\n';
                }
                const EngineStats &s = engine_->stats();
                os << s.faults << ' ' << s.major_faults << ' ' << s.minor_faults << ' ' << s.bytes_read << ' '
                   << s.bytes_written << ' ' << loop_.now() << '\n';
                return os.str();
            }

            Invariant inv_;
            HarnessConfig config_;
            std::mt19937_64 rng_;
            PageSize ps_;
            GuestContext ctx_{1};
            EventLoop loop_;
            AddressSpace space_;
            std::unique_ptr<VmMemory> memory_;
            DeviceModel device_;
            std::unique_ptr<ZeroPagePool> pool_;
            std::unique_ptr<PolicyEngine> engine_;
            std::map<PageIndex, LockState> locks_;
            std::string failure_;
        };
    } // namespace

    SequenceResult run_sequence(Invariant inv, std::uint64_t seed, const HarnessConfig &config)
    {
        if (inv != Invariant::Determinism)
        {
            return Run(inv, seed, config).execute();
        }
        SequenceResult a = Run(inv, seed, config).execute();
        const SequenceResult b = Run(inv, seed, config).execute();
        if (a.deadlock != b.deadlock || a.fingerprint != b.fingerprint)
        {
            a.ok = false;
            a.failure = "two runs of seed " + std::to_string(seed) + " diverged";
        }
        return a;
    }

    SuiteResult run_suite(Invariant inv, std::size_t sequences, std::uint64_t base_seed, const HarnessConfig &config)
    {
        const auto t0 = std::chrono::steady_clock::now();
        SuiteResult out;
        for (std::size_t i = 0; i < sequences; ++i)
        {
            const std::uint64_t seed = splitmix64(base_seed + i);
            const SequenceResult r = run_sequence(inv, seed, config);
            ++out.sequences;
            out.deadlocks += r.deadlock ? 1 : 0;
            if (!r.ok)
            {
                if (out.failures == 0)
                {
                    out.first_failure = "seed " + std::to_string(seed) + ": " + r.failure;
                }
                ++out.failures;
            }
        }
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }
} // namespace flexswap::proptest
