#include "flexswap/workloads.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace flexswap;

namespace
{
    std::vector<Access> accesses(Workload &w, std::size_t n, SimTime now = 0)
    {
        std::vector<Access> out;
        while (out.size() < n)
        {
            const auto s = w.next(now);
            if (!s)
            {
                break;
            }
            if (const auto *a = std::get_if<Access>(&*s))
            {
                out.push_back(*a);
            }
        }
        return out;
    }

    std::vector<Step> steps(Workload &w, std::size_t n, SimTime now = 0)
    {
        std::vector<Step> out;
        while (out.size() < n)
        {
            auto s = w.next(now);
            if (!s)
            {
                break;
            }
            out.push_back(std::move(*s));
        }
        return out;
    }

    WorkloadSpec cold_spec(double r)
    {
        WorkloadSpec s;
        s.kind = WorkloadKind::ColdRatioRandom;
        s.region_bytes = 64 * kMiB;
        s.hot_bytes = 16 * kMiB;
        s.cold_ratio = r;
        s.seed = 9;
        return s;
    }

    // Upper 0.1% point of chi-square, Wilson-Hilferty approximation.
    double chi2_critical(double df)
    {
        const double z = 3.090;
        const double a = 2.0 / (9.0 * df);
        return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
    }
} // namespace

TEST(ColdRatioRandom, ZeroRatioStaysHot)
{
    auto w = make_workload(cold_spec(0.0));
    for (const Access &a : accesses(*w, 100000))
    {
        ASSERT_LT(a.gva.value, 16 * kMiB);
    }
}

TEST(ColdRatioRandom, ColdHitsFollowBinomial)
{
    WorkloadSpec spec = cold_spec(1e-4);
    spec.max_accesses = 10'000'000;
    auto w = make_workload(spec);
    std::uint64_t cold = 0;
    std::uint64_t n = 0;
    while (auto s = w->next(0))
    {
        const Access &a = std::get<Access>(*s);
        cold += a.gva.value >= spec.hot_bytes ? 1 : 0;
        ++n;
    }
    ASSERT_EQ(n, 10'000'000u);
    const double sigma = std::sqrt(1e7 * 1e-4 * (1 - 1e-4));
    EXPECT_NEAR(static_cast<double>(cold), 1000.0, 3 * sigma);
}

TEST(ColdRatioRandom, SeparateIpTagsForHotAndCold)
{
    auto w = make_workload(cold_spec(0.5));
    std::set<std::uint64_t> hot_ips;
    std::set<std::uint64_t> cold_ips;
    for (const Access &a : accesses(*w, 1000))
    {
        (a.gva.value >= 16 * kMiB ? cold_ips : hot_ips).insert(a.ip);
    }
    ASSERT_EQ(hot_ips.size(), 1u);
    ASSERT_EQ(cold_ips.size(), 1u);
    EXPECT_NE(*hot_ips.begin(), *cold_ips.begin());
}

TEST(AlternatingHalves, HalfPerPeriod)
{
    WorkloadSpec spec;
    spec.kind = WorkloadKind::AlternatingHalves;
    spec.region_bytes = 8 * kMiB;
    auto w = make_workload(spec);
    const auto first = steps(*w, 1, 0);
    ASSERT_TRUE(std::holds_alternative<Marker>(first[0]));
    EXPECT_EQ(std::get<Marker>(first[0]).name, "half_0");
    for (const Access &a : accesses(*w, 1000, 59 * kSecond))
    {
        ASSERT_LT(a.gva.value, 4 * kMiB);
    }
    for (const Access &a : accesses(*w, 1000, 61 * kSecond))
    {
        ASSERT_GE(a.gva.value, 4 * kMiB);
        ASSERT_LT(a.gva.value, 8 * kMiB);
    }
}

TEST(SequentialWrite, PageStrideWritesWithPassMarkers)
{
    WorkloadSpec spec;
    spec.kind = WorkloadKind::SequentialWrite;
    spec.region_bytes = 16 * kKiB;
    spec.passes = 2;
    spec.gap = 100 * kMicrosecond;
    auto w = make_workload(spec);
    std::vector<std::string> seen;
    while (auto s = w->next(0))
    {
        if (const auto *m = std::get_if<Marker>(&*s))
        {
            seen.push_back(m->name);
        }
        else
        {
            const Access &a = std::get<Access>(*s);
            EXPECT_EQ(a.rw, AccessKind::Write);
            EXPECT_EQ(a.delay, 100 * kMicrosecond);
            seen.push_back(std::to_string(a.gva.value / 4096));
        }
    }
    EXPECT_EQ(seen, (std::vector<std::string>{"pass_0", "0", "1", "2", "3", "pass_1", "0", "1", "2", "3"}));
}

TEST(SequentialWrite, StreamsInterleave)
{
    WorkloadSpec spec;
    spec.kind = WorkloadKind::SequentialWrite;
    spec.region_bytes = 32 * kKiB;
    auto a = make_workload(spec, 0, 2);
    auto b = make_workload(spec, 1, 2);
    std::vector<std::uint64_t> pa;
    std::vector<std::uint64_t> pb;
    for (const Access &x : accesses(*a, 100))
    {
        pa.push_back(x.gva.value / 4096);
    }
    for (const Access &x : accesses(*b, 100))
    {
        pb.push_back(x.gva.value / 4096);
    }
    EXPECT_EQ(pa, (std::vector<std::uint64_t>{0, 2, 4, 6}));
    EXPECT_EQ(pb, (std::vector<std::uint64_t>{1, 3, 5, 7}));
}

TEST(Phased, BuildThenPhasesWithMarkers)
{
    WorkloadSpec spec;
    spec.kind = WorkloadKind::Phased;
    spec.region_bytes = 16 * kKiB;
    spec.phases = {{0, 8 * kKiB, 10 * kSecond}, {8 * kKiB, 8 * kKiB, 10 * kSecond}};
    auto w = make_workload(spec);
    std::vector<std::string> names;
    int build_writes = 0;
    SimTime now = 0;
    std::vector<std::uint64_t> phase0;
    std::vector<std::uint64_t> phase1;
    while (auto s = w->next(now))
    {
        if (const auto *m = std::get_if<Marker>(&*s))
        {
            names.push_back(m->name);
            continue;
        }
        const Access &a = std::get<Access>(*s);
        if (names.empty())
        {
            ++build_writes;
            EXPECT_EQ(a.rw, AccessKind::Write);
            continue;
        }
        (names.back() == "phase_0" ? phase0 : phase1).push_back(a.gva.value);
        now += kSecond / 2;
    }
    EXPECT_EQ(build_writes, 4);
    EXPECT_EQ(names, (std::vector<std::string>{"build_done", "phase_0", "phase_1"}));
    for (auto g : phase0)
    {
        EXPECT_LT(g, 8 * kKiB);
    }
    for (auto g : phase1)
    {
        EXPECT_GE(g, 8 * kKiB);
    }
    EXPECT_FALSE(phase0.empty());
    EXPECT_FALSE(phase1.empty());
}

TEST(BlockedReuse, TiledSweepShape)
{
    WorkloadSpec spec;
    spec.kind = WorkloadKind::BlockedReuse;
    spec.block_bytes = 4 * 4096;
    spec.a_blocks = 2;
    spec.b_blocks = 3;
    spec.region_bytes = 5 * spec.block_bytes;
    auto w = make_workload(spec);
    const auto all = accesses(*w, 1000);
    EXPECT_EQ(all.size(), 2u * 3u * 4u * 2u);
    std::set<std::uint64_t> a_pages;
    for (std::size_t i = 0; i < all.size(); ++i)
    {
        const std::uint64_t page = all[i].gva.value / 4096;
        if (i % 2 == 0)
        {
            EXPECT_LT(page, 8u);
            a_pages.insert(page);
        }
        else
        {
            EXPECT_GE(page, 8u);
            EXPECT_LT(page, 20u);
        }
    }
    EXPECT_EQ(a_pages.size(), 8u);
    EXPECT_NE(all[0].ip, all[1].ip);
}

TEST(KeyValue, UniformKeysPassChiSquare)
{
    WorkloadSpec spec;
    spec.kind = WorkloadKind::KeyValue;
    spec.distribution = KeyDistribution::Random;
    spec.region_bytes = 64 * kMiB;
    spec.value_bytes = 4 * kKiB;
    spec.seed = 21;
    auto w = make_workload(spec);
    const int bins = 64;
    const int n = 64000;
    std::vector<double> counts(bins, 0.0);
    for (const Access &a : accesses(*w, n))
    {
        counts[a.gva.value * bins / spec.region_bytes] += 1;
    }
    double chi2 = 0;
    const double expected = static_cast<double>(n) / bins;
    for (double c : counts)
    {
        chi2 += (c - expected) * (c - expected) / expected;
    }
    EXPECT_LT(chi2, chi2_critical(bins - 1));
}

TEST(KeyValue, GaussKeysPassChiSquare)
{
    WorkloadSpec spec;
    spec.kind = WorkloadKind::KeyValue;
    spec.distribution = KeyDistribution::Gauss;
    spec.region_bytes = 64 * kMiB;
    spec.value_bytes = 4 * kKiB;
    spec.seed = 5;
    auto w = make_workload(spec);
    const double keys = 16384;
    const double mean = keys / 2;
    const double sd = keys / 8;
    const int n = 100000;
    // Bins of one half standard deviation over mean +- 3 sd.
    const int bins = 12;
    std::vector<double> counts(bins, 0.0);
    int inside = 0;
    for (const Access &a : accesses(*w, n))
    {
        const double key = static_cast<double>(a.gva.value / spec.value_bytes);
        const double z = (key + 0.5 - mean) / sd;
        if (z >= -3 && z < 3)
        {
            counts[static_cast<int>((z + 3) * 2)] += 1;
            ++inside;
        }
    }
    auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double mass = phi(3) - phi(-3);
    double chi2 = 0;
    for (int b = 0; b < bins; ++b)
    {
        const double lo = -3 + b * 0.5;
        const double expected = inside * (phi(lo + 0.5) - phi(lo)) / mass;
        chi2 += (counts[b] - expected) * (counts[b] - expected) / expected;
    }
    EXPECT_LT(chi2, chi2_critical(bins - 1));
}

TEST(KeyValue, WriteFractionChoosesSetTag)
{
    WorkloadSpec spec;
    spec.kind = WorkloadKind::KeyValue;
    spec.distribution = KeyDistribution::Sequential;
    spec.region_bytes = 1 * kMiB;
    spec.value_bytes = 4 * kKiB;
    spec.write_fraction = 1.0;
    auto w = make_workload(spec);
    const auto all = accesses(*w, 300);
    EXPECT_EQ(all[0].gva.value, 0u);
    EXPECT_EQ(all[1].gva.value, 4096u);
    EXPECT_EQ(all[256].gva.value, 0u);
    for (const Access &a : all)
    {
        EXPECT_EQ(a.rw, AccessKind::Write);
    }
}

TEST(Workloads, SameSeedSameStreamDifferentStreamsDiffer)
{
    for (auto kind : {WorkloadKind::ColdRatioRandom, WorkloadKind::KeyValue, WorkloadKind::AlternatingHalves})
    {
        WorkloadSpec spec = cold_spec(0.1);
        spec.kind = kind;
        spec.write_fraction = 0.3;
        auto a = make_workload(spec, 0, 2);
        auto b = make_workload(spec, 0, 2);
        auto c = make_workload(spec, 1, 2);
        const auto sa = accesses(*a, 5000);
        EXPECT_EQ(sa, accesses(*b, 5000));
        EXPECT_NE(sa, accesses(*c, 5000));
    }
}

TEST(Workloads, MaxAccessesEndsTheStream)
{
    WorkloadSpec spec = cold_spec(0.0);
    spec.max_accesses = 17;
    auto w = make_workload(spec);
    EXPECT_EQ(accesses(*w, 100).size(), 17u);
}

TEST(Workloads, InitialLayoutDefaults)
{
    const auto cold = initial_layout(cold_spec(0.1));
    ASSERT_EQ(cold.size(), 2u);
    EXPECT_EQ(cold[0].state, InitialState::Resident);
    EXPECT_EQ(cold[0].end, 16 * kMiB);
    EXPECT_EQ(cold[1].state, InitialState::Swapped);
    WorkloadSpec spec = cold_spec(0.1);
    spec.initial = InitialState::Untouched;
    for (const auto &r : initial_layout(spec))
    {
        EXPECT_EQ(r.state, InitialState::Untouched);
    }
}

TEST(Workloads, KindNamesRoundTrip)
{
    for (auto kind : {WorkloadKind::ColdRatioRandom, WorkloadKind::AlternatingHalves, WorkloadKind::SequentialWrite,
                      WorkloadKind::Phased, WorkloadKind::KeyValue, WorkloadKind::BlockedReuse, WorkloadKind::Trace})
    {
        EXPECT_EQ(workload_kind_from_string(to_string(kind)), kind);
    }
    EXPECT_THROW(workload_kind_from_string("nope"), std::invalid_argument);
    EXPECT_THROW(key_distribution_from_string("zipf"), std::invalid_argument);
}

TEST(WarmupScramble, EnabledBreaksGuestPhysicalLocality)
{
    EXPECT_EQ(warmup_scramble(false), 0.0);
    EXPECT_EQ(warmup_scramble(true), 1.0);
    const auto off = GuestPageTable::build(GuestContext{1}, 4, 512, warmup_scramble(false));
    const auto on = GuestPageTable::build(GuestContext{1}, 4, 512, warmup_scramble(true));
    const auto again = GuestPageTable::build(GuestContext{1}, 4, 512, warmup_scramble(true));
    std::uint64_t sequential = 0;
    for (std::uint64_t i = 0; i < 512; ++i)
    {
        EXPECT_EQ(off.lookup(i), i);
        EXPECT_EQ(on.lookup(i), again.lookup(i));
        if (i > 0 && *on.lookup(i) == *on.lookup(i - 1) + 1)
        {
            ++sequential;
        }
    }
    EXPECT_LT(sequential, 8u);
}

TEST(Trace, LineRoundTrip)
{
    const TraceRecord rec{1234, Access{0, GuestContext{3}, Gva{0xdeadb000}, AccessKind::Write, 42}};
    const std::string line = format_trace_line(rec);
    EXPECT_EQ(line, "1234,3,0xdeadb000,w,42");
    const TraceRecord back = parse_trace_line(line);
    EXPECT_EQ(back.time, 1234u);
    EXPECT_EQ(back.access.ctx, GuestContext{3});
    EXPECT_EQ(back.access.gva, Gva{0xdeadb000});
    EXPECT_EQ(back.access.rw, AccessKind::Write);
    EXPECT_EQ(back.access.ip, 42u);
    EXPECT_THROW(parse_trace_line("1,2,3"), std::invalid_argument);
    EXPECT_THROW(parse_trace_line("1,2,0x10,x,4"), std::invalid_argument);
}

TEST(Trace, ReplayReproducesSpacing)
{
    std::vector<TraceRecord> recs{{100, Access{0, GuestContext{1}, Gva{0}, AccessKind::Read, 1}},
                                  {250, Access{0, GuestContext{1}, Gva{4096}, AccessKind::Read, 1}},
                                  {250, Access{0, GuestContext{1}, Gva{8192}, AccessKind::Write, 2}}};
    std::stringstream ss;
    write_trace(ss, recs);
    const auto loaded = read_trace(ss);
    ASSERT_EQ(loaded.size(), 3u);
    TraceWorkload w(loaded);
    const auto all = accesses(w, 10);
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0].delay, 100u);
    EXPECT_EQ(all[1].delay, 150u);
    EXPECT_EQ(all[2].delay, 0u);
}
