#include "flexswap/storage_model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace flexswap;

TEST(DeviceModel, Isolated4kReadTakesAbout89us)
{
    DeviceModel dev;
    EXPECT_EQ(dev.isolated_latency(PageSize::Small), 88'923u);
    EXPECT_EQ(dev.submit_io(PageSize::Small, IoDirection::Read, 0), 88'923u);
}

TEST(DeviceModel, Isolated2mReadIsElevenKernelFaults)
{
    DeviceModel dev;
    const double kernel = static_cast<double>(DeviceModel(DeviceParams::kernel_4k()).isolated_latency(PageSize::Small));
    EXPECT_NEAR(kernel, 6000.0 / 0.078, 50.0);
    EXPECT_EQ(dev.isolated_latency(PageSize::Huge), 846'153u);
    EXPECT_NEAR(static_cast<double>(dev.isolated_latency(PageSize::Huge)) / kernel, 11.0, 0.01);
}

TEST(DeviceModel, UserspaceAddsTwelveMicroseconds)
{
    const double user = static_cast<double>(DeviceModel().isolated_latency(PageSize::Small));
    const double kernel = static_cast<double>(DeviceModel(DeviceParams::kernel_4k()).isolated_latency(PageSize::Small));
    EXPECT_NEAR(user - kernel, 12'000.0, 1.0);
}

TEST(DeviceModel, SoftwareOverheadSplit)
{
    const DeviceParams p;
    EXPECT_EQ(p.worker_overhead(PageSize::Small) + p.delivery_overhead(PageSize::Small), 22'000u);
    EXPECT_EQ(p.worker_overhead(PageSize::Huge) + p.delivery_overhead(PageSize::Huge), 35'538u);
    EXPECT_EQ(p.worker_overhead(PageSize::Small), 11'000u);
}

TEST(DeviceModel, EightConcurrent2mStreamsCapAt2_6GBps)
{
    DeviceModel dev;
    for (int i = 0; i < 8; ++i)
    {
        dev.start(0, PageSize::Huge, IoDirection::Read);
    }
    const auto done = dev.complete_until(kSecond);
    ASSERT_EQ(done.size(), 8u);
    SimTime last = 0;
    for (const auto &t : done)
    {
        last = std::max(last, t.completion);
    }
    const double throughput = 8.0 * 2 * kMiB / to_seconds(last);
    EXPECT_NEAR(throughput, 2.6e9, 2.6e9 * 0.001);
}

TEST(DeviceModel, StaggeredArrivalsShareBandwidth)
{
    // Hand-computed processor sharing: the second 2MB transfer arrives at 400us.
    DeviceModel dev;
    const TransferId a = dev.start(0, PageSize::Huge, IoDirection::Read);
    EXPECT_EQ(dev.projected_completion(a), 810'615u); // floor dominates when alone
    const TransferId b = dev.start(400'000, PageSize::Huge, IoDirection::Write);
    const double first = 400'000.0 + (2'097'152.0 - 400'000.0 * 2.6) / 1.3;
    const double second = first + (2'097'152.0 - (first - 400'000.0) * 1.3) / 2.6;
    EXPECT_NEAR(static_cast<double>(dev.projected_completion(a)), first, 2.0);
    EXPECT_NEAR(static_cast<double>(dev.projected_completion(b)), second, 2.0);
    const auto done = dev.complete_until(kSecond);
    ASSERT_EQ(done.size(), 2u);
    EXPECT_EQ(done[0].id, a);
    EXPECT_EQ(dev.bytes_completed(), 2 * 2 * kMiB);
}

TEST(DeviceModel, NextCompletionAndPartialAdvance)
{
    DeviceModel dev;
    EXPECT_EQ(dev.next_completion(), std::nullopt);
    dev.start(0, PageSize::Small, IoDirection::Read);
    EXPECT_EQ(dev.next_completion(), 66'923u);
    EXPECT_TRUE(dev.complete_until(66'922).empty());
    EXPECT_EQ(dev.complete_until(66'923).size(), 1u);
    EXPECT_EQ(dev.inflight(), 0u);
}

TEST(DeviceModelProperty, IdenticalConcurrentTransfersTakeClosedForm)
{
    const DeviceParams p;
    for (PageSize ps : {PageSize::Small, PageSize::Huge})
    {
        for (int n = 1; n <= 64; n = n < 8 ? n + 1 : n * 2)
        {
            DeviceModel dev;
            for (int i = 0; i < n; ++i)
            {
                dev.start(1000, ps, IoDirection::Read);
            }
            const double expected = std::max(static_cast<double>(p.service_floor(ps)),
                                             n * static_cast<double>(bytes_of(ps)) / p.bandwidth_cap * 1e9);
            for (const auto &t : dev.complete_until(10 * kSecond))
            {
                EXPECT_NEAR(static_cast<double>(t.completion - 1000), expected, expected * 0.01)
                    << "n=" << n << " size=" << bytes_of(ps);
            }
        }
    }
}

TEST(DeviceModelProperty, ThroughputNeverExceedsCap)
{
    DeviceModel dev;
    SimTime t = 0;
    for (int i = 0; i < 200; ++i)
    {
        dev.start(t, i % 3 ? PageSize::Small : PageSize::Huge, i % 2 ? IoDirection::Read : IoDirection::Write);
        t += 7'000 + (i * 7919) % 50'000;
    }
    const auto done = dev.complete_until(100 * kSecond);
    ASSERT_EQ(done.size(), 200u);
    SimTime last = 0;
    for (const auto &c : done)
    {
        last = std::max(last, c.completion);
    }
    EXPECT_LE(static_cast<double>(dev.bytes_completed()) / to_seconds(last), 2.6e9 * 1.0001);
}

TEST(ZeroPagePool, TakeFromPoolOrPayZeroing)
{
    ZeroPagePoolConfig cfg;
    cfg.capacity = 8;
    ZeroPagePool pool(cfg);
    pool.set_available(4);
    EXPECT_EQ(pool.take_zero_page(), 0u);
    EXPECT_EQ(pool.available(), 3u);
    pool.set_available(0);
    EXPECT_EQ(pool.take_zero_page(), 100 * kMicrosecond);
    EXPECT_EQ(pool.available(), 0u);
}

TEST(ZeroPagePool, RefillArithmetic)
{
    ZeroPagePoolConfig cfg;
    cfg.capacity = 8;
    cfg.refill_rate = 100.0;
    ZeroPagePool pool(cfg);
    pool.set_available(0);
    pool.refill_idle(0);
    EXPECT_EQ(pool.available(), 0u);
    pool.refill_idle(50 * kMillisecond);
    EXPECT_EQ(pool.available(), 5u);
    pool.refill_idle(kSecond);
    EXPECT_EQ(pool.available(), 8u);
    pool.set_available(100);
    EXPECT_EQ(pool.available(), 8u);
}
