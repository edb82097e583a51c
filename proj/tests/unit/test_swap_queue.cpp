#include "flexswap/swap_queue.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace flexswap;

namespace
{
    std::vector<PageIndex> drain(SwapQueue &q)
    {
        std::vector<PageIndex> out;
        while (auto e = q.pop(nullptr))
        {
            out.push_back(e->page);
        }
        return out;
    }
} // namespace

TEST(SwapQueue, DefaultOrderIsFaultReclaimPrefetch)
{
    SwapQueue q;
    q.push(1, QueueClass::Prefetch);
    q.push(2, QueueClass::Reclaim);
    q.push(3, QueueClass::Fault);
    q.push(4, QueueClass::Fault);
    EXPECT_EQ(drain(q), (std::vector<PageIndex>{3, 4, 2, 1}));
}

TEST(SwapQueue, ForcedReclaimsGoFirst)
{
    SwapQueue q;
    q.push(1, QueueClass::Fault);
    q.push(2, QueueClass::Reclaim, true);
    const auto e = q.pop(nullptr);
    ASSERT_TRUE(e);
    EXPECT_EQ(e->page, 2u);
    EXPECT_TRUE(e->forced);
    EXPECT_EQ(e->cls, QueueClass::Reclaim);
}

TEST(SwapQueue, OneEntryPerPageAndUpgradeOnly)
{
    SwapQueue q;
    EXPECT_TRUE(q.push(5, QueueClass::Prefetch));
    EXPECT_FALSE(q.push(5, QueueClass::Prefetch));
    EXPECT_FALSE(q.push(5, QueueClass::Fault));
    EXPECT_EQ(q.size(), 1u);
    EXPECT_EQ(q.class_of(5), QueueClass::Fault);
    EXPECT_FALSE(q.push(5, QueueClass::Prefetch));
    EXPECT_EQ(q.class_of(5), QueueClass::Fault);
}

TEST(SwapQueue, ConfigurableOrder)
{
    SwapQueue q({QueueClass::Prefetch, QueueClass::Fault, QueueClass::Reclaim});
    q.push(1, QueueClass::Reclaim);
    q.push(2, QueueClass::Fault);
    q.push(3, QueueClass::Prefetch);
    EXPECT_EQ(drain(q), (std::vector<PageIndex>{3, 2, 1}));
    EXPECT_THROW(SwapQueue({QueueClass::Fault, QueueClass::Fault, QueueClass::Reclaim}), std::invalid_argument);
}

TEST(SwapQueue, PopSkipsIneligiblePages)
{
    SwapQueue q;
    q.push(1, QueueClass::Fault);
    q.push(2, QueueClass::Prefetch);
    const auto e = q.pop([](PageIndex p) { return p != 1; });
    ASSERT_TRUE(e);
    EXPECT_EQ(e->page, 2u);
    EXPECT_TRUE(q.contains(1));
    EXPECT_FALSE(q.pop([](PageIndex) { return false; }));
}

TEST(SwapQueue, EraseAndFindFirst)
{
    SwapQueue q;
    q.push(1, QueueClass::Prefetch);
    q.push(2, QueueClass::Prefetch);
    q.push(3, QueueClass::Reclaim, true);
    EXPECT_EQ(q.find_first(QueueClass::Prefetch, [](PageIndex) { return true; }), 1u);
    EXPECT_EQ(q.find_first(QueueClass::Prefetch, [](PageIndex p) { return p == 2; }), 2u);
    EXPECT_EQ(q.find_first(QueueClass::Reclaim, [](PageIndex) { return true; }), std::nullopt); // forced lane
    EXPECT_EQ(q.size_of(QueueClass::Prefetch), 2u);
    EXPECT_TRUE(q.erase(1));
    EXPECT_FALSE(q.erase(1));
    EXPECT_EQ(drain(q), (std::vector<PageIndex>{3, 2}));
    EXPECT_TRUE(q.empty());
}

TEST(SwapQueueProperty, PopOrderRespectsClassRank)
{
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
    {
        std::mt19937_64 rng(seed);
        SwapQueue q;
        for (int i = 0; i < 200; ++i)
        {
            q.push(rng() % 64, static_cast<QueueClass>(rng() % 3), rng() % 10 == 0);
        }
        int last_rank = -1;
        while (auto e = q.pop(nullptr))
        {
            const int rank = e->forced ? 0 : 1 + static_cast<int>(e->cls);
            ASSERT_GE(rank, last_rank) << "seed " << seed;
            last_rank = rank;
        }
    }
}
