#include "flexswap/scenario.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace flexswap;

namespace
{
    const char *kBase = R"(name: t
seed: 4
duration: 90s
vm:
  size: 1GiB
  page_size: 4k
workload:
  kind: cold_ratio_random
  region: 512MiB
  hot: 128MiB
  cold_ratio: 0.001
policies:
  - type: dt
    scan_interval: 30s
limits:
  - {at: 0, fraction_of_vm: 0.5}
  - {at: 10s, fraction_of_wss: 1.5}
  - {at: 20s, unlimited: true}
)";

    int error_line(const std::string &text)
    {
        try
        {
            load_scenario_string(text);
        }
        catch (const ConfigError &e)
        {
            return e.line();
        }
        return -2;
    }
} // namespace

TEST(ParseSize, Units)
{
    EXPECT_EQ(parse_size("4k"), 4096u);
    EXPECT_EQ(parse_size("2M"), 2u * kMiB);
    EXPECT_EQ(parse_size("8GiB"), 8u * kGiB);
    EXPECT_EQ(parse_size("0.5GiB"), kGiB / 2);
    EXPECT_EQ(parse_size("123"), 123u);
    EXPECT_EQ(parse_size(" 1 tb "), 1024u * kGiB);
    EXPECT_THROW(parse_size("12 parsecs"), std::invalid_argument);
    EXPECT_THROW(parse_size("abc"), std::invalid_argument);
    EXPECT_THROW(parse_size("-4k"), std::invalid_argument);
}

TEST(ParseDuration, Units)
{
    EXPECT_EQ(parse_duration("60s"), 60 * kSecond);
    EXPECT_EQ(parse_duration("100us"), 100 * kMicrosecond);
    EXPECT_EQ(parse_duration("5ms"), 5 * kMillisecond);
    EXPECT_EQ(parse_duration("250ns"), 250u);
    EXPECT_EQ(parse_duration("2"), 2 * kSecond);
    EXPECT_EQ(parse_duration("1.5min"), 90 * kSecond);
    EXPECT_THROW(parse_duration("3 fortnights"), std::invalid_argument);
}

TEST(ParsePageSize, OnlyTwoSizes)
{
    EXPECT_EQ(parse_page_size("4k"), PageSize::Small);
    EXPECT_EQ(parse_page_size("2MiB"), PageSize::Huge);
    EXPECT_THROW(parse_page_size("1G"), std::invalid_argument);
}

TEST(LoadScenario, ReadsFields)
{
    const Scenario s = load_scenario_string(kBase);
    EXPECT_EQ(s.name, "t");
    EXPECT_EQ(s.seed, 4u);
    EXPECT_EQ(s.duration, 90 * kSecond);
    EXPECT_EQ(s.vm.page_size, PageSize::Small);
    EXPECT_EQ(s.workload.kind, WorkloadKind::ColdRatioRandom);
    EXPECT_EQ(s.workload.seed, 4u);
    ASSERT_EQ(s.policies.size(), 1u);
    EXPECT_EQ(s.policies[0].type, PolicyType::Dt);
    EXPECT_EQ(s.policies[0].dt.scan_interval, 30 * kSecond);
    ASSERT_EQ(s.limits.size(), 3u);
    EXPECT_EQ(resolve_limit(s.limits[0], s), kGiB / 2);
    EXPECT_EQ(resolve_limit(s.limits[1], s), 192 * kMiB);
    EXPECT_EQ(resolve_limit(s.limits[2], s), ~std::uint64_t{0});
}

TEST(LoadScenario, LimitsRoundDownToWholePages)
{
    Scenario s = load_scenario_string(kBase);
    s.vm.page_size = PageSize::Huge;
    LimitEntry e{0, LimitBasis::Bytes, 3.0 * kMiB};
    EXPECT_EQ(resolve_limit(e, s), 2 * kMiB);
}

TEST(LoadScenario, OverridesEditTheDocument)
{
    const Scenario s = load_scenario_string(
        kBase, {"seed=11", "vm.page_size=2M", "policies.0.scan_interval=5s", "workload.cold_ratio=0.25"});
    EXPECT_EQ(s.seed, 11u);
    EXPECT_EQ(s.vm.page_size, PageSize::Huge);
    EXPECT_EQ(s.policies[0].dt.scan_interval, 5 * kSecond);
    EXPECT_DOUBLE_EQ(s.workload.cold_ratio, 0.25);
    EXPECT_THROW(load_scenario_string(kBase, {"policies.4.type=lru"}), ConfigError);
    EXPECT_THROW(load_scenario_string(kBase, {"noequals"}), ConfigError);
}

TEST(LoadScenario, UnknownKeyReportsItsLine)
{
    std::string text = kBase;
    text += "bogus: 1\n";
    EXPECT_EQ(error_line(text), 18);
    std::string nested = kBase;
    nested.replace(nested.find("  size: 1GiB"), 12, "  sise: 1GiB");
    EXPECT_EQ(error_line(nested), 4);
}

TEST(LoadScenario, RejectsBadValues)
{
    const std::vector<std::vector<std::string>> bad{
        {"vm.page_size=3k"},
        {"vm.scramble=2"},
        {"workload.region=4GiB"},
        {"workload.kind=nope"},
        {"policies.0.type=magic"},
        {"vcpus=0"},
        {"engine.workers=0"},
        {"limits.1.at=0s", "limits.0.at=5s"},
        {"limits.0.bytes=1GiB"},
    };
    for (const auto &ov : bad)
    {
        EXPECT_THROW(load_scenario_string(kBase, ov), ConfigError) << ov[0];
    }
    EXPECT_THROW(load_scenario_string("name: x\n"), ConfigError);
}

TEST(LoadScenario, ConflictingPolicies)
{
    std::string text = kBase;
    text.replace(text.find("  - type: dt"), 12, "  - type: lru\n  - type: reuse_distance");
    text.replace(text.find("    scan_interval: 30s\n"), 23, "");
    EXPECT_THROW(load_scenario_string(text), ConfigError);
}

TEST(LoadScenario, WorkingSetByKind)
{
    WorkloadSpec w;
    w.kind = WorkloadKind::BlockedReuse;
    w.block_bytes = kMiB;
    w.a_blocks = 3;
    w.b_blocks = 5;
    EXPECT_EQ(working_set_bytes(w), 8 * kMiB);
    w.kind = WorkloadKind::Phased;
    w.region_bytes = 10 * kMiB;
    w.phases = {{0, 2 * kMiB, kSecond}, {0, 4 * kMiB, kSecond}};
    EXPECT_EQ(working_set_bytes(w), 4 * kMiB);
    w.kind = WorkloadKind::KeyValue;
    EXPECT_EQ(working_set_bytes(w), 10 * kMiB);
}

TEST(Presets, AllShippedScenariosLoad)
{
    int n = 0;
    for (const auto &entry : std::filesystem::directory_iterator(FLEXSWAP_SOURCE_DIR "/scenarios"))
    {
        if (entry.path().extension() != ".yaml")
        {
            continue;
        }
        EXPECT_NO_THROW(load_scenario_file(entry.path().string())) << entry.path();
        ++n;
    }
    EXPECT_GE(n, 6);
}
