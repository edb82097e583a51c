#pragma once

#include "flexswap/time.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace flexswap
{
    enum class PageSize : std::uint64_t
    {
        Small = 4 * kKiB,
        Huge = 2 * kMiB,
    };

    inline constexpr std::uint64_t bytes_of(PageSize ps) noexcept { return static_cast<std::uint64_t>(ps); }

    // Stands in for the guest page-table base register of one guest application.
    struct GuestContext
    {
        std::uint64_t id = 0;
        friend constexpr auto operator<=>(GuestContext, GuestContext) = default;
    };

    struct Gva
    {
        std::uint64_t value = 0;
        friend constexpr auto operator<=>(Gva, Gva) = default;
    };
    struct Gpa
    {
        std::uint64_t value = 0;
        friend constexpr auto operator<=>(Gpa, Gpa) = default;
    };
    struct Hva
    {
        std::uint64_t value = 0;
        friend constexpr auto operator<=>(Hva, Hva) = default;
    };

    class UnknownContext : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // Guest-controlled GVA -> GPA translation for one context, stored at the table's page
    // granularity. Entries are injective.
    class GuestPageTable
    {
    public:
        GuestPageTable(GuestContext ctx, PageSize page_size);

        // Seeded table over `n_pages` guest pages. scramble=0 is the identity, scramble=1 a
        // uniform random permutation; in between, that fraction of pages is permuted among
        // themselves.
        static GuestPageTable build(GuestContext ctx, std::uint64_t seed, std::uint64_t n_pages, double scramble,
                                    PageSize page_size = PageSize::Small);

        // Throws std::invalid_argument if `gpa_page` is already the target of another entry.
        void map(std::uint64_t gva_page, std::uint64_t gpa_page);
        void unmap(std::uint64_t gva_page);

        std::optional<std::uint64_t> lookup(std::uint64_t gva_page) const;
        std::optional<Gpa> translate(Gva gva) const;

        GuestContext context() const noexcept { return ctx_; }
        PageSize page_size() const noexcept { return page_size_; }
        std::uint64_t mapped_count() const noexcept { return mapped_; }
        std::uint64_t extent() const noexcept { return entries_.size(); }

    private:
        static constexpr std::uint64_t kUnmapped = ~std::uint64_t{0};

        GuestContext ctx_;
        PageSize page_size_;
        std::vector<std::uint64_t> entries_;
        std::map<std::uint64_t, std::uint64_t> reverse_;
        std::uint64_t mapped_ = 0;
    };

    // GPA -> HVA is a constant offset over the VM's guest-physical range.
    class HostMapping
    {
    public:
        HostMapping(std::uint64_t hva_base, std::uint64_t vm_bytes) : hva_base_(hva_base), vm_bytes_(vm_bytes) {}

        // Throws std::out_of_range beyond the VM size.
        Hva gpa_to_hva(Gpa gpa) const;
        std::optional<Gpa> hva_to_gpa(Hva hva) const;

        std::uint64_t hva_base() const noexcept { return hva_base_; }
        std::uint64_t vm_bytes() const noexcept { return vm_bytes_; }

    private:
        std::uint64_t hva_base_;
        std::uint64_t vm_bytes_;
    };

    // Registry of guest contexts plus the host mapping; answers the three translations.
    class AddressSpace
    {
    public:
        explicit AddressSpace(HostMapping host) : host_(host) {}

        void register_context(GuestPageTable table);
        bool has_context(GuestContext ctx) const { return tables_.contains(ctx); }
        const GuestPageTable &table(GuestContext ctx) const;

        // Throws UnknownContext for unregistered contexts; nullopt means no translation.
        std::optional<Gpa> gva_to_gpa(GuestContext ctx, Gva gva) const;
        std::optional<Hva> gva_to_hva(GuestContext ctx, Gva gva) const;
        Hva gpa_to_hva(Gpa gpa) const { return host_.gpa_to_hva(gpa); }

        // Independent failure injection for gva_to_hva: a deterministic fraction of
        // (context, guest page) pairs fail as if the guest tables were stale.
        void set_walk_failures(double fail_fraction, std::uint64_t seed);
        double fail_fraction() const noexcept { return fail_fraction_; }

        // Latency charged to callers of gva_to_hva (the walk runs off the fault path).
        void set_walk_latency(SimTime latency) noexcept { walk_latency_ = latency; }
        SimTime walk_latency() const noexcept { return walk_latency_; }

        const HostMapping &host() const noexcept { return host_; }

    private:
        bool walk_fails(GuestContext ctx, Gva gva) const noexcept;

        HostMapping host_;
        std::map<GuestContext, GuestPageTable> tables_;
        double fail_fraction_ = 0.0;
        std::uint64_t fail_seed_ = 0;
        SimTime walk_latency_ = 0;
    };

    std::uint64_t splitmix64(std::uint64_t x) noexcept;
} // namespace flexswap
