#include "flexswap/address_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace flexswap
{
    std::uint64_t splitmix64(std::uint64_t x) noexcept
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    GuestPageTable::GuestPageTable(GuestContext ctx, PageSize page_size) : ctx_(ctx), page_size_(page_size) {}

    GuestPageTable GuestPageTable::build(GuestContext ctx, std::uint64_t seed, std::uint64_t n_pages, double scramble,
                                         PageSize page_size)
    {
        if (n_pages == 0)
        {
            throw std::invalid_argument("GuestPageTable::build: n_pages must be >= 1");
        }
        if (!(scramble >= 0.0 && scramble <= 1.0))
        {
            throw std::invalid_argument("GuestPageTable::build: scramble must lie in [0, 1]");
        }
        std::vector<std::uint64_t> target(n_pages);
        std::iota(target.begin(), target.end(), std::uint64_t{0});

        if (scramble > 0.0)
        {
            std::mt19937_64 rng(seed);
            const auto k = static_cast<std::uint64_t>(std::llround(scramble * static_cast<double>(n_pages)));
            if (k == n_pages)
            {
                std::shuffle(target.begin(), target.end(), rng);
            }
            else if (k > 1)
            {
                // Pick k pages, then permute their targets among themselves.
                std::vector<std::uint64_t> chosen(n_pages);
                std::iota(chosen.begin(), chosen.end(), std::uint64_t{0});
                for (std::uint64_t i = 0; i < k; ++i)
                {
                    std::uniform_int_distribution<std::uint64_t> pick(i, n_pages - 1);
                    std::swap(chosen[i], chosen[pick(rng)]);
                }
                chosen.resize(k);
                std::vector<std::uint64_t> values(k);
                for (std::uint64_t i = 0; i < k; ++i)
                {
                    values[i] = target[chosen[i]];
                }
                std::shuffle(values.begin(), values.end(), rng);
                for (std::uint64_t i = 0; i < k; ++i)
                {
                    target[chosen[i]] = values[i];
                }
            }
        }

        GuestPageTable table(ctx, page_size);
        table.entries_ = std::move(target);
        for (std::uint64_t i = 0; i < n_pages; ++i)
        {
            table.reverse_.emplace(table.entries_[i], i);
        }
        table.mapped_ = n_pages;
        return table;
    }

    void GuestPageTable::map(std::uint64_t gva_page, std::uint64_t gpa_page)
    {
        if (auto it = reverse_.find(gpa_page); it != reverse_.end() && it->second != gva_page)
        {
            throw std::invalid_argument("GuestPageTable::map: gpa page " + std::to_string(gpa_page) +
                                        " is already mapped");
        }
        if (gva_page >= entries_.size())
        {
            entries_.resize(gva_page + 1, kUnmapped);
        }
        if (entries_[gva_page] != kUnmapped)
        {
            reverse_.erase(entries_[gva_page]);
            --mapped_;
        }
        entries_[gva_page] = gpa_page;
        reverse_.emplace(gpa_page, gva_page);
        ++mapped_;
    }

    void GuestPageTable::unmap(std::uint64_t gva_page)
    {
        if (gva_page < entries_.size() && entries_[gva_page] != kUnmapped)
        {
            reverse_.erase(entries_[gva_page]);
            entries_[gva_page] = kUnmapped;
            --mapped_;
        }
    }

    std::optional<std::uint64_t> GuestPageTable::lookup(std::uint64_t gva_page) const
    {
        if (gva_page >= entries_.size() || entries_[gva_page] == kUnmapped)
        {
            return std::nullopt;
        }
        return entries_[gva_page];
    }

    std::optional<Gpa> GuestPageTable::translate(Gva gva) const
    {
        const std::uint64_t size = bytes_of(page_size_);
        const auto page = lookup(gva.value / size);
        if (!page)
        {
            return std::nullopt;
        }
        return Gpa{*page * size + gva.value % size};
    }

    Hva HostMapping::gpa_to_hva(Gpa gpa) const
    {
        if (gpa.value >= vm_bytes_)
        {
            throw std::out_of_range("HostMapping::gpa_to_hva: gpa " + std::to_string(gpa.value) +
                                    " beyond VM size " + std::to_string(vm_bytes_));
        }
        return Hva{hva_base_ + gpa.value};
    }

    std::optional<Gpa> HostMapping::hva_to_gpa(Hva hva) const
    {
        if (hva.value < hva_base_ || hva.value - hva_base_ >= vm_bytes_)
        {
            return std::nullopt;
        }
        return Gpa{hva.value - hva_base_};
    }

    void AddressSpace::register_context(GuestPageTable table)
    {
        const GuestContext ctx = table.context();
        if (tables_.contains(ctx))
        {
            throw std::invalid_argument("AddressSpace::register_context: context " + std::to_string(ctx.id) +
                                        " already registered");
        }
        tables_.emplace(ctx, std::move(table));
    }

    const GuestPageTable &AddressSpace::table(GuestContext ctx) const
    {
        auto it = tables_.find(ctx);
        if (it == tables_.end())
        {
            throw UnknownContext("unknown guest context " + std::to_string(ctx.id));
        }
        return it->second;
    }

    std::optional<Gpa> AddressSpace::gva_to_gpa(GuestContext ctx, Gva gva) const
    {
        return table(ctx).translate(gva);
    }

    std::optional<Hva> AddressSpace::gva_to_hva(GuestContext ctx, Gva gva) const
    {
        const auto gpa = gva_to_gpa(ctx, gva);
        if (!gpa || gpa->value >= host_.vm_bytes() || walk_fails(ctx, gva))
        {
            return std::nullopt;
        }
        return host_.gpa_to_hva(*gpa);
    }

    void AddressSpace::set_walk_failures(double fail_fraction, std::uint64_t seed)
    {
        if (!(fail_fraction >= 0.0 && fail_fraction <= 1.0))
        {
            throw std::invalid_argument("AddressSpace::set_walk_failures: fraction must lie in [0, 1]");
        }
        fail_fraction_ = fail_fraction;
        fail_seed_ = seed;
    }

    bool AddressSpace::walk_fails(GuestContext ctx, Gva gva) const noexcept
    {
        if (fail_fraction_ <= 0.0)
        {
            return false;
        }
        const std::uint64_t page = gva.value / bytes_of(PageSize::Small);
        const std::uint64_t h = splitmix64(fail_seed_ ^ splitmix64(ctx.id * 0x100000001b3ULL + page));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        return u < fail_fraction_;
    }
} // namespace flexswap
