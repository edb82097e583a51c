#include "flexswap/vm_memory.hpp"

#include <algorithm>
#include <string>

namespace flexswap
{
    std::size_t AccessBitmap::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true)); }

    void AccessBitmap::merge(const AccessBitmap &other)
    {
        if (other.first_page != first_page || other.bits.size() != bits.size())
        {
            throw std::invalid_argument("AccessBitmap::merge: region mismatch");
        }
        for (std::size_t i = 0; i < bits.size(); ++i)
        {
            if (other.bits[i])
            {
                bits[i] = true;
            }
        }
        scan_time = std::max(scan_time, other.scan_time);
    }

    VmMemory::VmMemory(VmMemoryConfig config, const AddressSpace &space)
        : config_(config), space_(space), frames_(config.n_pages)
    {
        if (config_.n_pages == 0)
        {
            throw std::invalid_argument("VmMemory: n_pages must be >= 1");
        }
        hot_latency_ = config_.hot_latency != 0
                           ? config_.hot_latency
                           : (config_.page_size == PageSize::Huge ? kDefaultHotLatency2m : kDefaultHotLatency4k);
        for (PageIndex i = 0; i < frames_.size(); ++i)
        {
            frames_[i].index = i;
        }
    }

    std::optional<PageIndex> VmMemory::page_of(GuestContext ctx, Gva gva) const
    {
        const auto hva = space_.gva_to_hva(ctx, gva);
        if (!hva)
        {
            return std::nullopt;
        }
        const PageIndex page = page_of(*hva);
        if (page >= frames_.size())
        {
            return std::nullopt;
        }
        return page;
    }

    PageIndex VmMemory::page_of(Hva hva) const
    {
        return (hva.value - space_.host().hva_base()) / page_bytes();
    }

    Hva VmMemory::hva_of(PageIndex page) const { return Hva{space_.host().hva_base() + page * page_bytes()}; }

    AccessResult VmMemory::access(GuestContext ctx, Gva gva, AccessKind rw, std::optional<std::uint64_t> ip, SimTime now)
    {
        // The vCPU's own walk never fails; only the out-of-band walk has a failure rate.
        const auto gpa = space_.gva_to_gpa(ctx, gva);
        if (!gpa)
        {
            throw NoTranslation("guest access to unmapped gva " + std::to_string(gva.value));
        }
        const PageIndex page = page_of(space_.gpa_to_hva(*gpa));
        return access_page(page, ctx, gva, rw, ip, now);
    }

    AccessResult VmMemory::access_page(PageIndex page, GuestContext ctx, std::optional<Gva> gva, AccessKind rw,
                                       std::optional<std::uint64_t> ip, SimTime now)
    {
        PageFrame &f = frame_mut(page);
        if (f.state == Residency::SwappedOut || !f.mapped)
        {
            return FaultEvent{page, ctx, gva, ip, now, f.state == Residency::Resident};
        }
        SimTime latency = hot_latency_;
        if (f.cleared_since_touch)
        {
            latency += config_.cold_penalty_after_clear;
            f.cleared_since_touch = false;
        }
        f.access_bit = true;
        if (rw == AccessKind::Write)
        {
            f.dirty_bit = true;
            f.ever_written = true;
        }
        if (config_.lru_source == LruSource::Exact)
        {
            set_stamp(f, now);
        }
        return Hit{latency};
    }

    AccessBitmap VmMemory::scan_and_clear(PageIndex first, std::uint64_t count, SimTime now)
    {
        if (first > frames_.size() || count > frames_.size() - first)
        {
            throw std::out_of_range("VmMemory::scan_and_clear: region beyond VM");
        }
        AccessBitmap bitmap;
        bitmap.scan_time = now;
        bitmap.first_page = first;
        bitmap.bits.assign(count, false);
        for (std::uint64_t i = 0; i < count; ++i)
        {
            PageFrame &f = frames_[first + i];
            if (f.access_bit)
            {
                bitmap.bits[i] = true;
                f.access_bit = false;
                if (f.state == Residency::Resident)
                {
                    f.cleared_since_touch = true;
                    if (config_.lru_source == LruSource::Scan)
                    {
                        set_stamp(f, now);
                    }
                }
            }
        }
        ptes_scanned_ += count;
        scanner_cpu_ += count * config_.scan_cost_per_pte;
        return bitmap;
    }

    void VmMemory::make_resident(PageFrame &f)
    {
        f.state = Residency::Resident;
        ++resident_;
        recency_.emplace(f.lru_stamp, f.index);
    }

    void VmMemory::set_stamp(PageFrame &f, SimTime stamp)
    {
        if (f.lru_stamp == stamp)
        {
            return;
        }
        if (f.state == Residency::Resident)
        {
            // Reuse the tree node; touches are the hot path.
            auto node = recency_.extract({f.lru_stamp, f.index});
            node.value() = {stamp, f.index};
            recency_.insert(std::move(node));
        }
        f.lru_stamp = stamp;
    }

    void VmMemory::map(PageIndex page, SimTime now)
    {
        PageFrame &f = frame_mut(page);
        if (f.state == Residency::Resident && f.mapped)
        {
            throw InvalidState("VmMemory::map: page " + std::to_string(page) + " already mapped");
        }
        if (f.state == Residency::SwappedOut)
        {
            make_resident(f);
        }
        f.mapped = true;
        // Fault-populated pages count as accessed in the next bitmap.
        f.access_bit = true;
        f.cleared_since_touch = false;
        set_stamp(f, now);
    }

    void VmMemory::populate(PageIndex page)
    {
        PageFrame &f = frame_mut(page);
        if (f.state != Residency::SwappedOut)
        {
            throw InvalidState("VmMemory::populate: page " + std::to_string(page) + " is resident");
        }
        f.mapped = false;
        make_resident(f);
    }

    void VmMemory::unmap(PageIndex page)
    {
        PageFrame &f = frame_mut(page);
        if (f.state != Residency::Resident)
        {
            throw InvalidState("VmMemory::unmap: page " + std::to_string(page) + " is not resident");
        }
        if (f.locked)
        {
            throw LockedPage("VmMemory::unmap: page " + std::to_string(page) + " is locked");
        }
        recency_.erase({f.lru_stamp, f.index});
        --resident_;
        f.state = Residency::SwappedOut;
        f.mapped = false;
        f.access_bit = false;
        f.dirty_bit = false;
        f.cleared_since_touch = false;
    }

    void VmMemory::lock(PageIndex page) { frame_mut(page).locked = true; }

    void VmMemory::unlock(PageIndex page) { frame_mut(page).locked = false; }

    bool VmMemory::needs_writeback(PageIndex page, bool clean_skip) const
    {
        const PageFrame &f = frames_.at(page);
        if (!f.ever_written)
        {
            return false;
        }
        if (!clean_skip)
        {
            return true;
        }
        return f.dirty_bit || !f.backed;
    }

    void VmMemory::set_initial_state(PageIndex page, InitialState state, SimTime now)
    {
        PageFrame &f = frame_mut(page);
        if (f.state == Residency::Resident)
        {
            recency_.erase({f.lru_stamp, f.index});
            --resident_;
        }
        f = PageFrame{};
        f.index = page;
        f.lru_stamp = now;
        switch (state)
        {
        case InitialState::Untouched:
            break;
        case InitialState::Resident:
            f.ever_written = true;
            f.dirty_bit = true;
            f.desired_state = Residency::Resident;
            f.mapped = true;
            make_resident(f);
            break;
        case InitialState::Swapped:
            f.ever_written = true;
            f.backed = true;
            break;
        }
    }
} // namespace flexswap
