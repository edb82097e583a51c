#pragma once

#include "flexswap/address_model.hpp"
#include "flexswap/time.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace flexswap
{
    using PageIndex = std::uint64_t;

    enum class Residency : std::uint8_t
    {
        Resident,
        SwappedOut,
    };

    enum class AccessKind : std::uint8_t
    {
        Read,
        Write,
    };

    // How the recency order behind lru_stamp is fed.
    enum class LruSource : std::uint8_t
    {
        Exact, // every simulated access
        Scan,  // only scans and fault-ins, what a real hypervisor can observe
    };

    // Host-side state of one VM page.
    struct PageFrame
    {
        PageIndex index = 0;
        Residency state = Residency::SwappedOut;
        Residency desired_state = Residency::SwappedOut;
        bool access_bit = false;
        bool dirty_bit = false;
        bool locked = false;
        // Resident data is installed in the VM's address space. A resident, unmapped page was
        // prefetched and turns the next access into a minor fault.
        bool mapped = false;
        // Access bit was cleared by a scan since the last touch; the next access pays the
        // walk-cache penalty.
        bool cleared_since_touch = false;
        bool ever_written = false;
        // The swap device holds a valid copy of this page.
        bool backed = false;
        SimTime lru_stamp = 0;
    };

    // Page fault enriched with the guest context registers captured at the violation.
    struct FaultEvent
    {
        PageIndex page = 0;
        GuestContext ctx;
        std::optional<Gva> gva;
        std::optional<std::uint64_t> ip;
        SimTime time = 0;
        // The page's data is already resident (prefetched); no I/O is needed.
        bool minor = false;
    };

    struct AccessBitmap
    {
        SimTime scan_time = 0;
        PageIndex first_page = 0;
        std::vector<bool> bits;

        bool test(PageIndex page) const
        {
            return page >= first_page && page - first_page < bits.size() && bits[page - first_page];
        }
        std::size_t count() const;
        void merge(const AccessBitmap &other);
    };

    struct Hit
    {
        SimTime latency = 0;
    };

    using AccessResult = std::variant<Hit, FaultEvent>;

    class LockedPage : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class InvalidState : public std::logic_error
    {
    public:
        using std::logic_error::logic_error;
    };

    class NoTranslation : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // How a frame starts out before the simulation runs.
    enum class InitialState : std::uint8_t
    {
        Untouched, // never populated; first touch zero-fills
        Resident,  // populated and mapped, not yet on the swap device
        Swapped,   // swapped out with a valid copy on the device
    };

    struct VmMemoryConfig
    {
        PageSize page_size = PageSize::Huge;
        std::uint64_t n_pages = 0;
        // 0 selects the per-size default.
        SimTime hot_latency = 0;
        SimTime cold_penalty_after_clear = 0;
        SimTime scan_cost_per_pte = 10;
        LruSource lru_source = LruSource::Exact;
    };

    inline constexpr SimTime kDefaultHotLatency4k = 180;
    inline constexpr SimTime kDefaultHotLatency2m = 105;

    // Per-page state machine of the VM's host memory.
    class VmMemory
    {
    public:
        VmMemory(VmMemoryConfig config, const AddressSpace &space);

        // Translates through the guest tables and host mapping, then behaves like
        // access_page. Throws NoTranslation when the guest has no mapping.
        AccessResult access(GuestContext ctx, Gva gva, AccessKind rw, std::optional<std::uint64_t> ip, SimTime now);
        AccessResult access_page(PageIndex page, GuestContext ctx, std::optional<Gva> gva, AccessKind rw,
                                 std::optional<std::uint64_t> ip, SimTime now);

        std::optional<PageIndex> page_of(GuestContext ctx, Gva gva) const;
        PageIndex page_of(Hva hva) const;
        Hva hva_of(PageIndex page) const;

        // Reads and clears the access bits of [first, first + count).
        AccessBitmap scan_and_clear(PageIndex first, std::uint64_t count, SimTime now);
        AccessBitmap scan_and_clear_all(SimTime now) { return scan_and_clear(0, frames_.size(), now); }

        // Installs the page. A swapped-out page is populated first; a resident unmapped page is
        // just mapped. Mapping sets the access bit.
        void map(PageIndex page, SimTime now);
        // Populates data without mapping it (prefetch).
        void populate(PageIndex page);
        // Removes the page from the VM. Throws LockedPage for locked frames.
        void unmap(PageIndex page);

        void lock(PageIndex page);
        void unlock(PageIndex page);

        void set_initial_state(PageIndex page, InitialState state, SimTime now = 0);
        void set_desired(PageIndex page, Residency desired) { frame_mut(page).desired_state = desired; }
        void mark_backed(PageIndex page, bool backed) { frame_mut(page).backed = backed; }

        // Swap-out needs a device write: the page holds data and the device copy is missing or
        // stale. With clean_skip off, every written page is written back.
        bool needs_writeback(PageIndex page, bool clean_skip) const;

        const PageFrame &frame(PageIndex page) const { return frames_.at(page); }
        std::uint64_t page_count() const noexcept { return frames_.size(); }
        PageSize page_size() const noexcept { return config_.page_size; }
        std::uint64_t page_bytes() const noexcept { return bytes_of(config_.page_size); }
        std::uint64_t resident_pages() const noexcept { return resident_; }
        std::uint64_t resident_bytes() const noexcept { return resident_ * page_bytes(); }
        SimTime hot_latency() const noexcept { return hot_latency_; }
        const VmMemoryConfig &config() const noexcept { return config_; }

        // Direct CPU time consumed by scans so far.
        SimTime scanner_cpu() const noexcept { return scanner_cpu_; }
        std::uint64_t ptes_scanned() const noexcept { return ptes_scanned_; }

        // Resident pages in ascending (lru_stamp, index) order.
        const std::set<std::pair<SimTime, PageIndex>> &recency() const noexcept { return recency_; }

    private:
        PageFrame &frame_mut(PageIndex page) { return frames_.at(page); }
        void set_stamp(PageFrame &f, SimTime stamp);
        void make_resident(PageFrame &f);

        VmMemoryConfig config_;
        const AddressSpace &space_;
        SimTime hot_latency_;
        std::vector<PageFrame> frames_;
        std::uint64_t resident_ = 0;
        SimTime scanner_cpu_ = 0;
        std::uint64_t ptes_scanned_ = 0;
        std::set<std::pair<SimTime, PageIndex>> recency_;
    };
} // namespace flexswap
