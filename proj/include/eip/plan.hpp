#pragma once

// Transfer planning for one scan list: coalesce element subscriptions of the
// same array into span reads, then pack reads into Multi-Requests that stay
// under the PLC buffer limit for both request and expected reply.

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "eip/cip.hpp"
#include "eip/tags.hpp"

namespace eip::scanner {

using SubscriptionId = std::uint64_t;

enum class Direction { Input, Output };

struct TagSpec {
    tags::TagRef ref;
    Direction direction = Direction::Input;
    std::chrono::milliseconds period{1000};
    /// Empty until discovered from the first read.
    std::optional<cip::ElemType> elem_type;
    /// Allow this element to share a span read with its neighbours.
    bool coalesce = true;
};

struct PlanMember {
    SubscriptionId id = 0;
    TagSpec spec;
};

/// Where one subscription's value sits inside a read reply.
struct Slot {
    SubscriptionId id = 0;
    std::uint32_t offset = 0;
    /// BOOL-array bit inside the DINT at `offset`.
    std::optional<unsigned> bit;

    friend bool operator==(const Slot&, const Slot&) = default;
};

struct PlannedRead {
    /// Starting element (or bare scalar) to read.
    tags::TagRef target;
    std::uint16_t count = 1;
    /// Width used for the reply estimate; DINT for BOOL arrays.
    std::optional<cip::ElemType> elem_type;
    std::vector<Slot> slots;
    /// True when built from coalescable members of one array.
    bool coalesced = false;

    cip::CipRequest request() const;
    std::size_t request_size() const;
    std::size_t response_size() const;
};

struct PackLimits {
    /// Largest inner request (bare or multi) the transport can carry.
    std::size_t request_budget = 485;
    /// Largest reply the PLC will produce.
    std::size_t response_budget = 500;
    /// False sends every request on its own (no Multi-Request).
    bool batch = true;
};

struct PackItem {
    std::size_t request_size = 0;
    std::size_t response_size = 0;
};

struct Packing {
    /// Groups of item indices, in input order; singletons go out bare.
    std::vector<std::vector<std::size_t>> transfers;
    /// Items that do not fit the limits even alone.
    std::vector<std::size_t> oversize;
};

/// Next-fit packing in input order: a new transfer starts when adding an item
/// would push the multi-request or the summed reply past its budget.
Packing pack(const std::vector<PackItem>& items, const PackLimits& limits);

/// Encoded size of a multi-request / multi-reply holding the given items.
std::size_t multi_request_size(std::size_t summed_requests, std::size_t count) noexcept;
std::size_t multi_response_size(std::size_t summed_responses, std::size_t count) noexcept;

/// Groups members into reads. Coalescable indexed members of one array become
/// a single first-to-highest span read, chunked when the span's reply would
/// exceed the response budget; everything else is read element by element.
std::vector<PlannedRead> coalesce(const std::vector<PlanMember>& members, const PackLimits& limits);

struct Plan {
    std::vector<PlannedRead> reads;
    /// Indices into reads.
    std::vector<std::vector<std::size_t>> transfers;
    /// Members whose read cannot fit the buffer limit at all.
    std::vector<SubscriptionId> oversize;
};

Plan plan_reads(const std::vector<PlanMember>& members, const PackLimits& limits);

/// The wire reference and optional bit a member is read through.
std::pair<tags::TagRef, std::optional<unsigned>> wire_ref(const TagSpec& spec);

}  // namespace eip::scanner
