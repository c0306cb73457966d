#include "eip/plan.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace eip::scanner {

namespace {

// Unknown types are estimated at the widest element.
std::size_t reply_estimate(std::optional<cip::ElemType> type, std::size_t count) {
    return cip::estimate_response_size(type.value_or(cip::ElemType::Dint), count);
}

struct Group {
    tags::TagRef base;
    std::optional<cip::ElemType> type;
    bool coalesce = false;
    std::vector<std::pair<std::uint32_t, Slot>> elements;  // wire index, slot
};

}  // namespace

cip::CipRequest PlannedRead::request() const { return cip::build_read_request(tags::to_epath(target), count); }

std::size_t PlannedRead::request_size() const { return cip::estimate_request_size(request()); }

std::size_t PlannedRead::response_size() const { return reply_estimate(elem_type, count); }

std::size_t multi_request_size(std::size_t summed_requests, std::size_t count) noexcept {
    return cip::kMultiRequestOverhead + summed_requests + 2 * count;
}

std::size_t multi_response_size(std::size_t summed_responses, std::size_t count) noexcept {
    return cip::kMultiResponseOverhead + summed_responses + 2 * count;
}

Packing pack(const std::vector<PackItem>& items, const PackLimits& limits) {
    Packing out;
    std::vector<std::size_t> current;
    std::size_t req_sum = 0;
    std::size_t resp_sum = 0;
    auto flush = [&] {
        if (!current.empty()) out.transfers.push_back(std::move(current));
        current.clear();
        req_sum = 0;
        resp_sum = 0;
    };
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        if (item.request_size > limits.request_budget || item.response_size > limits.response_budget) {
            out.oversize.push_back(i);
            continue;
        }
        if (!current.empty()) {
            const auto n = current.size() + 1;
            const bool fits = limits.batch &&
                              multi_request_size(req_sum + item.request_size, n) <= limits.request_budget &&
                              multi_response_size(resp_sum + item.response_size, n) <= limits.response_budget;
            if (!fits) flush();
        }
        current.push_back(i);
        req_sum += item.request_size;
        resp_sum += item.response_size;
    }
    flush();
    return out;
}

std::pair<tags::TagRef, std::optional<unsigned>> wire_ref(const TagSpec& spec) {
    if (spec.ref.bool_array) {
        auto [dint, bit] = tags::bool_remap(spec.ref);
        dint.bool_array = false;
        return {dint, bit};
    }
    return {spec.ref, std::nullopt};
}

std::vector<PlannedRead> coalesce(const std::vector<PlanMember>& members, const PackLimits& limits) {
    // Groups keyed by array (or exact element when not coalescing), kept in
    // order of first appearance.
    std::vector<Group> groups;
    std::map<std::string, std::size_t> index;

    for (const auto& m : members) {
        auto [ref, bit] = wire_ref(m.spec);
        const auto type = m.spec.ref.bool_array ? std::optional(cip::ElemType::Dint) : m.spec.elem_type;
        const bool indexed = ref.parts.back().index.has_value();
        const bool span = m.spec.coalesce && indexed;
        const auto base = span ? tags::array_base(ref) : ref;
        const auto type_key = type ? std::to_string(cip::type_code(*type)) : std::string("?");
        const auto key = (span ? "span:" : "one:") + tags::format_tag(base) + "/" + type_key;

        auto [it, inserted] = index.try_emplace(key, groups.size());
        if (inserted) groups.push_back(Group{base, type, span, {}});
        const std::uint32_t element = indexed ? *ref.parts.back().index : 0;
        groups[it->second].elements.push_back({element, Slot{m.id, 0, bit}});
    }

    std::vector<PlannedRead> reads;
    for (auto& g : groups) {
        if (!g.coalesce) {
            PlannedRead r;
            r.target = g.base;
            r.elem_type = g.type;
            for (auto& [element, slot] : g.elements) r.slots.push_back(slot);
            reads.push_back(std::move(r));
            continue;
        }
        std::stable_sort(g.elements.begin(), g.elements.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        // Greedy chunks: extend while the span's reply still fits.
        std::size_t i = 0;
        while (i < g.elements.size()) {
            const auto first = g.elements[i].first;
            std::size_t j = i;
            while (j + 1 < g.elements.size()) {
                const std::uint64_t span = std::uint64_t{g.elements[j + 1].first} - first + 1;
                if (span > 0xFFFF || reply_estimate(g.type, span) > limits.response_budget) break;
                ++j;
            }
            PlannedRead r;
            r.target = g.base;
            r.target.parts.back().index = first;
            r.count = static_cast<std::uint16_t>(g.elements[j].first - first + 1);
            r.elem_type = g.type;
            r.coalesced = true;
            for (std::size_t k = i; k <= j; ++k) {
                auto slot = g.elements[k].second;
                slot.offset = g.elements[k].first - first;
                r.slots.push_back(slot);
            }
            reads.push_back(std::move(r));
            i = j + 1;
        }
    }
    return reads;
}

Plan plan_reads(const std::vector<PlanMember>& members, const PackLimits& limits) {
    Plan plan;
    plan.reads = coalesce(members, limits);
    std::vector<PackItem> items;
    items.reserve(plan.reads.size());
    for (const auto& r : plan.reads) items.push_back({r.request_size(), r.response_size()});
    auto packing = pack(items, limits);
    plan.transfers = std::move(packing.transfers);
    for (auto i : packing.oversize) {
        for (const auto& s : plan.reads[i].slots) plan.oversize.push_back(s.id);
    }
    return plan;
}

}  // namespace eip::scanner
