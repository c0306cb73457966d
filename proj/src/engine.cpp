#include "eip/engine.hpp"

#include <algorithm>
#include <set>

namespace eip::scanner {

namespace {

std::string span_key(const PlannedRead& read) {
    return tags::format_tag(read.target) + "#" + std::to_string(read.count);
}

cip::CipValue convert(const cip::CipValue& v, cip::ElemType type) {
    if (v.type() == type) return v;
    std::vector<double> values;
    for (std::size_t i = 0; i < v.size(); ++i) values.push_back(v.as_double(i));
    return cip::CipValue::from_doubles(type, values);
}

tags::TagRef element_ref(const PlannedRead& read, std::uint32_t offset) {
    auto ref = read.target;
    if (read.coalesced) ref.parts.back().index = *read.target.parts.back().index + offset;
    return ref;
}

std::uint32_t with_bit(std::uint32_t word, unsigned bit, bool on) {
    return on ? (word | (1u << bit)) : (word & ~(1u << bit));
}

}  // namespace

std::string_view to_string(Quality q) noexcept {
    switch (q) {
    case Quality::Stale: return "stale";
    case Quality::Ok: return "ok";
    case Quality::Error: return "error";
    }
    return "?";
}

PlcEngine::PlcEngine(std::string name, client::PlcEndpoint endpoint, EngineOptions options)
    : name_(std::move(name)), options_(options), session_(std::move(endpoint)) {}

PackLimits PlcEngine::limits() const {
    return {session_.request_budget(), session_.endpoint().buffer_limit, options_.batch};
}

PlcEngine::List& PlcEngine::list_for(Period period) {
    auto it = lists_.find(period);
    if (it == lists_.end()) throw UsageError("no scan list with period " + std::to_string(period.count()) + " ms");
    return it->second;
}

void PlcEngine::invalidate(Period period) {
    auto& list = lists_[period];
    list.plan.reset();
    list.read_of.clear();
    list.spans.clear();
}

void PlcEngine::add(SubscriptionId id, TagSpec spec) {
    if (members_.count(id)) throw UsageError("duplicate subscription " + std::to_string(id));
    if (spec.period.count() <= 0) throw UsageError("scan period must be positive");
    if (spec.ref.parts.empty()) throw UsageError("empty tag reference");
    if (spec.ref.bool_array && !spec.ref.parts.back().index) {
        throw UsageError("BOOL-array subscription needs an element index: " + tags::format_tag(spec.ref));
    }
    const auto period = spec.period;
    members_.emplace(id, Member{std::move(spec), std::nullopt});
    lists_[period].members.push_back(id);
    invalidate(period);
    std::lock_guard lock(state_mutex_);
    cells_[id] = TagValue{};
    stats_.try_emplace(period);
}

void PlcEngine::replace(SubscriptionId id, tags::TagRef ref) {
    auto it = members_.find(id);
    if (it == members_.end()) throw UsageError("unknown subscription " + std::to_string(id));
    ref.bool_array = ref.bool_array || it->second.spec.ref.bool_array;
    if (ref.bool_array && !ref.parts.back().index) {
        throw UsageError("BOOL-array subscription needs an element index: " + tags::format_tag(ref));
    }
    it->second.spec.ref = std::move(ref);
    it->second.spec.elem_type.reset();
    it->second.pending.reset();
    invalidate(it->second.spec.period);
    std::lock_guard lock(state_mutex_);
    cells_[id] = TagValue{};
}

void PlcEngine::remove(SubscriptionId id) {
    auto it = members_.find(id);
    if (it == members_.end()) return;
    const auto period = it->second.spec.period;
    members_.erase(it);
    auto& list = lists_[period];
    std::erase(list.members, id);
    invalidate(period);
    std::lock_guard lock(state_mutex_);
    cells_.erase(id);
}

const TagSpec& PlcEngine::spec(SubscriptionId id) const {
    auto it = members_.find(id);
    if (it == members_.end()) throw UsageError("unknown subscription " + std::to_string(id));
    return it->second.spec;
}

std::vector<Period> PlcEngine::periods() const {
    std::vector<Period> out;
    for (const auto& [period, list] : lists_) {
        if (!list.members.empty()) out.push_back(period);
    }
    return out;
}

const Plan& PlcEngine::plan(Period period) {
    auto& list = list_for(period);
    if (!list.plan) {
        std::vector<PlanMember> pm;
        pm.reserve(list.members.size());
        for (auto id : list.members) pm.push_back({id, members_.at(id).spec});
        list.plan = plan_reads(pm, limits());
        list.read_of.clear();
        for (std::size_t i = 0; i < list.plan->reads.size(); ++i) {
            for (const auto& s : list.plan->reads[i].slots) list.read_of[s.id] = i;
        }
    }
    return *list.plan;
}

void PlcEngine::set_cell(SubscriptionId id, const cip::CipValue* value, Quality quality, Clock::time_point now,
                         bool own_write) {
    Notification note;
    bool notify = false;
    {
        std::lock_guard lock(state_mutex_);
        auto& cell = cells_[id];
        const auto previous = cell.quality;
        if (value) {
            const bool changed = !cell.has_value || cell.value != *value;
            auto m = members_.find(id);
            const bool output = m != members_.end() && m->second.spec.direction == Direction::Output;
            note.kind = output && !own_write && cell.has_value && changed ? Notification::Kind::Drift
                                                                        : Notification::Kind::Update;
            cell.value = *value;
            cell.has_value = true;
            cell.timestamp = now;
            notify = changed;
        }
        cell.quality = quality;
        notify = notify || previous != quality;
        note.id = id;
        note.value = cell;
    }
    if (notify && listener_) listener_(note);
}

void PlcEngine::mark_list(const List& list, Quality quality) {
    const auto now = Clock::now();
    for (auto id : list.members) set_cell(id, nullptr, quality, now);
}

void PlcEngine::mark_all(Quality quality) {
    for (const auto& [period, list] : lists_) mark_list(list, quality);
}

void PlcEngine::count_error(Period period) {
    std::lock_guard lock(state_mutex_);
    ++stats_[period].errors;
}

void PlcEngine::record_overrun(Period period, std::uint64_t skipped) {
    std::lock_guard lock(state_mutex_);
    stats_[period].overruns += skipped;
}

void PlcEngine::distribute(List& list, const PlannedRead& read, const cip::CipValue& value, Clock::time_point now) {
    if (read.coalesced) list.spans[span_key(read)] = value;
    for (const auto& slot : read.slots) {
        auto& member = members_.at(slot.id);
        if (slot.bit) {
            if (value.type() != cip::ElemType::Dint) {
                set_cell(slot.id, nullptr, Quality::Error, now);
                count_error(member.spec.period);
                continue;
            }
            const auto bit = cip::CipValue::bools({((value.raw(slot.offset) >> *slot.bit) & 1u) != 0});
            set_cell(slot.id, &bit, Quality::Ok, now);
            continue;
        }
        if (member.spec.elem_type && *member.spec.elem_type != value.type()) {
            set_cell(slot.id, nullptr, Quality::Error, now);
            count_error(member.spec.period);
            continue;
        }
        member.spec.elem_type = value.type();
        const auto element = value.slice(slot.offset, 1);
        set_cell(slot.id, &element, Quality::Ok, now);
    }
}

void PlcEngine::execute_scan(Period period) {
    auto& list = list_for(period);
    if (list.members.empty()) return;
    const auto begin = Clock::now();
    if (!session_.usable() && !session_.ensure_connected(begin)) {
        count_error(period);
        mark_all(Quality::Error);
        if (observer_) observer_({name_, period, begin, {}, false, 0});
        return;
    }

    const auto& p = plan(period);
    for (auto id : p.oversize) set_cell(id, nullptr, Quality::Error, begin);

    const auto round_trips_before = session_.round_trips();
    const auto start = Clock::now();
    std::uint64_t errors = p.oversize.empty() ? 0 : 1;
    bool transport_failed = false;

    for (const auto& transfer : p.transfers) {
        auto mark_transfer = [&](std::size_t from) {
            const auto now = Clock::now();
            for (std::size_t k = from; k < transfer.size(); ++k) {
                for (const auto& s : p.reads[transfer[k]].slots) set_cell(s.id, nullptr, Quality::Error, now);
            }
        };
        std::vector<cip::CipResponse> replies;
        try {
            if (transfer.size() == 1) {
                replies.push_back(session_.round_trip(p.reads[transfer[0]].request()));
            } else {
                std::vector<cip::CipRequest> requests;
                requests.reserve(transfer.size());
                for (auto i : transfer) requests.push_back(p.reads[i].request());
                replies = cip::split_multi_response(session_.round_trip(cip::build_multi_request(requests)),
                                                    transfer.size());
            }
        } catch (const Error&) {
            ++errors;
            mark_transfer(0);
            if (!session_.usable()) {
                transport_failed = true;
                break;
            }
            continue;
        }
        const auto now = Clock::now();
        for (std::size_t k = 0; k < transfer.size(); ++k) {
            const auto& read = p.reads[transfer[k]];
            try {
                const auto value = cip::parse_read_response(replies[k]);
                if (value.size() != read.count) throw DecodeError("read reply element count mismatch");
                distribute(list, read, value, now);
            } catch (const Error&) {
                ++errors;
                for (const auto& s : read.slots) set_cell(s.id, nullptr, Quality::Error, now);
            }
        }
    }

    const auto elapsed = Clock::now() - start;
    const auto round_trips = session_.round_trips() - round_trips_before;
    {
        std::lock_guard lock(state_mutex_);
        auto& s = stats_[period];
        s.errors += errors;
        s.last_round_trips = round_trips;
        if (!transport_failed) {
            ++s.count;
            s.last = elapsed;
            if (!s.min || elapsed < *s.min) s.min = elapsed;
            if (!s.max || elapsed > *s.max) s.max = elapsed;
        }
    }
    if (transport_failed) mark_all(Quality::Error);
    if (observer_) observer_({name_, period, begin, elapsed, errors == 0 && !transport_failed, round_trips});
}

void PlcEngine::stage_write(SubscriptionId id, cip::CipValue value) {
    auto it = members_.find(id);
    if (it == members_.end()) throw UsageError("unknown subscription " + std::to_string(id));
    auto& member = it->second;
    if (member.spec.direction != Direction::Output) throw UsageError("write to an input subscription");
    if (value.size() != 1) throw UsageError("a subscription addresses exactly one element");
    if (member.spec.ref.bool_array) {
        value = cip::CipValue::bools({value.as_double(0) != 0.0});
    } else if (member.spec.elem_type) {
        value = convert(value, *member.spec.elem_type);
    }
    member.pending = std::move(value);
}

std::optional<cip::CipValue> PlcEngine::read_span(List& list, const PlannedRead& read) {
    if (read.coalesced) {
        if (auto it = list.spans.find(span_key(read)); it != list.spans.end()) return it->second;
    }
    try {
        auto value = cip::parse_read_response(session_.round_trip(read.request()));
        if (value.size() != read.count) return std::nullopt;
        if (read.coalesced) list.spans[span_key(read)] = value;
        return value;
    } catch (const Error&) {
        return std::nullopt;
    }
}

void PlcEngine::flush_writes() {
    struct PendingWrite {
        cip::CipRequest request;
        Period period;
        std::vector<std::pair<SubscriptionId, cip::CipValue>> cells;
        // Span cache entry to refresh on success.
        std::string span;
        std::uint32_t offset = 0;
        cip::CipValue written;
    };

    std::vector<SubscriptionId> dirty_ids;
    for (const auto& [id, m] : members_) {
        if (m.pending) dirty_ids.push_back(id);
    }
    if (dirty_ids.empty()) return;

    const auto now = Clock::now();
    auto fail_ids = [&](const std::vector<SubscriptionId>& ids) {
        for (auto id : ids) {
            members_.at(id).pending.reset();
            set_cell(id, nullptr, Quality::Error, now);
        }
    };

    if (!session_.usable() && !session_.ensure_connected(now)) {
        fail_ids(dirty_ids);
        return;
    }

    std::vector<PendingWrite> writes;
    std::set<Period> touched;
    for (auto id : dirty_ids) touched.insert(members_.at(id).spec.period);

    for (auto period : touched) {
        auto& list = list_for(period);
        const auto& p = plan(period);
        std::map<std::size_t, std::vector<SubscriptionId>> by_read;
        for (auto id : list.members) {
            if (!members_.at(id).pending) continue;
            auto r = list.read_of.find(id);
            if (r == list.read_of.end()) {
                fail_ids({id});
                continue;
            }
            by_read[r->second].push_back(id);
        }

        for (auto& [ri, ids] : by_read) {
            const auto& read = p.reads[ri];
            std::map<std::uint32_t, std::vector<std::pair<SubscriptionId, const Slot*>>> by_element;
            for (auto id : ids) {
                for (const auto& s : read.slots) {
                    if (s.id == id) by_element[s.offset].push_back({id, &s});
                }
            }

            auto apply = [&](cip::CipValue& words, std::uint32_t base_offset, std::uint32_t offset,
                             const std::vector<std::pair<SubscriptionId, const Slot*>>& members,
                             PendingWrite& w) {
                for (const auto& [id, slot] : members) {
                    const auto& pending = *members_.at(id).pending;
                    const auto i = offset - base_offset;
                    if (slot->bit) {
                        words.set_raw(i, with_bit(words.raw(i), *slot->bit, pending.as_bool(0)));
                    } else {
                        words.set_raw(i, convert(pending, words.type()).raw(0));
                    }
                    w.cells.push_back({id, slot->bit ? pending : convert(pending, words.type())});
                }
            };

            if (read.coalesced && by_element.size() > 1) {
                // Whole first-to-highest span, including elements nobody changed.
                auto span = read_span(list, read);
                if (!span) {
                    fail_ids(ids);
                    continue;
                }
                PendingWrite w;
                w.period = period;
                for (const auto& [offset, members] : by_element) apply(*span, 0, offset, members, w);
                w.request = cip::build_write_request(tags::to_epath(read.target), *span);
                w.span = span_key(read);
                w.written = *span;
                writes.push_back(std::move(w));
                continue;
            }

            for (const auto& [offset, members] : by_element) {
                PendingWrite w;
                w.period = period;
                const bool needs_word = std::any_of(members.begin(), members.end(),
                                                    [](const auto& m) { return m.second->bit.has_value(); });
                cip::CipValue word;
                if (needs_word) {
                    // Read-modify-write of the DINT holding the bits.
                    std::optional<cip::CipValue> source;
                    if (auto it = list.spans.find(span_key(read)); read.coalesced && it != list.spans.end()) {
                        source = it->second.slice(offset, 1);
                    } else {
                        PlannedRead single = read;
                        single.target = element_ref(read, offset);
                        single.count = 1;
                        single.coalesced = false;
                        source = read_span(list, single);
                    }
                    if (!source) {
                        std::vector<SubscriptionId> failed;
                        for (const auto& m : members) failed.push_back(m.first);
                        fail_ids(failed);
                        continue;
                    }
                    word = *source;
                } else {
                    const auto& pending = *members_.at(members.front().first).pending;
                    const auto& spec = members_.at(members.front().first).spec;
                    word = convert(pending, spec.elem_type.value_or(pending.type()));
                }
                apply(word, offset, offset, members, w);
                w.request = cip::build_write_request(tags::to_epath(element_ref(read, offset)), word);
                if (read.coalesced) {
                    w.span = span_key(read);
                    w.offset = offset;
                }
                w.written = word;
                writes.push_back(std::move(w));
            }
        }
    }

    for (auto id : dirty_ids) members_.at(id).pending.reset();
    if (writes.empty()) return;

    std::vector<PackItem> items;
    for (const auto& w : writes) items.push_back({cip::estimate_request_size(w.request), cip::kWriteResponseSize});
    const auto packing = pack(items, limits());

    auto finish = [&](PendingWrite& w, const cip::CipResponse* reply) {
        const auto when = Clock::now();
        bool ok = false;
        if (reply) {
            try {
                cip::expect_success(*reply, cip::service::kWriteData);
                ok = true;
            } catch (const Error&) {
            }
        }
        if (!ok) count_error(w.period);
        for (auto& [id, value] : w.cells) {
            if (ok) {
                set_cell(id, &value, Quality::Ok, when, true);
            } else {
                set_cell(id, nullptr, Quality::Error, when);
            }
        }
        if (ok && !w.span.empty()) {
            auto& spans = list_for(w.period).spans;
            if (auto it = spans.find(w.span); it != spans.end()) {
                for (std::size_t i = 0; i < w.written.size(); ++i) it->second.set_raw(w.offset + i, w.written.raw(i));
            }
        }
    };

    for (auto i : packing.oversize) finish(writes[i], nullptr);
    for (const auto& transfer : packing.transfers) {
        std::vector<cip::CipResponse> replies;
        try {
            if (transfer.size() == 1) {
                replies.push_back(session_.round_trip(writes[transfer[0]].request));
            } else {
                std::vector<cip::CipRequest> requests;
                for (auto i : transfer) requests.push_back(writes[i].request);
                replies = cip::split_multi_response(session_.round_trip(cip::build_multi_request(requests)),
                                                    transfer.size());
            }
        } catch (const Error&) {
            for (auto i : transfer) finish(writes[i], nullptr);
            if (!session_.usable()) {
                mark_all(Quality::Error);
                return;
            }
            continue;
        }
        for (std::size_t k = 0; k < transfer.size(); ++k) finish(writes[transfer[k]], &replies[k]);
    }
}

TagValue PlcEngine::value(SubscriptionId id) const {
    std::lock_guard lock(state_mutex_);
    auto it = cells_.find(id);
    if (it == cells_.end()) throw UsageError("unknown subscription " + std::to_string(id));
    return it->second;
}

TransferStats PlcEngine::stats(Period period) const {
    std::lock_guard lock(state_mutex_);
    auto it = stats_.find(period);
    return it == stats_.end() ? TransferStats{} : it->second;
}

}  // namespace eip::scanner
