#pragma once

// Scan execution for one PLC. Not thread-safe apart from the value/stats
// snapshots: a single worker drives it (see Scanner).

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "eip/client.hpp"
#include "eip/plan.hpp"

namespace eip::scanner {

using Clock = client::Clock;
using Period = std::chrono::milliseconds;

enum class Quality { Stale, Ok, Error };

std::string_view to_string(Quality q) noexcept;

struct TagValue {
    cip::CipValue value;
    bool has_value = false;
    Quality quality = Quality::Stale;
    Clock::time_point timestamp{};
};

struct TransferStats {
    std::uint64_t count = 0;
    std::uint64_t errors = 0;
    std::uint64_t overruns = 0;
    std::optional<Clock::duration> last;
    std::optional<Clock::duration> min;
    std::optional<Clock::duration> max;
    /// Wire round trips spent by the most recent scan.
    std::uint64_t last_round_trips = 0;
};

struct Notification {
    enum class Kind { Update, Drift };
    Kind kind = Kind::Update;
    SubscriptionId id = 0;
    TagValue value;
};

using Listener = std::function<void(const Notification&)>;

struct ScanSample {
    std::string plc;
    Period period{};
    Clock::time_point when{};
    Clock::duration transfer_time{};
    bool ok = true;
    std::uint64_t round_trips = 0;
};

using ScanObserver = std::function<void(const ScanSample&)>;

struct EngineOptions {
    /// Combine requests into Multi-Requests.
    bool batch = true;
};

class PlcEngine {
public:
    PlcEngine(std::string name, client::PlcEndpoint endpoint, EngineOptions options = {});

    const std::string& name() const noexcept { return name_; }
    client::Session& session() noexcept { return session_; }

    /// Throws UsageError on a duplicate id or a non-positive period.
    void add(SubscriptionId id, TagSpec spec);
    /// Swaps the address in place; value goes stale, the list is replanned.
    void replace(SubscriptionId id, tags::TagRef ref);
    void remove(SubscriptionId id);
    bool contains(SubscriptionId id) const { return members_.count(id) != 0; }
    const TagSpec& spec(SubscriptionId id) const;

    std::vector<Period> periods() const;
    /// Cached plan for the list, rebuilt after membership changes.
    const Plan& plan(Period period);
    /// One pass over the list: reconnect if due, read, distribute, update stats.
    void execute_scan(Period period);

    /// Queue a value for an output; flush_writes() sends it.
    void stage_write(SubscriptionId id, cip::CipValue value);
    /// Writes every staged value: the whole coalesced span when more than one
    /// element of it is dirty, single elements otherwise.
    void flush_writes();
    void write(SubscriptionId id, cip::CipValue value) {
        stage_write(id, std::move(value));
        flush_writes();
    }

    void record_overrun(Period period, std::uint64_t skipped);

    TagValue value(SubscriptionId id) const;
    TransferStats stats(Period period) const;
    PackLimits limits() const;

    void set_listener(Listener listener) { listener_ = std::move(listener); }
    void set_observer(ScanObserver observer) { observer_ = std::move(observer); }

private:
    struct Member {
        TagSpec spec;
        std::optional<cip::CipValue> pending;
    };

    struct List {
        std::vector<SubscriptionId> members;
        std::optional<Plan> plan;
        // Last reply for each span read, keyed by read target + count.
        std::map<std::string, cip::CipValue> spans;
        std::map<SubscriptionId, std::size_t> read_of;
    };

    List& list_for(Period period);
    void invalidate(Period period);
    void set_cell(SubscriptionId id, const cip::CipValue* value, Quality quality, Clock::time_point now,
                  bool own_write = false);
    void mark_list(const List& list, Quality quality);
    void mark_all(Quality quality);
    void distribute(List& list, const PlannedRead& read, const cip::CipValue& value, Clock::time_point now);
    std::optional<cip::CipValue> read_span(List& list, const PlannedRead& read);
    void count_error(Period period);

    std::string name_;
    EngineOptions options_;
    client::Session session_;
    std::map<SubscriptionId, Member> members_;
    std::map<Period, List> lists_;
    Listener listener_;
    ScanObserver observer_;

    mutable std::mutex state_mutex_;
    std::map<SubscriptionId, TagValue> cells_;
    std::map<Period, TransferStats> stats_;
};

}  // namespace eip::scanner
