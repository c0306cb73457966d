#pragma once

// Rate-grouped scanning of many PLCs. One worker thread per PLC owns that
// PLC's session and engine; public calls post messages to it.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "eip/engine.hpp"

namespace eip::scanner {

class Scanner {
public:
    Scanner() = default;
    ~Scanner();
    Scanner(const Scanner&) = delete;
    Scanner& operator=(const Scanner&) = delete;

    /// Throws UsageError on a duplicate name or an invalid endpoint.
    void add_plc(const std::string& name, client::PlcEndpoint endpoint, EngineOptions options = {});

    /// The tag joins (or creates) the list for its period on the PLC's worker.
    SubscriptionId add_tag(const std::string& plc, TagSpec spec);
    /// Swaps the address at runtime; no reconnect, no restart.
    void replace_tag(SubscriptionId id, tags::TagRef ref);
    /// Sends the value on the worker's next turn. Writes posted together
    /// before the worker wakes are flushed as one batch.
    void write(SubscriptionId id, cip::CipValue value);
    void write_many(const std::vector<std::pair<SubscriptionId, cip::CipValue>>& values);

    TagValue value(SubscriptionId id) const;
    TransferStats stats(const std::string& plc, Period period) const;
    std::vector<std::pair<std::string, Period>> lists() const;

    /// "<plc>/<period ms>/{count,errors,overruns,last_ms,min_ms,max_ms}".
    /// NaN for timings not yet measured; nullopt for unknown names.
    std::optional<double> read_pseudo_tag(const std::string& name) const;

    /// Called on worker threads.
    void set_listener(Listener listener);
    void set_observer(ScanObserver observer);

    void start();
    void stop();
    bool running() const noexcept { return running_; }

    /// Blocks until every worker has processed the messages posted so far.
    void sync();

private:
    struct Worker {
        std::unique_ptr<PlcEngine> engine;
        std::thread thread;
        std::mutex mutex;
        std::condition_variable wake;
        std::deque<std::function<void(PlcEngine&)>> inbox;
    };

    Worker& worker(const std::string& plc);
    Worker& worker_of(SubscriptionId id);
    const Worker& worker_of(SubscriptionId id) const;
    void post(Worker& w, std::function<void(PlcEngine&)> fn);
    void run(Worker& w);

    std::map<std::string, std::unique_ptr<Worker>> workers_;
    struct Owner {
        std::string plc;
        Period period;
    };

    std::map<SubscriptionId, Owner> owner_;
    mutable std::mutex registry_mutex_;
    std::atomic<SubscriptionId> next_id_{1};
    std::atomic<bool> running_{false};
    Listener listener_;
    ScanObserver observer_;
};

}  // namespace eip::scanner
