#include "eip/scanner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iostream>
#include <limits>

namespace eip::scanner {

Scanner::~Scanner() { stop(); }

void Scanner::add_plc(const std::string& name, client::PlcEndpoint endpoint, EngineOptions options) {
    std::lock_guard lock(registry_mutex_);
    if (workers_.count(name)) throw UsageError("duplicate PLC name " + name);
    auto w = std::make_unique<Worker>();
    w->engine = std::make_unique<PlcEngine>(name, std::move(endpoint), options);
    if (listener_) w->engine->set_listener(listener_);
    if (observer_) w->engine->set_observer(observer_);
    auto& ref = *w;
    workers_.emplace(name, std::move(w));
    if (running_) ref.thread = std::thread([this, &ref] { run(ref); });
}

Scanner::Worker& Scanner::worker(const std::string& plc) {
    std::lock_guard lock(registry_mutex_);
    auto it = workers_.find(plc);
    if (it == workers_.end()) throw UsageError("unknown PLC " + plc);
    return *it->second;
}

Scanner::Worker& Scanner::worker_of(SubscriptionId id) {
    std::lock_guard lock(registry_mutex_);
    auto it = owner_.find(id);
    if (it == owner_.end()) throw UsageError("unknown subscription " + std::to_string(id));
    return *workers_.at(it->second.plc);
}

const Scanner::Worker& Scanner::worker_of(SubscriptionId id) const {
    std::lock_guard lock(registry_mutex_);
    auto it = owner_.find(id);
    if (it == owner_.end()) throw UsageError("unknown subscription " + std::to_string(id));
    return *workers_.at(it->second.plc);
}

void Scanner::post(Worker& w, std::function<void(PlcEngine&)> fn) {
    std::lock_guard lock(w.mutex);
    if (!running_) {
        fn(*w.engine);
        return;
    }
    w.inbox.push_back(std::move(fn));
    w.wake.notify_one();
}

SubscriptionId Scanner::add_tag(const std::string& plc, TagSpec spec) {
    if (spec.period.count() <= 0) throw UsageError("scan period must be positive");
    auto& w = worker(plc);
    const auto id = next_id_++;
    {
        std::lock_guard lock(registry_mutex_);
        owner_[id] = Owner{plc, spec.period};
    }
    post(w, [id, spec = std::move(spec)](PlcEngine& e) { e.add(id, spec); });
    return id;
}

void Scanner::replace_tag(SubscriptionId id, tags::TagRef ref) {
    post(worker_of(id), [id, ref = std::move(ref)](PlcEngine& e) { e.replace(id, ref); });
}

void Scanner::write(SubscriptionId id, cip::CipValue value) { write_many({{id, std::move(value)}}); }

void Scanner::write_many(const std::vector<std::pair<SubscriptionId, cip::CipValue>>& values) {
    std::map<Worker*, std::vector<std::pair<SubscriptionId, cip::CipValue>>> grouped;
    for (const auto& v : values) grouped[&worker_of(v.first)].push_back(v);
    for (auto& [w, batch] : grouped) {
        post(*w, [batch = std::move(batch), running = running_.load()](PlcEngine& e) {
            for (const auto& [id, value] : batch) e.stage_write(id, value);
            if (!running) e.flush_writes();
        });
    }
}

TagValue Scanner::value(SubscriptionId id) const {
    const auto& w = worker_of(id);
    try {
        return w.engine->value(id);
    } catch (const UsageError&) {
        return {};  // not yet delivered to the worker
    }
}

TransferStats Scanner::stats(const std::string& plc, Period period) const {
    std::lock_guard lock(registry_mutex_);
    auto it = workers_.find(plc);
    if (it == workers_.end()) throw UsageError("unknown PLC " + plc);
    return it->second->engine->stats(period);
}

std::vector<std::pair<std::string, Period>> Scanner::lists() const {
    std::vector<std::pair<std::string, Period>> out;
    std::lock_guard lock(registry_mutex_);
    for (const auto& [id, owner] : owner_) out.emplace_back(owner.plc, owner.period);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::optional<double> Scanner::read_pseudo_tag(const std::string& name) const {
    const auto first = name.find('/');
    const auto second = name.find('/', first == std::string::npos ? first : first + 1);
    if (first == std::string::npos || second == std::string::npos) return std::nullopt;
    const auto plc = name.substr(0, first);
    const auto period_text = name.substr(first + 1, second - first - 1);
    const auto field = name.substr(second + 1);
    char* end = nullptr;
    const auto ms = std::strtol(period_text.c_str(), &end, 10);
    if (period_text.empty() || *end != '\0' || ms <= 0) return std::nullopt;

    const auto known = lists();
    if (std::find(known.begin(), known.end(), std::pair{plc, Period(ms)}) == known.end()) return std::nullopt;
    const auto s = stats(plc, Period(ms));
    auto millis = [](const std::optional<Clock::duration>& d) {
        return d ? std::chrono::duration<double, std::milli>(*d).count() : std::numeric_limits<double>::quiet_NaN();
    };
    if (field == "count") return static_cast<double>(s.count);
    if (field == "errors") return static_cast<double>(s.errors);
    if (field == "overruns") return static_cast<double>(s.overruns);
    if (field == "last_ms") return millis(s.last);
    if (field == "min_ms") return millis(s.min);
    if (field == "max_ms") return millis(s.max);
    return std::nullopt;
}

void Scanner::set_listener(Listener listener) {
    std::lock_guard lock(registry_mutex_);
    listener_ = std::move(listener);
    for (auto& [name, w] : workers_) post(*w, [l = listener_](PlcEngine& e) { e.set_listener(l); });
}

void Scanner::set_observer(ScanObserver observer) {
    std::lock_guard lock(registry_mutex_);
    observer_ = std::move(observer);
    for (auto& [name, w] : workers_) post(*w, [o = observer_](PlcEngine& e) { e.set_observer(o); });
}

void Scanner::start() {
    std::lock_guard lock(registry_mutex_);
    if (running_.exchange(true)) return;
    for (auto& [name, w] : workers_) {
        auto* raw = w.get();
        raw->thread = std::thread([this, raw] { run(*raw); });
    }
}

void Scanner::stop() {
    {
        std::lock_guard lock(registry_mutex_);
        if (!running_.exchange(false)) return;
        for (auto& [name, w] : workers_) {
            std::lock_guard wl(w->mutex);
            w->wake.notify_all();
        }
    }
    for (auto& [name, w] : workers_) {
        if (w->thread.joinable()) w->thread.join();
        // Drain anything posted after the last turn.
        std::deque<std::function<void(PlcEngine&)>> rest;
        rest.swap(w->inbox);
        for (auto& fn : rest) fn(*w->engine);
        w->engine->flush_writes();
    }
}

void Scanner::sync() {
    std::vector<std::future<void>> done;
    {
        std::lock_guard lock(registry_mutex_);
        for (auto& [name, w] : workers_) {
            auto p = std::make_shared<std::promise<void>>();
            done.push_back(p->get_future());
            post(*w, [p](PlcEngine&) { p->set_value(); });
        }
    }
    for (auto& f : done) f.wait();
}

void Scanner::run(Worker& w) {
    std::map<Period, Clock::time_point> due;
    auto& engine = *w.engine;
    while (running_) {
        std::deque<std::function<void(PlcEngine&)>> batch;
        {
            std::lock_guard lock(w.mutex);
            batch.swap(w.inbox);
        }
        for (auto& fn : batch) {
            try {
                fn(engine);
            } catch (const Error& e) {
                std::clog << "eip: " << engine.name() << ": " << e.what() << '\n';
            }
        }
        engine.flush_writes();

        auto now = Clock::now();
        const auto periods = engine.periods();
        std::map<Period, Clock::time_point> next;
        for (auto p : periods) next[p] = due.count(p) ? due[p] : now;
        due.swap(next);

        for (auto& [period, tick] : due) {
            if (Clock::now() < tick) continue;
            engine.execute_scan(period);
            tick += period;
            const auto after = Clock::now();
            if (after >= tick) {
                const auto skipped = static_cast<std::uint64_t>((after - tick) / period) + 1;
                engine.record_overrun(period, skipped);
                tick += period * static_cast<long>(skipped);
            }
        }

        auto wake_at = now + std::chrono::milliseconds(100);
        for (const auto& [period, tick] : due) wake_at = std::min(wake_at, tick);
        std::unique_lock lock(w.mutex);
        w.wake.wait_until(lock, wake_at, [&] { return !w.inbox.empty() || !running_; });
    }
}

}  // namespace eip::scanner
