#include "cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "eip/client.hpp"
#include "eip/plcsim.hpp"
#include "eip/scan_config.hpp"
#include "eip/scanner.hpp"
#include "eip/tags.hpp"

namespace eip::cli {

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

void install_signal_handlers() {
    g_interrupted = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

struct Globals {
    std::uint16_t port = encap::kDefaultPort;
    int slot = 0;
    int timeout_ms = 3000;
    std::size_t limit = 500;
    bool connected = false;
    bool no_coalesce = false;
    bool port_given = false;
    bool limit_given = false;
    bool timeout_given = false;
};

client::PlcEndpoint endpoint_for(const std::string& host, const Globals& g) {
    if (g.slot < 0 || g.slot > 255) throw UsageError("slot out of range");
    if (g.timeout_ms <= 0) throw UsageError("timeout must be positive");
    auto ep = client::parse_host_port(host, g.port);
    ep.slot = static_cast<std::uint8_t>(g.slot);
    ep.buffer_limit = g.limit;
    ep.request_timeout = std::chrono::milliseconds(g.timeout_ms);
    ep.connected_messaging = g.connected;
    ep.validate();
    return ep;
}

std::vector<double> parse_numbers(const std::vector<std::string>& words) {
    std::vector<double> out;
    for (const auto& word : words) {
        std::stringstream items(word);
        for (std::string item; std::getline(items, item, ',');) {
            if (item == "true") {
                out.push_back(1);
                continue;
            }
            if (item == "false") {
                out.push_back(0);
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(item.c_str(), &end);
            if (item.empty() || *end != '\0') throw UsageError("not a number: '" + item + "'");
            out.push_back(v);
        }
    }
    if (out.empty()) throw UsageError("no values to write");
    return out;
}

std::string millis(const std::optional<scanner::Clock::duration>& d) {
    if (!d) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", std::chrono::duration<double, std::milli>(*d).count());
    return buf;
}

int cmd_info(const Globals& g, const std::string& host, std::ostream& out) {
    client::Session session(endpoint_for(host, g));
    session.connect();
    out << client::read_product_name(session) << '\n';
    session.disconnect();
    return kSuccess;
}

int cmd_read(const Globals& g, const std::string& host, const std::string& tag, int count, std::ostream& out) {
    if (count < 1 || count > 0xFFFF) throw UsageError("count must be in [1, 65535]");
    const auto ref = tags::parse_tag(tag);
    client::Session session(endpoint_for(host, g));
    session.connect();
    const auto value = client::read_tag(session, tags::to_epath(ref), static_cast<std::uint16_t>(count));
    out << cip::format_value(value) << '\n';
    session.disconnect();
    return kSuccess;
}

int cmd_write(const Globals& g, const std::string& host, const std::string& tag, const std::vector<std::string>& words,
              const std::string& type_name) {
    const auto ref = tags::parse_tag(tag);
    const auto numbers = parse_numbers(words);
    if (numbers.size() > 0xFFFF) throw UsageError("too many values");
    std::optional<cip::ElemType> type;
    if (!type_name.empty()) {
        type = cip::elem_type_from_name(type_name);
        if (!type) throw UsageError("unknown type '" + type_name + "'");
    }
    // Conversion errors for an explicit type surface before connecting.
    if (type) (void)cip::CipValue::from_doubles(*type, numbers);

    client::Session session(endpoint_for(host, g));
    session.connect();
    const auto path = tags::to_epath(ref);
    if (!type) type = client::read_tag(session, path, static_cast<std::uint16_t>(numbers.size())).type();
    client::write_tag(session, path, cip::CipValue::from_doubles(*type, numbers));
    session.disconnect();
    return kSuccess;
}

int cmd_scan(const Globals& g, const std::string& config_path, const std::string& duration_text,
             const std::string& samples_path, std::ostream& out, std::ostream& err) {
    const auto duration = parse_duration(duration_text);
    if (!duration) throw UsageError("bad duration '" + duration_text + "'");
    auto config = scanner::load_scan_config(config_path);
    if (config.plcs.empty()) throw UsageError(config_path + ": no plc lines");

    std::ofstream samples;
    if (!samples_path.empty()) {
        samples.open(samples_path);
        if (!samples) throw UsageError("cannot write " + samples_path);
        samples << "timestamp_ms,list_period_ms,transfer_ms\n";
    }

    scanner::Scanner scan;
    for (auto& plc : config.plcs) {
        if (g.limit_given) plc.endpoint.buffer_limit = g.limit;
        if (g.timeout_given) plc.endpoint.request_timeout = std::chrono::milliseconds(g.timeout_ms);
        if (g.connected) plc.endpoint.connected_messaging = true;
        plc.endpoint.validate();
        scan.add_plc(plc.name, plc.endpoint);
    }
    for (auto& tag : config.tags) {
        if (g.no_coalesce) tag.spec.coalesce = false;
        scan.add_tag(tag.plc, tag.spec);
    }

    const auto start = scanner::Clock::now();
    std::mutex samples_mutex;
    if (samples.is_open()) {
        scan.set_observer([&](const scanner::ScanSample& s) {
            const auto at = std::chrono::duration<double, std::milli>(s.when - start).count();
            const auto took = std::chrono::duration<double, std::milli>(s.transfer_time).count();
            std::lock_guard lock(samples_mutex);
            samples << std::fixed << std::setprecision(3) << at << ',' << s.period.count() << ',' << took << '\n';
        });
    }

    install_signal_handlers();
    scan.start();
    auto next_report = start + std::chrono::seconds(1);
    const auto end = start + *duration;
    while (!g_interrupted) {
        const auto now = scanner::Clock::now();
        if (now >= next_report) {
            const auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(now - start).count();
            for (const auto& [plc, period] : scan.lists()) {
                const auto s = scan.stats(plc, period);
                out << "t=" << elapsed << "s plc=" << plc << " period=" << period.count() << "ms count=" << s.count
                    << " errors=" << s.errors << " overruns=" << s.overruns << " last_ms=" << millis(s.last)
                    << " min_ms=" << millis(s.min) << " max_ms=" << millis(s.max) << '\n';
            }
            out.flush();
            next_report += std::chrono::seconds(1);
        }
        if (now >= end) break;
        std::this_thread::sleep_until(std::min({next_report, end, now + std::chrono::milliseconds(100)}));
    }
    scan.stop();
    if (g_interrupted) err << "interrupted\n";
    return kSuccess;
}

int cmd_sim(const Globals& g, const std::string& tags_path, std::optional<std::uint16_t> port,
            std::optional<std::size_t> limit, int latency_ms, const std::string& faults_text,
            const std::string& address, std::ostream& out) {
    auto store = plcsim::load_tag_file(tags_path);
    auto faults = plcsim::parse_faults(faults_text);
    if (latency_ms < 0) throw UsageError("latency must not be negative");
    if (latency_ms > 0) faults.latency = std::chrono::milliseconds(latency_ms);
    if (limit) {
        store.limit = *limit;
    } else if (g.limit_given) {
        store.limit = g.limit;
    }
    const std::uint16_t bind_port = port ? *port : (g.port_given ? g.port : encap::kDefaultPort);

    install_signal_handlers();
    auto server = plcsim::serve(address, bind_port, std::move(store), faults);
    out << "listening on " << server->address() << ':' << server->port() << std::endl;
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server->stop();
    return kSuccess;
}

}  // namespace

std::optional<std::chrono::milliseconds> parse_duration(const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end == text.c_str() || v < 0) return std::nullopt;
    const std::string unit(end);
    double scale = 0;
    if (unit.empty() || unit == "s") {
        scale = 1000;
    } else if (unit == "ms") {
        scale = 1;
    } else if (unit == "m") {
        scale = 60'000;
    } else if (unit == "h") {
        scale = 3'600'000;
    } else {
        return std::nullopt;
    }
    return std::chrono::milliseconds(static_cast<std::int64_t>(v * scale));
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app("EtherNet/IP tag access, scanning and PLC simulation", "eiptool");
    app.require_subcommand(1);

    Globals g;
    auto* port_opt = app.add_option("--port", g.port, "Target TCP port")->capture_default_str();
    app.add_option("--slot", g.slot, "Backplane slot of the processor")->capture_default_str();
    auto* timeout_opt = app.add_option("--timeout-ms", g.timeout_ms, "Per-request timeout")->capture_default_str();
    auto* limit_opt = app.add_option("--limit", g.limit, "Buffer limit in bytes")->capture_default_str();
    app.add_flag("--connected", g.connected, "Use connected messaging (Forward_Open)");
    app.add_flag("--no-coalesce", g.no_coalesce, "Read array elements individually when scanning");

    std::string host;
    std::string tag;
    int count = 1;
    std::vector<std::string> values;
    std::string type_name;

    auto* info = app.add_subcommand("info", "Print the module's product name");
    info->add_option("host", host, "host[:port]")->required();

    auto* read = app.add_subcommand("read", "Read a tag");
    read->add_option("host", host, "host[:port]")->required();
    read->add_option("tag", tag, "Tag reference")->required();
    read->add_option("count", count, "Element count")->capture_default_str();

    auto* write = app.add_subcommand("write", "Write a tag");
    write->add_option("host", host, "host[:port]")->required();
    write->add_option("tag", tag, "Tag reference")->required();
    write->add_option("values", values, "Values, space or comma separated")->required();
    write->add_option("--type", type_name, "BOOL, SINT, INT, DINT or REAL; read from the PLC when omitted");

    std::string config_path;
    std::string duration = "10s";
    std::string samples_path;
    auto* scan = app.add_subcommand("scan", "Run the scan lists of a configuration file");
    scan->add_option("config", config_path, "Scan configuration")->required();
    scan->add_option("--duration", duration, "Run time, e.g. 30s, 5m")->capture_default_str();
    scan->add_option("--samples-out", samples_path, "CSV of per-scan transfer times");

    std::string tags_path;
    std::optional<std::uint16_t> sim_port;
    std::optional<std::size_t> sim_limit;
    int latency_ms = 0;
    std::string faults;
    std::string address = "0.0.0.0";
    auto* sim = app.add_subcommand("sim", "Run the PLC simulator");
    sim->add_option("tags", tags_path, "Tag definition file")->required();
    sim->add_option("--port", sim_port, "Listen port (default 44818)");
    sim->add_option("--latency-ms", latency_ms, "Added delay per reply");
    sim->add_option("--limit", sim_limit, "Buffer limit in bytes (default 500)");
    sim->add_option("--faults", faults, "Fault plan, e.g. drop-after=10,status=4C:08");
    sim->add_option("--address", address, "Listen address")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }
    g.port_given = port_opt->count() > 0;
    g.limit_given = limit_opt->count() > 0;
    g.timeout_given = timeout_opt->count() > 0;

    try {
        if (info->parsed()) return cmd_info(g, host, out);
        if (read->parsed()) return cmd_read(g, host, tag, count, out);
        if (write->parsed()) return cmd_write(g, host, tag, values, type_name);
        if (scan->parsed()) return cmd_scan(g, config_path, duration, samples_path, out, err);
        if (sim->parsed()) return cmd_sim(g, tags_path, sim_port, sim_limit, latency_ms, faults, address, out);
    } catch (const TimeoutError& e) {
        err << "timeout: " << e.what() << '\n';
        return kTimeout;
    } catch (const CipError& e) {
        err << e.what() << '\n';
        return kCipStatus;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "connection error: " << e.what() << '\n';
        return kConnection;
    }
    return kUsage;
}

}  // namespace eip::cli
