#pragma once

// Soft PLC speaking EtherNet/IP: an Ethernet-module front end (sessions,
// Connection Manager routing, Forward_Open) in front of a processor whose
// Message Router serves Logix read/write requests from a tag store.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "eip/cip.hpp"
#include "eip/encap.hpp"
#include "eip/net.hpp"

namespace eip::plcsim {

using Clock = net::Clock;

struct Identity {
    std::string product_name = "1756-ENET/A ";
    std::uint16_t vendor_id = 1;
    std::uint16_t device_type = 0x0C;
    std::uint16_t product_code = 0x0A;
    std::uint8_t major_revision = 2;
    std::uint8_t minor_revision = 3;
    std::uint32_t serial_number = 0x00215E11;
};

/// Name -> typed array. Names are canonical tag text without the final
/// index, e.g. "TEST", "arr[5].sub", "Local:1:I.Ch0Data".
class TagStore {
public:
    /// Creates or replaces a tag.
    void define(const std::string& name, cip::CipValue value);
    bool contains(const std::string& name) const { return tags_.count(name) != 0; }
    const cip::CipValue* find(const std::string& name) const;
    cip::CipValue* find(const std::string& name);
    const std::map<std::string, cip::CipValue>& tags() const noexcept { return tags_; }

    Identity identity;
    /// Backplane slots holding a processor.
    std::set<std::uint8_t> processor_slots{0};
    /// Request and reply size cap, bytes.
    std::size_t limit = 500;

private:
    std::map<std::string, cip::CipValue> tags_;
};

/// Reads `<name> <TYPE>[<len>] = v1,v2,...` lines; '#' starts a comment.
/// Throws UsageError naming the offending line.
TagStore parse_tag_definitions(std::istream& in);
TagStore load_tag_file(const std::string& path);

struct FaultPlan {
    std::chrono::microseconds latency{0};
    /// Uniform extra delay in [0, jitter], drawn from a generator seeded with `seed`.
    std::chrono::microseconds jitter{0};
    std::uint64_t seed = 1;
    /// The data request after this many closes its TCP session without a reply. One-shot.
    std::optional<std::uint64_t> drop_after_requests;
    bool refuse_sessions = false;
    bool refuse_connections = false;
    /// Connections idle longer than this are closed by the target.
    std::optional<std::chrono::microseconds> close_idle_after;
    /// Processor-level service -> general status to answer with.
    std::map<std::uint8_t, std::uint8_t> status_injection;
};

/// "refuse-sessions,refuse-connections,drop-after=N,close-idle-ms=N,
///  latency-ms=N,jitter-ms=N,seed=N,status=4C:08". Empty text is no faults.
FaultPlan parse_faults(const std::string& text);

/// One processed Message Router operation, for test inspection.
struct ServiceRecord {
    std::uint8_t service = 0;
    std::string tag;
    std::uint32_t first_element = 0;
    std::uint32_t element_count = 0;
    bool connected = false;
};

class Simulator {
public:
    struct SessionState {
        std::uint32_t handle = 0;
    };

    struct Outcome {
        std::optional<Bytes> reply;
        bool close = false;
        Clock::duration delay{};
    };

    explicit Simulator(TagStore store = {}, FaultPlan faults = {});

    /// Processes one encapsulation packet for the given TCP session.
    Outcome handle_packet(SessionState& session, ByteView packet);

    /// Out-of-band access bypassing the wire. `name` may carry a final index;
    /// set_tag then overwrites elements from that index, otherwise defines the tag.
    void set_tag(const std::string& name, const cip::CipValue& value);
    /// Whole tag, or the single element when `name` is indexed. Throws UsageError if unknown.
    cip::CipValue get_tag(const std::string& name) const;

    void set_faults(FaultPlan faults);
    FaultPlan faults() const;
    void set_limit(std::size_t limit);
    std::size_t limit() const;

    /// SendRRData + SendUnitData packets answered or dropped.
    std::uint64_t round_trips() const noexcept { return round_trips_.load(); }
    std::vector<ServiceRecord> service_log() const;
    void clear_log();
    std::size_t open_connections() const;

private:
    struct Connection {
        std::uint32_t o_to_t_id = 0;
        std::uint32_t t_to_o_id = 0;
        std::uint16_t serial = 0;
        std::uint16_t vendor_id = 0;
        std::uint32_t originator_serial = 0;
        Clock::time_point last_activity;
        std::uint16_t last_sequence = 0;
    };

    Outcome register_session(SessionState& session, const encap::Packet& packet);
    Bytes module_request(ByteView cip);
    Bytes processor_request(ByteView cip, bool connected);
    cip::CipResponse dispatch(const cip::CipRequest& request, bool connected, bool nested);
    cip::CipResponse read_data(const cip::CipRequest& request, bool connected);
    cip::CipResponse write_data(const cip::CipRequest& request, bool connected);
    cip::CipResponse identity_attribute(const cip::CipRequest& request);
    cip::CipResponse forward_open(const cip::CipRequest& request);
    cip::CipResponse forward_close(const cip::CipRequest& request);
    Clock::duration round_trip_delay();

    mutable std::mutex mutex_;
    TagStore store_;
    FaultPlan faults_;
    std::mt19937_64 rng_;
    std::map<std::uint32_t, Connection> connections_;  // by O->T id
    std::uint32_t next_handle_ = 0x1001;
    std::uint32_t next_connection_id_ = 0x2001;
    std::uint64_t data_requests_ = 0;
    bool dropped_ = false;
    std::vector<ServiceRecord> log_;
    std::atomic<std::uint64_t> round_trips_{0};
};

/// TCP front end. Restartable: stop() then start() rebinds the same port.
class Server {
public:
    explicit Server(std::shared_ptr<Simulator> sim, std::string address = "127.0.0.1", std::uint16_t port = 0);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Throws ConnectionError when the port cannot be bound.
    void start();
    /// Closes the listener and every session.
    void stop();

    bool running() const noexcept { return running_.load(); }
    std::uint16_t port() const noexcept { return port_; }
    const std::string& address() const noexcept { return address_; }
    Simulator& simulator() noexcept { return *sim_; }
    std::shared_ptr<Simulator> simulator_ptr() const { return sim_; }

private:
    struct Worker {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };

    void accept_loop();
    void session_loop(net::TcpStream stream, std::shared_ptr<std::atomic<bool>> done);
    void reap();

    std::shared_ptr<Simulator> sim_;
    std::string address_;
    std::uint16_t port_;
    net::TcpListener listener_;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex workers_mutex_;
    std::list<Worker> workers_;
    std::set<int> live_fds_;
};

/// Binds and starts a server.
std::unique_ptr<Server> serve(const std::string& address, std::uint16_t port, TagStore store, FaultPlan faults = {});

}  // namespace eip::plcsim
