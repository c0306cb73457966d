#pragma once

// One TCP connection plus encapsulation session to one PLC. Requests are
// strictly one at a time; a session is owned by a single worker.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "eip/cip.hpp"
#include "eip/encap.hpp"
#include "eip/errors.hpp"
#include "eip/net.hpp"

namespace eip::client {

using Clock = net::Clock;

/// Request rejected before transmission because it exceeds the buffer limit.
class LimitError : public UsageError {
public:
    using UsageError::UsageError;
};

struct PlcEndpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = encap::kDefaultPort;
    std::uint8_t slot = 0;
    std::size_t buffer_limit = 500;
    std::chrono::milliseconds request_timeout{3000};
    std::chrono::milliseconds reconnect_period{5000};
    /// Open a Forward_Open connection after registering and use SendUnitData.
    bool connected_messaging = false;

    /// Throws UsageError: buffer_limit in [64, 511], slot <= 16.
    void validate() const;
};

/// "host" or "host:port".
PlcEndpoint parse_host_port(const std::string& text, std::uint16_t default_port = encap::kDefaultPort);

enum class Phase { Disconnected, Registered, Connected };

std::string_view to_string(Phase phase) noexcept;

class Session {
public:
    explicit Session(PlcEndpoint endpoint);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// TCP connect and RegisterSession; Disconnected -> Registered.
    /// On failure the session stays Disconnected and the error propagates.
    void connect();
    /// Drops the TCP stream; any phase -> Disconnected.
    void disconnect() noexcept;

    /// SendRRData carrying wrap_unconnected_send(inner). Returns the inner reply;
    /// CIP status is left for the caller to inspect. Transport, encapsulation
    /// and framing errors disconnect before rethrowing.
    cip::CipResponse round_trip_unconnected(const cip::CipRequest& inner);

    /// Bare SendRRData to the Ethernet module itself (Identity, Connection
    /// Manager services), without Unconnected Send routing.
    cip::CipResponse round_trip_local(const cip::CipRequest& request);

    /// Forward_Open to the processor's Message Router; Registered -> Connected.
    void open_connection();
    /// Forward_Close, back to Registered. Best effort.
    void close_connection();
    /// SendUnitData with the next sequence number and the bare inner request.
    cip::CipResponse round_trip_connected(const cip::CipRequest& inner);

    /// Connected transport when Connected, unconnected otherwise.
    cip::CipResponse round_trip(const cip::CipRequest& inner);

    /// Reconnect policy: when Disconnected, attempts connect at most once per
    /// reconnect_period. Returns true when the session is usable afterwards.
    bool ensure_connected(Clock::time_point now = Clock::now());

    /// Largest encoded inner message the configured transport can carry.
    std::size_t request_budget() const noexcept;

    const PlcEndpoint& endpoint() const noexcept { return endpoint_; }
    Phase phase() const noexcept { return phase_; }
    bool usable() const noexcept { return phase_ != Phase::Disconnected; }
    std::uint32_t session_handle() const noexcept { return session_handle_; }
    const std::optional<cip::ConnectionGrant>& grant() const noexcept { return grant_; }
    std::uint16_t next_sequence() const noexcept { return next_sequence_; }
    Clock::duration last_transfer_time() const noexcept { return last_transfer_; }
    std::uint64_t round_trips() const noexcept { return round_trips_; }
    std::uint64_t consecutive_errors() const noexcept { return consecutive_errors_; }
    std::uint64_t reconnect_attempts() const noexcept { return reconnect_attempts_; }
    std::uint64_t context_mismatches() const noexcept { return context_mismatches_; }

private:
    encap::Packet exchange(const Bytes& packet, std::uint16_t command);
    encap::SenderContext next_context();
    void fail() noexcept;

    PlcEndpoint endpoint_;
    net::TcpStream stream_;
    Phase phase_ = Phase::Disconnected;
    std::uint32_t session_handle_ = 0;
    std::optional<cip::ConnectionGrant> grant_;
    cip::ForwardOpenParams open_params_;
    std::uint16_t next_sequence_ = 1;
    std::uint64_t context_counter_ = 0;
    encap::SenderContext pending_context_{};

    Clock::duration last_transfer_{};
    std::uint64_t round_trips_ = 0;
    std::uint64_t consecutive_errors_ = 0;
    std::uint64_t reconnect_attempts_ = 0;
    std::uint64_t context_mismatches_ = 0;
    std::optional<Clock::time_point> last_attempt_;
    std::uint16_t connection_serial_ = 0;
};

// One-shot helpers over an established session. CIP status errors surface
// as CipError.

/// Identity object product name, read from the module itself.
std::string read_product_name(Session& session);
cip::CipValue read_tag(Session& session, const cip::Epath& path, std::uint16_t count = 1);
void write_tag(Session& session, const cip::Epath& path, const cip::CipValue& value);

}  // namespace eip::client
