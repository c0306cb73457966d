#include "eip/client.hpp"

#include <charconv>
#include <iostream>

namespace eip::client {

void PlcEndpoint::validate() const {
    if (host.empty()) throw UsageError("empty PLC host");
    if (buffer_limit < 64 || buffer_limit > 511) {
        throw UsageError("buffer limit " + std::to_string(buffer_limit) + " outside [64, 511]");
    }
    if (slot > 16) throw UsageError("slot " + std::to_string(slot) + " outside [0, 16]");
    if (request_timeout.count() <= 0) throw UsageError("request timeout must be positive");
    if (reconnect_period.count() <= 0) throw UsageError("reconnect period must be positive");
}

PlcEndpoint parse_host_port(const std::string& text, std::uint16_t default_port) {
    PlcEndpoint ep;
    ep.port = default_port;
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) {
        ep.host = text;
    } else {
        ep.host = text.substr(0, colon);
        const auto digits = std::string_view(text).substr(colon + 1);
        unsigned port = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || port == 0 || port > 0xFFFF) {
            throw UsageError("bad port in '" + text + "'");
        }
        ep.port = static_cast<std::uint16_t>(port);
    }
    if (ep.host.empty()) throw UsageError("empty host in '" + text + "'");
    return ep;
}

std::string_view to_string(Phase phase) noexcept {
    switch (phase) {
    case Phase::Disconnected: return "Disconnected";
    case Phase::Registered: return "Registered";
    case Phase::Connected: return "Connected";
    }
    return "?";
}

Session::Session(PlcEndpoint endpoint) : endpoint_(std::move(endpoint)) { endpoint_.validate(); }

Session::~Session() {
    if (!usable()) return;
    try {
        close_connection();
        stream_.send_all(encap::build_unregister_session(session_handle_), Clock::now() + std::chrono::milliseconds(100));
    } catch (const Error&) {
    }
    disconnect();
}

void Session::connect() {
    if (phase_ != Phase::Disconnected) throw UsageError("connect on a session that is not Disconnected");
    try {
        stream_ = net::TcpStream::connect(endpoint_.host, endpoint_.port, endpoint_.request_timeout);
        const auto reply = exchange(encap::build_register_session(next_context()), encap::command::kRegisterSession);
        session_handle_ = encap::parse_register_reply(reply);
    } catch (...) {
        fail();
        throw;
    }
    phase_ = Phase::Registered;
    consecutive_errors_ = 0;
    if (endpoint_.connected_messaging) {
        try {
            open_connection();
        } catch (...) {
            fail();
            throw;
        }
    }
}

void Session::disconnect() noexcept {
    stream_.close();
    phase_ = Phase::Disconnected;
    session_handle_ = 0;
    grant_.reset();
}

void Session::fail() noexcept {
    ++consecutive_errors_;
    disconnect();
}

encap::SenderContext Session::next_context() {
    ++context_counter_;
    encap::SenderContext ctx{};
    for (std::size_t i = 0; i < ctx.size(); ++i) ctx[i] = static_cast<std::uint8_t>(context_counter_ >> (8 * i));
    pending_context_ = ctx;
    return ctx;
}

encap::Packet Session::exchange(const Bytes& packet, std::uint16_t command) {
    const auto deadline = Clock::now() + endpoint_.request_timeout;
    stream_.send_all(packet, deadline);
    auto reply = encap::decode_packet(stream_.recv_frame(deadline));
    if (reply.header.command != command) {
        throw DecodeError("reply command " + std::to_string(reply.header.command) + " does not match request " +
                          std::to_string(command));
    }
    if (reply.header.status != encap::status::kSuccess && command != encap::command::kRegisterSession) {
        throw SessionError(reply.header.status, "encapsulation status " + std::to_string(reply.header.status));
    }
    if (command != encap::command::kRegisterSession && reply.header.session_handle != session_handle_) {
        throw DecodeError("reply carries a foreign session handle");
    }
    if (reply.header.sender_context != pending_context_) {
        ++context_mismatches_;
        std::clog << "eip: sender context mismatch from " << endpoint_.host << '\n';
    }
    return reply;
}

cip::CipResponse Session::round_trip_unconnected(const cip::CipRequest& inner) {
    if (!usable()) throw ConnectionError("session to " + endpoint_.host + " is disconnected");
    const auto wrapped = cip::encode_request(cip::wrap_unconnected_send(inner, endpoint_.slot));
    if (wrapped.size() > endpoint_.buffer_limit) {
        throw LimitError("request of " + std::to_string(wrapped.size()) + " bytes exceeds buffer limit " +
                         std::to_string(endpoint_.buffer_limit));
    }
    cip::CipResponse response;
    const auto start = Clock::now();
    try {
        const auto reply =
            exchange(encap::build_rr_data(session_handle_, wrapped, next_context()), encap::command::kSendRRData);
        response = cip::decode_response(encap::parse_rr_data(reply.payload));
    } catch (...) {
        fail();
        throw;
    }
    last_transfer_ = Clock::now() - start;
    ++round_trips_;
    consecutive_errors_ = 0;
    if (response.service == (cip::service::kUnconnectedSend | cip::service::kReplyBit)) {
        // Routing failed in the Connection Manager; the embedded request never arrived.
        cip::expect_success(response, cip::service::kUnconnectedSend);
    }
    return response;
}

cip::CipResponse Session::round_trip_local(const cip::CipRequest& request) {
    if (!usable()) throw ConnectionError("session to " + endpoint_.host + " is disconnected");
    const auto encoded = cip::encode_request(request);
    if (encoded.size() > endpoint_.buffer_limit) {
        throw LimitError("request of " + std::to_string(encoded.size()) + " bytes exceeds buffer limit " +
                         std::to_string(endpoint_.buffer_limit));
    }
    cip::CipResponse response;
    const auto start = Clock::now();
    try {
        const auto reply =
            exchange(encap::build_rr_data(session_handle_, encoded, next_context()), encap::command::kSendRRData);
        response = cip::decode_response(encap::parse_rr_data(reply.payload));
    } catch (...) {
        fail();
        throw;
    }
    last_transfer_ = Clock::now() - start;
    ++round_trips_;
    consecutive_errors_ = 0;
    return response;
}

void Session::open_connection() {
    if (phase_ != Phase::Registered) throw UsageError("open_connection requires a Registered session");
    open_params_ = cip::ForwardOpenParams{};
    open_params_.slot = endpoint_.slot;
    open_params_.connection_serial = ++connection_serial_;
    open_params_.proposed_t_to_o_id = 0x10000u + connection_serial_;
    open_params_.connection_size = static_cast<std::uint16_t>(endpoint_.buffer_limit);

    grant_ = cip::parse_forward_open_reply(round_trip_local(cip::build_forward_open(open_params_)));
    phase_ = Phase::Connected;
    next_sequence_ = 1;
}

void Session::close_connection() {
    if (phase_ != Phase::Connected) return;
    phase_ = Phase::Registered;
    grant_.reset();
    try {
        round_trip_local(cip::build_forward_close(open_params_));
    } catch (const Error&) {
    }
}

cip::CipResponse Session::round_trip_connected(const cip::CipRequest& inner) {
    if (phase_ != Phase::Connected || !grant_) throw ConnectionError("no open CIP connection to " + endpoint_.host);
    const auto request = cip::encode_request(inner);
    if (request.size() > endpoint_.buffer_limit) {
        throw LimitError("request of " + std::to_string(request.size()) + " bytes exceeds buffer limit " +
                         std::to_string(endpoint_.buffer_limit));
    }
    const auto sequence = next_sequence_++;
    cip::CipResponse response;
    const auto start = Clock::now();
    try {
        const auto reply = exchange(
            encap::build_unit_data(session_handle_, grant_->o_to_t_id, sequence, request, next_context()),
            encap::command::kSendUnitData);
        auto unit = encap::parse_unit_data(reply.payload);
        if (unit.connection_id != grant_->t_to_o_id) throw DecodeError("connected reply on a foreign connection id");
        if (unit.sequence != sequence) throw DecodeError("connected reply sequence does not match request");
        response = cip::decode_response(unit.cip);
    } catch (...) {
        fail();
        throw;
    }
    last_transfer_ = Clock::now() - start;
    ++round_trips_;
    consecutive_errors_ = 0;
    return response;
}

cip::CipResponse Session::round_trip(const cip::CipRequest& inner) {
    return phase_ == Phase::Connected ? round_trip_connected(inner) : round_trip_unconnected(inner);
}

bool Session::ensure_connected(Clock::time_point now) {
    if (usable()) return true;
    if (last_attempt_ && now - *last_attempt_ < endpoint_.reconnect_period) return false;
    last_attempt_ = now;
    ++reconnect_attempts_;
    try {
        connect();
    } catch (const Error&) {
        return false;
    }
    return true;
}

std::size_t Session::request_budget() const noexcept {
    if (endpoint_.connected_messaging) return endpoint_.buffer_limit;
    return endpoint_.buffer_limit - cip::unconnected_send_overhead(1);
}

std::string read_product_name(Session& session) {
    return cip::parse_short_string(session.round_trip_local(
        cip::build_get_attribute_single(cip::object::kIdentity, 1, cip::object::kProductNameAttribute)));
}

cip::CipValue read_tag(Session& session, const cip::Epath& path, std::uint16_t count) {
    return cip::parse_read_response(session.round_trip(cip::build_read_request(path, count)));
}

void write_tag(Session& session, const cip::Epath& path, const cip::CipValue& value) {
    cip::expect_success(session.round_trip(cip::build_write_request(path, value)), cip::service::kWriteData);
}

}  // namespace eip::client
