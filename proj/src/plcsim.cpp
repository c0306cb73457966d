#include "eip/plcsim.hpp"

#include <sys/socket.h>

#include <iostream>
#include <thread>

#include "eip/errors.hpp"
#include "eip/tags.hpp"

namespace eip::plcsim {

namespace {

namespace svc = cip::service;
namespace st = cip::status;

// Logix extended status words under general status 0xFF.
constexpr std::uint16_t kExtBeyondEnd = 0x2105;
constexpr std::uint16_t kExtTypeMismatch = 0x2107;
// Connection Manager extended status.
constexpr std::uint16_t kExtLinkAddressInvalid = 0x0312;
constexpr std::uint16_t kExtInvalidSegment = 0x0315;
constexpr std::uint8_t kAttributeNotSupported = 0x14;

struct TagAddress {
    std::string key;
    std::uint32_t first = 0;
};

// Symbol/Element chain -> store key plus starting element.
std::optional<TagAddress> resolve(const cip::Epath& path) {
    if (path.empty() || !std::holds_alternative<cip::Symbol>(path.front())) return std::nullopt;
    tags::TagRef ref;
    for (const auto& seg : path) {
        if (const auto* s = std::get_if<cip::Symbol>(&seg)) {
            if (!tags::valid_symbol(s->name)) return std::nullopt;
            ref.parts.push_back({s->name, std::nullopt});
        } else if (const auto* e = std::get_if<cip::Element>(&seg)) {
            if (ref.parts.back().index) return std::nullopt;
            ref.parts.back().index = e->index;
        } else {
            return std::nullopt;
        }
    }
    TagAddress out;
    out.first = ref.parts.back().index.value_or(0);
    out.key = tags::format_tag(tags::array_base(ref));
    return out;
}

bool is_object(const cip::Epath& path, std::uint16_t cls) {
    return path == cip::object_path(cls, 1);
}

encap::Packet reply_to(const encap::Header& request, std::uint32_t status, Bytes payload) {
    encap::Packet p;
    p.header = request;
    p.header.status = status;
    p.header.options = 0;
    p.payload = std::move(payload);
    return p;
}

Bytes encode(const encap::Packet& p) { return encap::encode_packet(p.header, p.payload); }

}  // namespace

Simulator::Simulator(TagStore store, FaultPlan faults)
    : store_(std::move(store)), faults_(std::move(faults)), rng_(faults_.seed) {}

Simulator::Outcome Simulator::handle_packet(SessionState& session, ByteView packet) {
    encap::Packet request;
    try {
        request = encap::decode_packet(packet);
    } catch (const DecodeError&) {
        return {std::nullopt, true, {}};
    }

    switch (request.header.command) {
    case encap::command::kRegisterSession: return register_session(session, request);
    case encap::command::kUnRegisterSession: return {std::nullopt, true, {}};
    case encap::command::kNop: return {};
    case encap::command::kSendRRData:
    case encap::command::kSendUnitData: break;
    default: return {encode(reply_to(request.header, encap::status::kInvalidCommand, {})), false, {}};
    }

    if (session.handle == 0 || request.header.session_handle != session.handle) {
        return {encode(reply_to(request.header, encap::status::kInvalidSession, {})), false, {}};
    }

    ++round_trips_;
    Outcome out;
    {
        std::lock_guard lock(mutex_);
        ++data_requests_;
        if (faults_.drop_after_requests && !dropped_ && data_requests_ > *faults_.drop_after_requests) {
            dropped_ = true;
            return {std::nullopt, true, {}};
        }
    }
    out.delay = round_trip_delay();

    if (request.header.command == encap::command::kSendRRData) {
        Bytes cip;
        try {
            cip = encap::parse_rr_data(request.payload);
        } catch (const DecodeError&) {
            return {std::nullopt, true, {}};
        }
        out.reply = encode(reply_to(request.header, encap::status::kSuccess, encap::rr_data_payload(module_request(cip))));
        return out;
    }

    encap::UnitData unit;
    try {
        unit = encap::parse_unit_data(request.payload);
    } catch (const DecodeError&) {
        return {std::nullopt, true, {}};
    }
    std::uint32_t t_to_o = 0;
    {
        std::lock_guard lock(mutex_);
        auto it = connections_.find(unit.connection_id);
        const auto now = Clock::now();
        if (it != connections_.end() && faults_.close_idle_after &&
            now - it->second.last_activity > *faults_.close_idle_after) {
            connections_.erase(it);
            it = connections_.end();
        }
        if (it == connections_.end()) {
            out.reply = encode(reply_to(request.header, encap::status::kIncorrectData, {}));
            return out;
        }
        it->second.last_activity = now;
        it->second.last_sequence = unit.sequence;
        t_to_o = it->second.t_to_o_id;
    }
    const auto reply_cip = processor_request(unit.cip, true);
    out.reply = encode(
        reply_to(request.header, encap::status::kSuccess, encap::unit_data_payload(t_to_o, unit.sequence, reply_cip)));
    return out;
}

Simulator::Outcome Simulator::register_session(SessionState& session, const encap::Packet& packet) {
    std::lock_guard lock(mutex_);
    wire::Writer body;
    body.u16(encap::kProtocolVersion);
    body.u16(0);
    auto reply = reply_to(packet.header, encap::status::kSuccess, body.take());
    reply.header.session_handle = 0;

    std::uint16_t version = 0;
    try {
        wire::Reader r(packet.payload);
        version = r.u16();
    } catch (const DecodeError&) {
        reply.header.status = encap::status::kInvalidLength;
        return {encode(reply), false, {}};
    }
    if (faults_.refuse_sessions) {
        reply.header.status = encap::status::kInsufficientMemory;
    } else if (version != encap::kProtocolVersion) {
        reply.header.status = encap::status::kUnsupportedProtocol;
    } else if (session.handle != 0) {
        reply.header.status = encap::status::kInvalidCommand;
        reply.header.session_handle = session.handle;
    } else {
        session.handle = next_handle_;
        next_handle_ = next_handle_ == 0xFFFFFFFF ? 1 : next_handle_ + 1;
        reply.header.session_handle = session.handle;
    }
    return {encode(reply), false, {}};
}

Clock::duration Simulator::round_trip_delay() {
    std::lock_guard lock(mutex_);
    auto delay = std::chrono::duration_cast<Clock::duration>(faults_.latency);
    if (faults_.jitter.count() > 0) {
        std::uniform_int_distribution<std::int64_t> dist(0, faults_.jitter.count());
        delay += std::chrono::duration_cast<Clock::duration>(std::chrono::microseconds(dist(rng_)));
    }
    return delay;
}

// Messages addressed to the Ethernet module itself.
Bytes Simulator::module_request(ByteView bytes) {
    cip::CipRequest request;
    try {
        request = cip::decode_request(bytes);
    } catch (const DecodeError&) {
        const std::uint8_t service = bytes.empty() ? 0 : bytes[0] & 0x7F;
        return cip::encode_response(cip::error_response(service, st::kPathSegmentError));
    }

    if (request.service == svc::kUnconnectedSend && is_object(request.path, cip::object::kConnectionManager)) {
        cip::UnconnectedSend unwrapped;
        try {
            unwrapped = cip::unwrap_unconnected_send(request);
        } catch (const DecodeError&) {
            return cip::encode_response(cip::error_response(request.service, st::kNotEnoughData));
        }
        bool routed = false;
        if (unwrapped.route.size() == 1) {
            if (const auto* pl = std::get_if<cip::PortLink>(&unwrapped.route[0])) {
                std::lock_guard lock(mutex_);
                routed = pl->port == cip::kBackplanePort && store_.processor_slots.count(pl->link) != 0;
            }
        }
        if (!routed) {
            return cip::encode_response(
                cip::error_response(request.service, st::kConnectionFailure, {kExtLinkAddressInvalid}));
        }
        // Connection Manager is transparent: the processor's reply goes back as is.
        return processor_request(unwrapped.embedded, false);
    }

    cip::CipResponse response;
    if (request.service == svc::kForwardOpen && is_object(request.path, cip::object::kConnectionManager)) {
        response = forward_open(request);
    } else if (request.service == svc::kForwardClose && is_object(request.path, cip::object::kConnectionManager)) {
        response = forward_close(request);
    } else if (request.service == svc::kGetAttributeSingle) {
        std::lock_guard lock(mutex_);
        response = identity_attribute(request);
    } else if (resolve(request.path)) {
        response = cip::error_response(request.service, st::kPathDestinationUnknown);
    } else {
        response = cip::error_response(request.service, st::kServiceNotSupported);
    }
    return cip::encode_response(response);
}

// Messages delivered to the processor's Message Router.
Bytes Simulator::processor_request(ByteView bytes, bool connected) {
    std::lock_guard lock(mutex_);
    const std::uint8_t raw_service = bytes.empty() ? 0 : bytes[0] & 0x7F;
    if (bytes.size() > store_.limit) {
        return cip::encode_response(cip::error_response(raw_service, st::kTooMuchData));
    }
    cip::CipRequest request;
    try {
        request = cip::decode_request(bytes);
    } catch (const DecodeError&) {
        return cip::encode_response(cip::error_response(raw_service, st::kPathSegmentError));
    }
    auto response = dispatch(request, connected, false);
    auto encoded = cip::encode_response(response);
    if (encoded.size() > store_.limit) {
        encoded = cip::encode_response(cip::error_response(request.service, st::kReplyDataTooLarge));
    }
    return encoded;
}

cip::CipResponse Simulator::dispatch(const cip::CipRequest& request, bool connected, bool nested) {
    if (auto it = faults_.status_injection.find(request.service); it != faults_.status_injection.end()) {
        return cip::error_response(request.service, it->second);
    }
    switch (request.service) {
    case svc::kReadData: return read_data(request, connected);
    case svc::kWriteData: return write_data(request, connected);
    case svc::kGetAttributeSingle: return identity_attribute(request);
    case svc::kMultipleServicePacket: {
        if (nested) return cip::error_response(request.service, st::kServiceNotSupported);
        if (!is_object(request.path, cip::object::kMessageRouter)) {
            return cip::error_response(request.service, st::kPathDestinationUnknown);
        }
        std::vector<Bytes> items;
        try {
            items = cip::split_multi_request(request);
        } catch (const DecodeError&) {
            return cip::error_response(request.service, st::kNotEnoughData);
        }
        std::vector<cip::CipResponse> replies;
        replies.reserve(items.size());
        for (const auto& item : items) {
            try {
                replies.push_back(dispatch(cip::decode_request(item), connected, true));
            } catch (const DecodeError&) {
                replies.push_back(cip::error_response(item.empty() ? 0 : item[0] & 0x7F, st::kPathSegmentError));
            }
        }
        return cip::build_multi_response(replies);
    }
    default: return cip::error_response(request.service, st::kServiceNotSupported);
    }
}

cip::CipResponse Simulator::read_data(const cip::CipRequest& request, bool connected) {
    const auto address = resolve(request.path);
    if (!address) return cip::error_response(request.service, st::kPathSegmentError);
    cip::ReadRequestFields fields{};
    try {
        fields = cip::parse_read_request_data(request.data);
    } catch (const DecodeError&) {
        return cip::error_response(request.service, st::kNotEnoughData);
    }
    const auto* value = store_.find(address->key);
    if (!value) return cip::error_response(request.service, st::kPathDestinationUnknown);
    const std::uint64_t end = std::uint64_t{address->first} + fields.element_count;
    if (fields.element_count == 0 || end > value->size()) {
        return cip::error_response(request.service, st::kGeneralError, {kExtBeyondEnd});
    }
    log_.push_back({request.service, address->key, address->first, fields.element_count, connected});
    const auto slice = value->slice(address->first, fields.element_count);
    wire::Writer w;
    w.u16(cip::type_code(slice.type()));
    slice.encode_elements(w);
    cip::CipResponse resp;
    resp.service = request.service | svc::kReplyBit;
    resp.data = w.take();
    return resp;
}

cip::CipResponse Simulator::write_data(const cip::CipRequest& request, bool connected) {
    const auto address = resolve(request.path);
    if (!address) return cip::error_response(request.service, st::kPathSegmentError);
    cip::CipValue incoming;
    try {
        incoming = cip::parse_write_request_data(request.data);
    } catch (const DecodeError&) {
        return cip::error_response(request.service, st::kNotEnoughData);
    }
    auto* value = store_.find(address->key);
    if (!value) return cip::error_response(request.service, st::kPathDestinationUnknown);
    if (incoming.type() != value->type()) {
        return cip::error_response(request.service, st::kGeneralError, {kExtTypeMismatch});
    }
    if (std::uint64_t{address->first} + incoming.size() > value->size()) {
        return cip::error_response(request.service, st::kGeneralError, {kExtBeyondEnd});
    }
    for (std::size_t i = 0; i < incoming.size(); ++i) value->set_raw(address->first + i, incoming.raw(i));
    log_.push_back({request.service, address->key, address->first, static_cast<std::uint32_t>(incoming.size()), connected});
    cip::CipResponse resp;
    resp.service = request.service | svc::kReplyBit;
    return resp;
}

cip::CipResponse Simulator::identity_attribute(const cip::CipRequest& request) {
    if (request.path.size() != 3 || !is_object({request.path[0], request.path[1]}, cip::object::kIdentity)) {
        return cip::error_response(request.service, st::kPathDestinationUnknown);
    }
    const auto* attr = std::get_if<cip::AttributeId>(&request.path[2]);
    if (!attr) return cip::error_response(request.service, st::kPathSegmentError);
    log_.push_back({request.service, "identity", attr->id, 1, false});
    const auto& id = store_.identity;
    wire::Writer w;
    switch (attr->id) {
    case 1: w.u16(id.vendor_id); break;
    case 2: w.u16(id.device_type); break;
    case 3: w.u16(id.product_code); break;
    case 4:
        w.u8(id.major_revision);
        w.u8(id.minor_revision);
        break;
    case 6: w.u32(id.serial_number); break;
    case 7: w.bytes(cip::encode_short_string(id.product_name)); break;
    default: return cip::error_response(request.service, kAttributeNotSupported);
    }
    cip::CipResponse resp;
    resp.service = request.service | svc::kReplyBit;
    resp.data = w.take();
    return resp;
}

cip::CipResponse Simulator::forward_open(const cip::CipRequest& request) {
    cip::ForwardOpenRequest fo;
    try {
        fo = cip::parse_forward_open_request(request);
    } catch (const DecodeError&) {
        return cip::error_response(request.service, st::kNotEnoughData);
    }
    std::lock_guard lock(mutex_);
    if (faults_.refuse_connections) {
        return cip::error_response(request.service, st::kResourceUnavailable);
    }
    const auto& p = fo.connection_path;
    const auto* pl = p.empty() ? nullptr : std::get_if<cip::PortLink>(&p[0]);
    const bool valid = p.size() == 3 && pl && pl->port == cip::kBackplanePort &&
                       store_.processor_slots.count(pl->link) &&
                       cip::Epath(p.begin() + 1, p.end()) == cip::object_path(cip::object::kMessageRouter, 1);
    if (!valid) return cip::error_response(request.service, st::kConnectionFailure, {kExtInvalidSegment});

    Connection c;
    c.o_to_t_id = next_connection_id_++;
    c.t_to_o_id = fo.t_to_o_id != 0 ? fo.t_to_o_id : next_connection_id_++;
    c.serial = fo.connection_serial;
    c.vendor_id = fo.vendor_id;
    c.originator_serial = fo.originator_serial;
    c.last_activity = Clock::now();
    connections_[c.o_to_t_id] = c;

    cip::ConnectionGrant grant{c.o_to_t_id, c.t_to_o_id, c.serial, fo.o_to_t_rpi};
    return cip::build_forward_open_reply(fo, grant);
}

cip::CipResponse Simulator::forward_close(const cip::CipRequest& request) {
    cip::ForwardCloseRequest fc;
    try {
        fc = cip::parse_forward_close_request(request);
    } catch (const DecodeError&) {
        return cip::error_response(request.service, st::kNotEnoughData);
    }
    std::lock_guard lock(mutex_);
    for (auto it = connections_.begin(); it != connections_.end(); ++it) {
        const auto& c = it->second;
        if (c.serial == fc.connection_serial && c.vendor_id == fc.vendor_id &&
            c.originator_serial == fc.originator_serial) {
            connections_.erase(it);
            wire::Writer w;
            w.u16(fc.connection_serial);
            w.u16(fc.vendor_id);
            w.u32(fc.originator_serial);
            w.u8(0);
            w.u8(0);
            cip::CipResponse resp;
            resp.service = request.service | svc::kReplyBit;
            resp.data = w.take();
            return resp;
        }
    }
    return cip::error_response(request.service, st::kConnectionFailure, {0x0107});
}

void Simulator::set_tag(const std::string& name, const cip::CipValue& value) {
    const auto ref = tags::parse_tag(name);
    std::lock_guard lock(mutex_);
    if (!ref.parts.back().index) {
        store_.define(tags::format_tag(ref), value);
        return;
    }
    const auto key = tags::format_tag(tags::array_base(ref));
    auto* stored = store_.find(key);
    if (!stored) throw UsageError("unknown tag " + key);
    if (stored->type() != value.type()) throw UsageError("type mismatch writing " + name);
    const auto first = *ref.parts.back().index;
    if (first + value.size() > stored->size()) throw UsageError("write past end of " + key);
    for (std::size_t i = 0; i < value.size(); ++i) stored->set_raw(first + i, value.raw(i));
}

cip::CipValue Simulator::get_tag(const std::string& name) const {
    const auto ref = tags::parse_tag(name);
    std::lock_guard lock(mutex_);
    const auto key = tags::format_tag(tags::array_base(ref));
    const auto* stored = store_.find(key);
    if (!stored) throw UsageError("unknown tag " + key);
    if (!ref.parts.back().index) return *stored;
    const auto i = *ref.parts.back().index;
    if (i >= stored->size()) throw UsageError("index past end of " + key);
    return stored->slice(i, 1);
}

void Simulator::set_faults(FaultPlan faults) {
    std::lock_guard lock(mutex_);
    faults_ = std::move(faults);
    rng_.seed(faults_.seed);
    dropped_ = false;
    data_requests_ = 0;
}

FaultPlan Simulator::faults() const {
    std::lock_guard lock(mutex_);
    return faults_;
}

void Simulator::set_limit(std::size_t limit) {
    std::lock_guard lock(mutex_);
    store_.limit = limit;
}

std::size_t Simulator::limit() const {
    std::lock_guard lock(mutex_);
    return store_.limit;
}

std::vector<ServiceRecord> Simulator::service_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

void Simulator::clear_log() {
    std::lock_guard lock(mutex_);
    log_.clear();
}

std::size_t Simulator::open_connections() const {
    std::lock_guard lock(mutex_);
    return connections_.size();
}

// --- Server

Server::Server(std::shared_ptr<Simulator> sim, std::string address, std::uint16_t port)
    : sim_(std::move(sim)), address_(std::move(address)), port_(port) {}

Server::~Server() { stop(); }

void Server::start() {
    if (running_) return;
    listener_ = net::TcpListener::bind(address_, port_);
    port_ = listener_.port();
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
    if (!running_.exchange(false)) return;
    if (acceptor_.joinable()) acceptor_.join();
    listener_.close();
    std::list<Worker> workers;
    {
        std::lock_guard lock(workers_mutex_);
        for (int fd : live_fds_) ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& w : workers) w.thread.join();
}

void Server::reap() {
    std::lock_guard lock(workers_mutex_);
    for (auto it = workers_.begin(); it != workers_.end();) {
        if (it->done->load()) {
            it->thread.join();
            it = workers_.erase(it);
        } else {
            ++it;
        }
    }
}

void Server::accept_loop() {
    while (running_) {
        auto stream = listener_.accept(std::chrono::milliseconds(20));
        reap();
        if (!stream) continue;
        std::lock_guard lock(workers_mutex_);
        if (!running_) break;
        live_fds_.insert(stream->fd());
        auto done = std::make_shared<std::atomic<bool>>(false);
        workers_.push_back({std::thread([this, s = std::move(*stream), done]() mutable {
                                session_loop(std::move(s), done);
                            }),
                            done});
    }
}

void Server::session_loop(net::TcpStream stream, std::shared_ptr<std::atomic<bool>> done) {
    Simulator::SessionState session;
    try {
        while (running_) {
            if (!stream.readable(std::chrono::milliseconds(200))) continue;
            const auto frame = stream.recv_frame(Clock::now() + std::chrono::seconds(5));
            auto outcome = sim_->handle_packet(session, frame);
            if (outcome.delay.count() > 0) std::this_thread::sleep_for(outcome.delay);
            if (outcome.reply) stream.send_all(*outcome.reply, Clock::now() + std::chrono::seconds(5));
            if (outcome.close) break;
        }
    } catch (const Error&) {
        // peer went away
    }
    {
        std::lock_guard lock(workers_mutex_);
        live_fds_.erase(stream.fd());
        stream.close();
    }
    done->store(true);
}

std::unique_ptr<Server> serve(const std::string& address, std::uint16_t port, TagStore store, FaultPlan faults) {
    auto server = std::make_unique<Server>(std::make_shared<Simulator>(std::move(store), std::move(faults)), address, port);
    server->start();
    return server;
}

}  // namespace eip::plcsim
