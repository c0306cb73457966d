#include "eip/encap.hpp"

#include <limits>
#include <string>

#include "eip/errors.hpp"

namespace eip::encap {

namespace {

std::string hex16(std::uint32_t v) {
    static const char* digits = "0123456789ABCDEF";
    std::string s = "0x";
    for (int shift = 12; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
    return s;
}

// Interface handle and timeout precede the CPF in both carriers.
void write_carrier_prefix(wire::Writer& w) {
    w.u32(0);  // interface handle: CIP
    w.u16(0);  // timeout; transport-level timeouts apply
}

std::vector<CpfItem> read_carrier(ByteView payload) {
    wire::Reader r(payload);
    r.u32();
    r.u16();
    auto items = decode_cpf(r);
    if (!r.empty()) throw DecodeError("trailing bytes after CPF items");
    if (items.size() != 2) throw DecodeError("malformed carrier: expected 2 CPF items, got " + std::to_string(items.size()));
    return items;
}

}  // namespace

Bytes encode_packet(Header header, ByteView payload) {
    if (payload.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw UsageError("encapsulation payload too large: " + std::to_string(payload.size()) + " bytes");
    }
    header.payload_length = static_cast<std::uint16_t>(payload.size());
    wire::Writer w;
    w.u16(header.command);
    w.u16(header.payload_length);
    w.u32(header.session_handle);
    w.u32(header.status);
    w.bytes(header.sender_context);
    w.u32(header.options);
    w.bytes(payload);
    return w.take();
}

Packet decode_packet(ByteView bytes) {
    if (bytes.size() < kHeaderSize) {
        throw DecodeError("truncated encapsulation header: " + std::to_string(bytes.size()) + " bytes");
    }
    wire::Reader r(bytes);
    Packet p;
    p.header.command = r.u16();
    p.header.payload_length = r.u16();
    p.header.session_handle = r.u32();
    p.header.status = r.u32();
    auto ctx = r.bytes(8);
    std::copy(ctx.begin(), ctx.end(), p.header.sender_context.begin());
    p.header.options = r.u32();
    if (r.remaining() < p.header.payload_length) {
        throw DecodeError("encapsulation payload shorter than declared length " +
                          std::to_string(p.header.payload_length));
    }
    if (r.remaining() > p.header.payload_length) {
        throw DecodeError(std::to_string(r.remaining() - p.header.payload_length) +
                          " trailing bytes after encapsulation payload");
    }
    auto payload = r.rest();
    p.payload.assign(payload.begin(), payload.end());
    return p;
}

std::optional<std::size_t> frame_size(ByteView buffered) {
    if (buffered.size() < kHeaderSize) return std::nullopt;
    wire::Reader r(buffered.subspan(2, 2));
    return kHeaderSize + r.u16();
}

void encode_cpf(wire::Writer& out, const std::vector<CpfItem>& items) {
    out.u16(static_cast<std::uint16_t>(items.size()));
    for (const auto& item : items) {
        out.u16(item.type_id);
        out.u16(static_cast<std::uint16_t>(item.data.size()));
        out.bytes(item.data);
    }
}

std::vector<CpfItem> decode_cpf(wire::Reader& in) {
    const auto count = in.u16();
    std::vector<CpfItem> items;
    items.reserve(std::min<std::size_t>(count, 8));
    for (std::uint16_t i = 0; i < count; ++i) {
        CpfItem item;
        item.type_id = in.u16();
        const auto length = in.u16();
        auto data = in.bytes(length);
        item.data.assign(data.begin(), data.end());
        items.push_back(std::move(item));
    }
    return items;
}

Bytes build_register_session(const SenderContext& context) {
    wire::Writer w;
    w.u16(kProtocolVersion);
    w.u16(0);  // option flags
    Header h;
    h.command = command::kRegisterSession;
    h.sender_context = context;
    return encode_packet(h, w.view());
}

std::uint32_t parse_register_reply(const Packet& reply) {
    if (reply.header.command != command::kRegisterSession) {
        throw DecodeError("expected RegisterSession reply, got command " + hex16(reply.header.command));
    }
    if (reply.header.status != status::kSuccess) {
        throw SessionError(reply.header.status, "RegisterSession refused, status " + hex16(reply.header.status));
    }
    wire::Reader r(reply.payload);
    const auto version = r.u16();
    r.u16();
    if (version != kProtocolVersion) {
        throw DecodeError("RegisterSession protocol version mismatch: " + std::to_string(version));
    }
    if (reply.header.session_handle == 0) {
        throw SessionError(reply.header.status, "RegisterSession reply carries session handle 0");
    }
    return reply.header.session_handle;
}

Bytes build_unregister_session(std::uint32_t session_handle) {
    Header h;
    h.command = command::kUnRegisterSession;
    h.session_handle = session_handle;
    return encode_packet(h, {});
}

Bytes rr_data_payload(ByteView cip) {
    wire::Writer w;
    write_carrier_prefix(w);
    encode_cpf(w, {CpfItem{item::kNullAddress, {}}, CpfItem{item::kUnconnectedData, Bytes(cip.begin(), cip.end())}});
    return w.take();
}

Bytes unit_data_payload(std::uint32_t connection_id, std::uint16_t sequence, ByteView cip) {
    wire::Writer address;
    address.u32(connection_id);
    wire::Writer data;
    data.u16(sequence);
    data.bytes(cip);

    wire::Writer w;
    write_carrier_prefix(w);
    encode_cpf(w, {CpfItem{item::kConnectedAddress, address.take()}, CpfItem{item::kConnectedData, data.take()}});
    return w.take();
}

Bytes build_rr_data(std::uint32_t session_handle, ByteView cip, const SenderContext& context) {
    Header h;
    h.command = command::kSendRRData;
    h.session_handle = session_handle;
    h.sender_context = context;
    return encode_packet(h, rr_data_payload(cip));
}

Bytes parse_rr_data(ByteView payload) {
    auto items = read_carrier(payload);
    if (items[0].type_id != item::kNullAddress || !items[0].data.empty()) {
        throw DecodeError("unconnected carrier: first item is not a null address");
    }
    if (items[1].type_id != item::kUnconnectedData) {
        throw DecodeError("unconnected carrier: second item is " + hex16(items[1].type_id));
    }
    return std::move(items[1].data);
}

Bytes build_unit_data(std::uint32_t session_handle, std::uint32_t connection_id, std::uint16_t sequence,
                      ByteView cip, const SenderContext& context) {
    Header h;
    h.command = command::kSendUnitData;
    h.session_handle = session_handle;
    h.sender_context = context;
    return encode_packet(h, unit_data_payload(connection_id, sequence, cip));
}

UnitData parse_unit_data(ByteView payload) {
    auto items = read_carrier(payload);
    if (items[0].type_id != item::kConnectedAddress || items[0].data.size() != 4) {
        throw DecodeError("connected carrier: first item is not a connected address");
    }
    if (items[1].type_id != item::kConnectedData || items[1].data.size() < 2) {
        throw DecodeError("connected carrier: second item is not connected data");
    }
    UnitData out;
    wire::Reader addr(items[0].data);
    out.connection_id = addr.u32();
    wire::Reader data(items[1].data);
    out.sequence = data.u16();
    auto cip = data.rest();
    out.cip.assign(cip.begin(), cip.end());
    return out;
}

}  // namespace eip::encap
