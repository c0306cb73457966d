#include "eip/cip.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "eip/errors.hpp"

namespace eip {

CipError::CipError(std::uint8_t general, std::vector<std::uint16_t> extended, const std::string& what)
    : Error(what), general_(general), extended_(std::move(extended)) {}

namespace cip {

namespace {

std::string hex(unsigned v, int digits = 2) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%0*X", digits, v);
    return buf;
}

// Logical segment with 8- or 16-bit value; 16-bit form carries a pad byte.
void put_logical(wire::Writer& w, std::uint8_t short_form, std::uint32_t value) {
    if (value <= 0xFF) {
        w.u8(short_form);
        w.u8(static_cast<std::uint8_t>(value));
    } else if (value <= 0xFFFF) {
        w.u8(short_form + 1);
        w.u8(0);
        w.u16(static_cast<std::uint16_t>(value));
    } else {
        w.u8(short_form + 2);
        w.u8(0);
        w.u32(value);
    }
}

struct SegmentEncoder {
    wire::Writer& w;

    void operator()(const ClassId& s) { put_logical(w, 0x20, s.id); }
    void operator()(const InstanceId& s) { put_logical(w, 0x24, s.id); }
    void operator()(const AttributeId& s) { put_logical(w, 0x30, s.id); }
    void operator()(const Element& s) { put_logical(w, 0x28, s.index); }
    void operator()(const Symbol& s) {
        if (s.name.empty()) throw UsageError("empty symbol segment");
        if (s.name.size() > kMaxSymbolLength) throw UsageError("symbol longer than 40 characters: " + s.name);
        w.u8(0x91);
        w.u8(static_cast<std::uint8_t>(s.name.size()));
        w.text(s.name);
        w.pad_to_even();
    }
    void operator()(const PortLink& s) {
        if (s.port == 0 || s.port > 14) throw UsageError("port segment number out of range: " + std::to_string(s.port));
        w.u8(s.port);
        w.u8(s.link);
    }
};

std::uint32_t get_logical(wire::Reader& r, std::uint8_t format) {
    switch (format) {
    case 0: return r.u8();
    case 1: r.u8(); return r.u16();
    case 2: r.u8(); return r.u32();
    default: throw DecodeError("reserved logical segment format");
    }
}

std::uint16_t narrow16(std::uint32_t v, const char* what) {
    if (v > 0xFFFF) throw DecodeError(std::string(what) + " id exceeds 16 bits");
    return static_cast<std::uint16_t>(v);
}

}  // namespace

// --- EPATH

Bytes encode_epath_segments(const Epath& path) {
    wire::Writer w;
    SegmentEncoder enc{w};
    for (const auto& seg : path) std::visit(enc, seg);
    return w.take();
}

Bytes encode_epath(const Epath& path) {
    auto segments = encode_epath_segments(path);
    if (segments.size() / 2 > 0xFF) throw UsageError("EPATH longer than 255 words");
    Bytes out;
    out.reserve(segments.size() + 1);
    out.push_back(static_cast<std::uint8_t>(segments.size() / 2));
    out.insert(out.end(), segments.begin(), segments.end());
    return out;
}

Epath decode_epath_segments(wire::Reader& in, std::size_t words) {
    wire::Reader r(in.bytes(words * 2));
    Epath path;
    while (!r.empty()) {
        const auto b = r.u8();
        if ((b & 0xE0) == 0x00) {
            if (b & 0x10) throw DecodeError("extended link address port segments are not supported");
            const auto port = static_cast<std::uint8_t>(b & 0x0F);
            if (port == 0 || port == 0x0F) throw DecodeError("unsupported port number " + std::to_string(port));
            path.emplace_back(PortLink{port, r.u8()});
            continue;
        }
        if (b == 0x91) {
            const auto len = r.u8();
            if (len == 0) throw DecodeError("empty symbol segment");
            auto chars = r.bytes(len);
            if (len % 2 != 0) r.u8();
            path.emplace_back(Symbol{std::string(chars.begin(), chars.end())});
            continue;
        }
        const auto format = static_cast<std::uint8_t>(b & 0x03);
        switch (b & 0xFC) {
        case 0x20: path.emplace_back(ClassId{narrow16(get_logical(r, format), "class")}); break;
        case 0x24: path.emplace_back(InstanceId{narrow16(get_logical(r, format), "instance")}); break;
        case 0x30: path.emplace_back(AttributeId{narrow16(get_logical(r, format), "attribute")}); break;
        case 0x28: path.emplace_back(Element{get_logical(r, format)}); break;
        default: throw DecodeError("unsupported EPATH segment type " + hex(b));
        }
    }
    return path;
}

std::string to_string(const Epath& path) {
    std::ostringstream os;
    bool first = true;
    for (const auto& seg : path) {
        if (!first) os << ' ';
        first = false;
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, ClassId>) os << "class " << hex(s.id);
                else if constexpr (std::is_same_v<T, InstanceId>) os << "instance " << s.id;
                else if constexpr (std::is_same_v<T, AttributeId>) os << "attribute " << s.id;
                else if constexpr (std::is_same_v<T, Symbol>) os << '\'' << s.name << '\'';
                else if constexpr (std::is_same_v<T, Element>) os << '[' << s.index << ']';
                else os << "port " << int(s.port) << " link " << int(s.link);
            },
            seg);
    }
    return os.str();
}

Epath object_path(std::uint16_t cls, std::uint16_t instance) {
    return {ClassId{cls}, InstanceId{instance}};
}

Epath object_path(std::uint16_t cls, std::uint16_t instance, std::uint16_t attribute) {
    return {ClassId{cls}, InstanceId{instance}, AttributeId{attribute}};
}

// --- types

std::size_t width(ElemType type) noexcept {
    switch (type) {
    case ElemType::Bool:
    case ElemType::Sint: return 1;
    case ElemType::Int: return 2;
    case ElemType::Dint:
    case ElemType::Real: return 4;
    }
    return 4;
}

std::uint16_t type_code(ElemType type) noexcept { return static_cast<std::uint16_t>(type); }

std::optional<ElemType> elem_type_from_code(std::uint16_t code) noexcept {
    switch (code) {
    case 0x00C1: return ElemType::Bool;
    case 0x00C2: return ElemType::Sint;
    case 0x00C3: return ElemType::Int;
    case 0x00C4: return ElemType::Dint;
    case 0x00CA: return ElemType::Real;
    default: return std::nullopt;
    }
}

std::string_view name(ElemType type) noexcept {
    switch (type) {
    case ElemType::Bool: return "BOOL";
    case ElemType::Sint: return "SINT";
    case ElemType::Int: return "INT";
    case ElemType::Dint: return "DINT";
    case ElemType::Real: return "REAL";
    }
    return "?";
}

std::optional<ElemType> elem_type_from_name(std::string_view n) noexcept {
    for (auto t : {ElemType::Bool, ElemType::Sint, ElemType::Int, ElemType::Dint, ElemType::Real}) {
        if (name(t) == n) return t;
    }
    return std::nullopt;
}

// --- CipValue

namespace {

std::uint32_t mask_for(ElemType type) {
    switch (width(type)) {
    case 1: return 0xFF;
    case 2: return 0xFFFF;
    default: return 0xFFFFFFFF;
    }
}

}  // namespace

CipValue::CipValue(ElemType type, std::vector<std::uint32_t> raw) : type_(type), raw_(std::move(raw)) {
    for (auto& r : raw_) {
        r &= mask_for(type_);
        if (type_ == ElemType::Bool) r = r != 0 ? 1 : 0;
    }
}

CipValue CipValue::bools(const std::vector<bool>& v) {
    std::vector<std::uint32_t> raw(v.begin(), v.end());
    return CipValue(ElemType::Bool, std::move(raw));
}

CipValue CipValue::sints(const std::vector<std::int8_t>& v) {
    std::vector<std::uint32_t> raw;
    for (auto x : v) raw.push_back(static_cast<std::uint8_t>(x));
    return CipValue(ElemType::Sint, std::move(raw));
}

CipValue CipValue::ints(const std::vector<std::int16_t>& v) {
    std::vector<std::uint32_t> raw;
    for (auto x : v) raw.push_back(static_cast<std::uint16_t>(x));
    return CipValue(ElemType::Int, std::move(raw));
}

CipValue CipValue::dints(const std::vector<std::int32_t>& v) {
    std::vector<std::uint32_t> raw;
    for (auto x : v) raw.push_back(static_cast<std::uint32_t>(x));
    return CipValue(ElemType::Dint, std::move(raw));
}

CipValue CipValue::reals(const std::vector<float>& v) {
    std::vector<std::uint32_t> raw;
    for (auto x : v) raw.push_back(std::bit_cast<std::uint32_t>(x));
    return CipValue(ElemType::Real, std::move(raw));
}

CipValue CipValue::from_doubles(ElemType type, const std::vector<double>& v) {
    std::vector<std::uint32_t> raw;
    raw.reserve(v.size());
    for (double x : v) {
        if (type == ElemType::Real) {
            raw.push_back(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
            continue;
        }
        if (type == ElemType::Bool) {
            raw.push_back(x != 0.0 ? 1 : 0);
            continue;
        }
        if (!std::isfinite(x) || std::trunc(x) != x) {
            throw UsageError(std::string(name(type)) + " value must be an integer");
        }
        const auto bits = static_cast<int>(width(type) * 8);
        const double lo = -std::ldexp(1.0, bits - 1);
        const double hi = std::ldexp(1.0, bits - 1) - 1;
        if (x < lo || x > hi) throw UsageError(std::string(name(type)) + " value out of range");
        raw.push_back(static_cast<std::uint32_t>(static_cast<std::int64_t>(x)));
    }
    return CipValue(type, std::move(raw));
}

void CipValue::set_raw(std::size_t i, std::uint32_t bits) {
    bits &= mask_for(type_);
    if (type_ == ElemType::Bool) bits = bits != 0 ? 1 : 0;
    raw_.at(i) = bits;
}

std::int64_t CipValue::as_int(std::size_t i) const {
    const auto r = raw(i);
    switch (type_) {
    case ElemType::Bool: return r != 0;
    case ElemType::Sint: return static_cast<std::int8_t>(r);
    case ElemType::Int: return static_cast<std::int16_t>(r);
    case ElemType::Dint: return static_cast<std::int32_t>(r);
    case ElemType::Real: return static_cast<std::int64_t>(as_real(i));
    }
    return 0;
}

float CipValue::as_real(std::size_t i) const {
    if (type_ != ElemType::Real) return static_cast<float>(as_int(i));
    return std::bit_cast<float>(raw(i));
}

double CipValue::as_double(std::size_t i) const {
    return type_ == ElemType::Real ? static_cast<double>(as_real(i)) : static_cast<double>(as_int(i));
}

CipValue CipValue::slice(std::size_t first, std::size_t count) const {
    if (first + count > raw_.size()) throw UsageError("slice past end of value");
    return CipValue(type_, std::vector<std::uint32_t>(raw_.begin() + first, raw_.begin() + first + count));
}

void CipValue::encode_elements(wire::Writer& out) const {
    for (auto r : raw_) {
        switch (type_) {
        case ElemType::Bool: out.u8(r ? 0xFF : 0x00); break;
        case ElemType::Sint: out.u8(static_cast<std::uint8_t>(r)); break;
        case ElemType::Int: out.u16(static_cast<std::uint16_t>(r)); break;
        case ElemType::Dint: out.u32(r); break;
        case ElemType::Real: out.f32(std::bit_cast<float>(r)); break;
        }
    }
}

CipValue CipValue::decode_elements(ElemType type, wire::Reader& in, std::size_t count) {
    std::vector<std::uint32_t> raw;
    raw.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        switch (type) {
        case ElemType::Bool: raw.push_back(in.u8() != 0 ? 1 : 0); break;
        case ElemType::Sint: raw.push_back(in.u8()); break;
        case ElemType::Int: raw.push_back(in.u16()); break;
        case ElemType::Dint: raw.push_back(in.u32()); break;
        case ElemType::Real: raw.push_back(std::bit_cast<std::uint32_t>(in.f32())); break;
        }
    }
    return CipValue(type, std::move(raw));
}

std::string format_value(const CipValue& value) {
    std::string out(name(value.type()));
    out += '[' + std::to_string(value.size()) + ']';
    for (std::size_t i = 0; i < value.size(); ++i) {
        out += ' ';
        if (value.type() == ElemType::Real) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6g", static_cast<double>(value.as_real(i)));
            out += buf;
        } else {
            out += std::to_string(value.as_int(i));
        }
    }
    return out;
}

// --- framing

Bytes encode_request(const CipRequest& request) {
    if (request.service & service::kReplyBit) throw UsageError("request service code has the reply bit set");
    wire::Writer w;
    w.u8(request.service);
    w.bytes(encode_epath(request.path));
    w.bytes(request.data);
    return w.take();
}

CipRequest decode_request(ByteView bytes) {
    wire::Reader r(bytes);
    CipRequest req;
    req.service = r.u8();
    if (req.service & service::kReplyBit) throw DecodeError("request service " + hex(req.service) + " has reply bit set");
    const auto words = r.u8();
    req.path = decode_epath_segments(r, words);
    auto rest = r.rest();
    req.data.assign(rest.begin(), rest.end());
    return req;
}

Bytes encode_response(const CipResponse& response) {
    if (response.extended_status.size() > 0xFF) throw UsageError("too many extended status words");
    wire::Writer w;
    w.u8(response.service);
    w.u8(0);
    w.u8(response.general_status);
    w.u8(static_cast<std::uint8_t>(response.extended_status.size()));
    for (auto word : response.extended_status) w.u16(word);
    w.bytes(response.data);
    return w.take();
}

CipResponse decode_response(ByteView bytes) {
    wire::Reader r(bytes);
    CipResponse resp;
    resp.service = r.u8();
    if (!(resp.service & service::kReplyBit)) throw DecodeError("reply service " + hex(resp.service) + " lacks reply bit");
    r.u8();
    resp.general_status = r.u8();
    const auto ext = r.u8();
    for (int i = 0; i < ext; ++i) resp.extended_status.push_back(r.u16());
    auto rest = r.rest();
    resp.data.assign(rest.begin(), rest.end());
    return resp;
}

CipResponse error_response(std::uint8_t request_service, std::uint8_t general, std::vector<std::uint16_t> extended) {
    CipResponse resp;
    resp.service = static_cast<std::uint8_t>(request_service | service::kReplyBit);
    resp.general_status = general;
    resp.extended_status = std::move(extended);
    return resp;
}

void expect_success(const CipResponse& response, std::uint8_t request_service) {
    const auto expected = static_cast<std::uint8_t>(request_service | service::kReplyBit);
    if (response.service != expected) {
        throw DecodeError("reply service " + hex(response.service) + " does not answer " + hex(request_service));
    }
    if (!response.ok()) {
        std::string what = "CIP error: general status " + hex(response.general_status);
        for (auto e : response.extended_status) what += ", extended " + hex(e, 4);
        throw CipError(response.general_status, response.extended_status, what);
    }
}

// --- data access

CipRequest build_read_request(const Epath& path, std::uint16_t element_count) {
    if (element_count == 0) throw UsageError("read element count must be at least 1");
    wire::Writer w;
    w.u16(element_count);
    return {service::kReadData, path, w.take()};
}

ReadRequestFields parse_read_request_data(ByteView data) {
    wire::Reader r(data);
    ReadRequestFields f{r.u16()};
    if (!r.empty()) throw DecodeError("unexpected bytes after read element count");
    return f;
}

CipValue parse_read_response(const CipResponse& response) {
    expect_success(response, service::kReadData);
    wire::Reader r(response.data);
    const auto code = r.u16();
    const auto type = elem_type_from_code(code);
    if (!type) throw DecodeError("unknown data type code " + hex(code, 4));
    const auto w = width(*type);
    if (r.empty() || r.remaining() % w != 0) {
        throw DecodeError("read reply data length " + std::to_string(r.remaining()) + " is not a multiple of " +
                          std::string(name(*type)) + " width");
    }
    return CipValue::decode_elements(*type, r, r.remaining() / w);
}

CipRequest build_write_request(const Epath& path, const CipValue& value) {
    if (value.empty()) throw UsageError("write of an empty value");
    if (value.size() > 0xFFFF) throw UsageError("write element count exceeds 16 bits");
    wire::Writer w;
    w.u16(type_code(value.type()));
    w.u16(static_cast<std::uint16_t>(value.size()));
    value.encode_elements(w);
    return {service::kWriteData, path, w.take()};
}

CipValue parse_write_request_data(ByteView data) {
    wire::Reader r(data);
    const auto code = r.u16();
    const auto type = elem_type_from_code(code);
    if (!type) throw DecodeError("unknown data type code " + hex(code, 4));
    const auto count = r.u16();
    if (count == 0) throw DecodeError("write of zero elements");
    if (r.remaining() != count * width(*type)) throw DecodeError("write data length does not match element count");
    return CipValue::decode_elements(*type, r, count);
}

// --- identity

CipRequest build_get_attribute_single(std::uint16_t cls, std::uint16_t instance, std::uint16_t attribute) {
    return {service::kGetAttributeSingle, object_path(cls, instance, attribute), {}};
}

std::string parse_short_string(const CipResponse& response) {
    expect_success(response, service::kGetAttributeSingle);
    wire::Reader r(response.data);
    const auto len = r.u8();
    if (len > r.remaining()) {
        throw DecodeError("short string length " + std::to_string(len) + " exceeds " +
                          std::to_string(r.remaining()) + " payload bytes");
    }
    auto chars = r.bytes(len);
    return std::string(chars.begin(), chars.end());
}

Bytes encode_short_string(std::string_view text) {
    if (text.size() > 0xFF) throw UsageError("short string longer than 255 characters");
    wire::Writer w;
    w.u8(static_cast<std::uint8_t>(text.size()));
    w.text(text);
    return w.take();
}

// --- routing

CipRequest wrap_unconnected_send(const CipRequest& inner, std::uint8_t slot) {
    const auto embedded = encode_request(inner);
    if (embedded.size() > 0xFFFF) throw UsageError("embedded message exceeds the 16-bit size field");
    const auto route = encode_epath_segments({PortLink{kBackplanePort, slot}});

    wire::Writer w;
    w.u8(kUnconnectedPriorityTick);
    w.u8(kUnconnectedTimeoutTicks);
    w.u16(static_cast<std::uint16_t>(embedded.size()));
    w.bytes(embedded);
    w.pad_to_even();
    w.u8(static_cast<std::uint8_t>(route.size() / 2));
    w.u8(0);
    w.bytes(route);
    return {service::kUnconnectedSend, object_path(object::kConnectionManager, 1), w.take()};
}

UnconnectedSend unwrap_unconnected_send(const CipRequest& request) {
    if (request.service != service::kUnconnectedSend) throw DecodeError("not an Unconnected Send request");
    wire::Reader r(request.data);
    r.u8();
    r.u8();
    const auto size = r.u16();
    UnconnectedSend out;
    auto embedded = r.bytes(size);
    out.embedded.assign(embedded.begin(), embedded.end());
    if (size % 2 != 0) r.u8();
    const auto words = r.u8();
    r.u8();
    out.route = decode_epath_segments(r, words);
    if (!r.empty()) throw DecodeError("trailing bytes after Unconnected Send route path");
    return out;
}

std::size_t unconnected_send_overhead(std::size_t inner_size) noexcept {
    // service + path words + CM path (4) + tick + timeout + size + route size + reserved + port/link
    return 14 + (inner_size % 2);
}

// --- Multi-Request

namespace {

Bytes pack_offsets(const std::vector<Bytes>& items) {
    wire::Writer w;
    w.u16(static_cast<std::uint16_t>(items.size()));
    std::size_t offset = 2 + 2 * items.size();
    for (const auto& item : items) {
        if (offset > 0xFFFF) throw UsageError("multi-service packet exceeds 16-bit offsets");
        w.u16(static_cast<std::uint16_t>(offset));
        offset += item.size();
    }
    for (const auto& item : items) w.bytes(item);
    return w.take();
}

std::vector<Bytes> unpack_offsets(ByteView data) {
    wire::Reader r(data);
    const auto count = r.u16();
    if (count == 0) throw DecodeError("multi-service packet with zero items");
    std::vector<std::size_t> offsets;
    for (std::uint16_t i = 0; i < count; ++i) offsets.push_back(r.u16());
    const std::size_t table_end = 2 + 2 * std::size_t{count};
    std::vector<Bytes> items;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const auto begin = offsets[i];
        const auto end = i + 1 < offsets.size() ? offsets[i + 1] : data.size();
        if (begin < table_end || end > data.size() || begin >= end) {
            throw DecodeError("multi-service offset table inconsistent at item " + std::to_string(i));
        }
        items.emplace_back(data.begin() + begin, data.begin() + end);
    }
    return items;
}

}  // namespace

CipRequest build_multi_request(const std::vector<CipRequest>& requests) {
    if (requests.empty()) throw UsageError("multi-request needs at least one request");
    std::vector<Bytes> encoded;
    encoded.reserve(requests.size());
    for (const auto& r : requests) encoded.push_back(encode_request(r));
    return {service::kMultipleServicePacket, object_path(object::kMessageRouter, 1), pack_offsets(encoded)};
}

std::vector<Bytes> split_multi_request(const CipRequest& request) {
    if (request.service != service::kMultipleServicePacket) throw DecodeError("not a multi-service request");
    return unpack_offsets(request.data);
}

CipResponse build_multi_response(const std::vector<CipResponse>& responses) {
    std::vector<Bytes> encoded;
    bool all_ok = true;
    for (const auto& r : responses) {
        encoded.push_back(encode_response(r));
        all_ok = all_ok && r.ok();
    }
    CipResponse out;
    out.service = service::kMultipleServicePacket | service::kReplyBit;
    out.general_status = all_ok ? status::kSuccess : status::kEmbeddedServiceError;
    out.data = pack_offsets(encoded);
    return out;
}

std::vector<CipResponse> split_multi_response(const CipResponse& response, std::size_t expected_count) {
    if (response.service != (service::kMultipleServicePacket | service::kReplyBit)) {
        throw DecodeError("reply service " + hex(response.service) + " does not answer a multi-request");
    }
    if (response.general_status != status::kSuccess && response.general_status != status::kEmbeddedServiceError) {
        expect_success(response, service::kMultipleServicePacket);
    }
    auto items = unpack_offsets(response.data);
    if (items.size() != expected_count) {
        throw DecodeError("multi-service reply holds " + std::to_string(items.size()) + " replies, expected " +
                          std::to_string(expected_count));
    }
    std::vector<CipResponse> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(decode_response(item));
    return out;
}

// --- Forward_Open / Forward_Close

namespace {

Epath connection_path(std::uint8_t slot) {
    return {PortLink{kBackplanePort, slot}, ClassId{object::kMessageRouter}, InstanceId{1}};
}

std::uint16_t network_params(std::uint16_t size) {
    return static_cast<std::uint16_t>(0x4200 | (size & 0x01FF));  // point-to-point, variable size
}

}  // namespace

CipRequest build_forward_open(const ForwardOpenParams& params) {
    const auto path = encode_epath_segments(connection_path(params.slot));
    const auto rpi = static_cast<std::uint32_t>(params.update_interval.count());
    wire::Writer w;
    w.u8(kUnconnectedPriorityTick);
    w.u8(0x0E);
    w.u32(0);  // O->T id, chosen by the target
    w.u32(params.proposed_t_to_o_id);
    w.u16(params.connection_serial);
    w.u16(params.vendor_id);
    w.u32(params.originator_serial);
    w.u8(params.timeout_multiplier);
    w.u8(0);
    w.u8(0);
    w.u8(0);
    w.u32(rpi);
    w.u16(network_params(params.connection_size));
    w.u32(rpi);
    w.u16(network_params(params.connection_size));
    w.u8(0xA3);  // server transport class 3
    w.u8(static_cast<std::uint8_t>(path.size() / 2));
    w.bytes(path);
    return {service::kForwardOpen, object_path(object::kConnectionManager, 1), w.take()};
}

ForwardOpenRequest parse_forward_open_request(const CipRequest& request) {
    if (request.service != service::kForwardOpen) throw DecodeError("not a Forward_Open request");
    wire::Reader r(request.data);
    ForwardOpenRequest out;
    r.u8();
    r.u8();
    r.u32();
    out.t_to_o_id = r.u32();
    out.connection_serial = r.u16();
    out.vendor_id = r.u16();
    out.originator_serial = r.u32();
    r.u8();
    r.skip(3);
    out.o_to_t_rpi = std::chrono::microseconds(r.u32());
    r.u16();
    out.t_to_o_rpi = std::chrono::microseconds(r.u32());
    r.u16();
    r.u8();
    const auto words = r.u8();
    out.connection_path = decode_epath_segments(r, words);
    if (!r.empty()) throw DecodeError("trailing bytes after Forward_Open connection path");
    return out;
}

CipResponse build_forward_open_reply(const ForwardOpenRequest& request, const ConnectionGrant& grant) {
    wire::Writer w;
    w.u32(grant.o_to_t_id);
    w.u32(grant.t_to_o_id);
    w.u16(grant.serial);
    w.u16(request.vendor_id);
    w.u32(request.originator_serial);
    w.u32(static_cast<std::uint32_t>(grant.update_interval.count()));
    w.u32(static_cast<std::uint32_t>(grant.update_interval.count()));
    w.u8(0);
    w.u8(0);
    CipResponse resp;
    resp.service = service::kForwardOpen | service::kReplyBit;
    resp.data = w.take();
    return resp;
}

ConnectionGrant parse_forward_open_reply(const CipResponse& response) {
    expect_success(response, service::kForwardOpen);
    wire::Reader r(response.data);
    ConnectionGrant g;
    g.o_to_t_id = r.u32();
    g.t_to_o_id = r.u32();
    g.serial = r.u16();
    r.u16();
    r.u32();
    g.update_interval = std::chrono::microseconds(r.u32());
    r.u32();
    const auto app_words = r.u8();
    r.u8();
    r.skip(app_words * 2u);
    return g;
}

CipRequest build_forward_close(const ForwardOpenParams& params) {
    const auto path = encode_epath_segments(connection_path(params.slot));
    wire::Writer w;
    w.u8(kUnconnectedPriorityTick);
    w.u8(0x0E);
    w.u16(params.connection_serial);
    w.u16(params.vendor_id);
    w.u32(params.originator_serial);
    w.u8(static_cast<std::uint8_t>(path.size() / 2));
    w.u8(0);
    w.bytes(path);
    return {service::kForwardClose, object_path(object::kConnectionManager, 1), w.take()};
}

ForwardCloseRequest parse_forward_close_request(const CipRequest& request) {
    if (request.service != service::kForwardClose) throw DecodeError("not a Forward_Close request");
    wire::Reader r(request.data);
    r.u8();
    r.u8();
    ForwardCloseRequest out;
    out.connection_serial = r.u16();
    out.vendor_id = r.u16();
    out.originator_serial = r.u32();
    const auto words = r.u8();
    r.u8();
    decode_epath_segments(r, words);
    return out;
}

// --- estimates

std::size_t estimate_request_size(const CipRequest& request) { return encode_request(request).size(); }

std::size_t estimate_response_size(ElemType type, std::size_t element_count) noexcept {
    return 4 + 2 + width(type) * element_count;
}

}  // namespace cip
}  // namespace eip
