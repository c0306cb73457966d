#pragma once

// CIP explicit messaging: EPATHs, typed tag data, request/response framing,
// the Logix read/write services, Multi-Request packing, Unconnected Send
// routing and Forward_Open.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eip/wire.hpp"

namespace eip::cip {

namespace service {
inline constexpr std::uint8_t kMultipleServicePacket = 0x0A;
inline constexpr std::uint8_t kGetAttributeSingle = 0x0E;
inline constexpr std::uint8_t kReadData = 0x4C;
inline constexpr std::uint8_t kForwardClose = 0x4E;
inline constexpr std::uint8_t kUnconnectedSend = 0x52;
inline constexpr std::uint8_t kWriteData = 0x53;
inline constexpr std::uint8_t kForwardOpen = 0x54;
inline constexpr std::uint8_t kReplyBit = 0x80;
}  // namespace service

namespace status {
inline constexpr std::uint8_t kSuccess = 0x00;
inline constexpr std::uint8_t kConnectionFailure = 0x01;
inline constexpr std::uint8_t kResourceUnavailable = 0x02;
inline constexpr std::uint8_t kPathSegmentError = 0x04;
inline constexpr std::uint8_t kPathDestinationUnknown = 0x05;
inline constexpr std::uint8_t kPartialTransfer = 0x06;
inline constexpr std::uint8_t kServiceNotSupported = 0x08;
inline constexpr std::uint8_t kReplyDataTooLarge = 0x11;
inline constexpr std::uint8_t kNotEnoughData = 0x13;
inline constexpr std::uint8_t kTooMuchData = 0x15;
inline constexpr std::uint8_t kEmbeddedServiceError = 0x1E;
inline constexpr std::uint8_t kGeneralError = 0xFF;
}  // namespace status

namespace object {
inline constexpr std::uint16_t kIdentity = 0x01;
inline constexpr std::uint16_t kMessageRouter = 0x02;
inline constexpr std::uint16_t kConnectionManager = 0x06;
inline constexpr std::uint16_t kProductNameAttribute = 7;
}  // namespace object

inline constexpr std::size_t kMaxSymbolLength = 40;

// --- EPATH segments

struct ClassId {
    std::uint16_t id;
    friend bool operator==(const ClassId&, const ClassId&) = default;
};
struct InstanceId {
    std::uint16_t id;
    friend bool operator==(const InstanceId&, const InstanceId&) = default;
};
struct AttributeId {
    std::uint16_t id;
    friend bool operator==(const AttributeId&, const AttributeId&) = default;
};
struct Symbol {
    std::string name;
    friend bool operator==(const Symbol&, const Symbol&) = default;
};
struct Element {
    std::uint32_t index;
    friend bool operator==(const Element&, const Element&) = default;
};
struct PortLink {
    std::uint8_t port;
    std::uint8_t link;
    friend bool operator==(const PortLink&, const PortLink&) = default;
};

using Segment = std::variant<ClassId, InstanceId, AttributeId, Symbol, Element, PortLink>;
using Epath = std::vector<Segment>;

/// Segments only, no size prefix. Always an even number of bytes.
Bytes encode_epath_segments(const Epath& path);
/// One-byte word-count prefix followed by the segments.
Bytes encode_epath(const Epath& path);
/// Decodes exactly `words` 16-bit words of segments.
Epath decode_epath_segments(wire::Reader& in, std::size_t words);

std::string to_string(const Epath& path);

/// Standard object address, e.g. Identity instance 1 attribute 7.
Epath object_path(std::uint16_t cls, std::uint16_t instance);
Epath object_path(std::uint16_t cls, std::uint16_t instance, std::uint16_t attribute);

// --- typed data

enum class ElemType : std::uint16_t {
    Bool = 0x00C1,
    Sint = 0x00C2,
    Int = 0x00C3,
    Dint = 0x00C4,
    Real = 0x00CA,
};

std::size_t width(ElemType type) noexcept;
std::uint16_t type_code(ElemType type) noexcept;
std::optional<ElemType> elem_type_from_code(std::uint16_t code) noexcept;
std::string_view name(ElemType type) noexcept;
std::optional<ElemType> elem_type_from_name(std::string_view name) noexcept;

/// A typed PLC value: one element for scalars, several for array spans.
/// Elements are kept as their raw wire bits, so equality is bit-exact.
class CipValue {
public:
    CipValue() = default;
    CipValue(ElemType type, std::vector<std::uint32_t> raw);

    static CipValue bools(const std::vector<bool>& v);
    static CipValue sints(const std::vector<std::int8_t>& v);
    static CipValue ints(const std::vector<std::int16_t>& v);
    static CipValue dints(const std::vector<std::int32_t>& v);
    static CipValue reals(const std::vector<float>& v);
    /// Converts doubles to `type`, truncating integers and narrowing REALs.
    static CipValue from_doubles(ElemType type, const std::vector<double>& v);

    ElemType type() const noexcept { return type_; }
    std::size_t size() const noexcept { return raw_.size(); }
    bool empty() const noexcept { return raw_.empty(); }

    std::uint32_t raw(std::size_t i) const { return raw_.at(i); }
    const std::vector<std::uint32_t>& raw() const noexcept { return raw_; }
    void set_raw(std::size_t i, std::uint32_t bits);

    bool as_bool(std::size_t i) const { return raw(i) != 0; }
    std::int64_t as_int(std::size_t i) const;
    float as_real(std::size_t i) const;
    double as_double(std::size_t i) const;

    /// Elements [first, first + count).
    CipValue slice(std::size_t first, std::size_t count) const;

    void encode_elements(wire::Writer& out) const;
    static CipValue decode_elements(ElemType type, wire::Reader& in, std::size_t count);

    friend bool operator==(const CipValue&, const CipValue&) = default;

private:
    ElemType type_ = ElemType::Dint;
    std::vector<std::uint32_t> raw_;
};

/// "REAL[1] 0.00281525": type, element count, values (6 significant digits for REAL).
std::string format_value(const CipValue& value);

// --- request / response framing

struct CipRequest {
    std::uint8_t service = 0;
    Epath path;
    Bytes data;

    friend bool operator==(const CipRequest&, const CipRequest&) = default;
};

struct CipResponse {
    std::uint8_t service = 0;
    std::uint8_t general_status = 0;
    std::vector<std::uint16_t> extended_status;
    Bytes data;

    bool ok() const noexcept { return general_status == status::kSuccess; }
    friend bool operator==(const CipResponse&, const CipResponse&) = default;
};

Bytes encode_request(const CipRequest& request);
CipRequest decode_request(ByteView bytes);
Bytes encode_response(const CipResponse& response);
CipResponse decode_response(ByteView bytes);

/// Reply with `general` status to `request_service`.
CipResponse error_response(std::uint8_t request_service, std::uint8_t general,
                           std::vector<std::uint16_t> extended = {});

/// Throws CipError unless the reply answers `request_service` with status 0.
void expect_success(const CipResponse& response, std::uint8_t request_service);

// --- Logix data access

CipRequest build_read_request(const Epath& path, std::uint16_t element_count);
CipValue parse_read_response(const CipResponse& response);
CipRequest build_write_request(const Epath& path, const CipValue& value);

struct ReadRequestFields {
    std::uint16_t element_count;
};
ReadRequestFields parse_read_request_data(ByteView data);
CipValue parse_write_request_data(ByteView data);

// --- identity

CipRequest build_get_attribute_single(std::uint16_t cls, std::uint16_t instance, std::uint16_t attribute);
std::string parse_short_string(const CipResponse& response);
Bytes encode_short_string(std::string_view text);

// --- routing

inline constexpr std::uint8_t kBackplanePort = 1;
inline constexpr std::uint8_t kUnconnectedPriorityTick = 0x0A;
inline constexpr std::uint8_t kUnconnectedTimeoutTicks = 0x05;

CipRequest wrap_unconnected_send(const CipRequest& inner, std::uint8_t slot);

struct UnconnectedSend {
    Bytes embedded;  // encoded inner request
    Epath route;
};
UnconnectedSend unwrap_unconnected_send(const CipRequest& request);

/// Bytes added by wrap_unconnected_send around an inner message of the given size.
std::size_t unconnected_send_overhead(std::size_t inner_size) noexcept;

// --- Multi-Request

CipRequest build_multi_request(const std::vector<CipRequest>& requests);
std::vector<Bytes> split_multi_request(const CipRequest& request);
CipResponse build_multi_response(const std::vector<CipResponse>& responses);
std::vector<CipResponse> split_multi_response(const CipResponse& response, std::size_t expected_count);

/// Fixed bytes of a multi-request (service, path, count) excluding per-item offsets.
inline constexpr std::size_t kMultiRequestOverhead = 8;
/// Fixed bytes of a multi-response (reply header, count) excluding per-item offsets.
inline constexpr std::size_t kMultiResponseOverhead = 6;

// --- connected messaging

struct ForwardOpenParams {
    std::uint8_t slot = 0;
    std::uint32_t proposed_t_to_o_id = 0;
    std::uint16_t connection_serial = 1;
    std::uint16_t vendor_id = 0x1337;
    std::uint32_t originator_serial = 0x00C0FFEE;
    std::uint8_t timeout_multiplier = 7;  // x512
    std::chrono::microseconds update_interval{10'000'000};
    std::uint16_t connection_size = 504;
};

struct ConnectionGrant {
    std::uint32_t o_to_t_id = 0;
    std::uint32_t t_to_o_id = 0;
    std::uint16_t serial = 0;
    std::chrono::microseconds update_interval{0};

    friend bool operator==(const ConnectionGrant&, const ConnectionGrant&) = default;
};

CipRequest build_forward_open(const ForwardOpenParams& params);
ConnectionGrant parse_forward_open_reply(const CipResponse& response);

struct ForwardOpenRequest {
    std::uint32_t t_to_o_id = 0;
    std::uint16_t connection_serial = 0;
    std::uint16_t vendor_id = 0;
    std::uint32_t originator_serial = 0;
    std::chrono::microseconds o_to_t_rpi{0};
    std::chrono::microseconds t_to_o_rpi{0};
    Epath connection_path;
};
ForwardOpenRequest parse_forward_open_request(const CipRequest& request);
CipResponse build_forward_open_reply(const ForwardOpenRequest& request, const ConnectionGrant& grant);

CipRequest build_forward_close(const ForwardOpenParams& params);
struct ForwardCloseRequest {
    std::uint16_t connection_serial = 0;
    std::uint16_t vendor_id = 0;
    std::uint32_t originator_serial = 0;
};
ForwardCloseRequest parse_forward_close_request(const CipRequest& request);

// --- size estimates used for packing

/// Exact encoded size of the request.
std::size_t estimate_request_size(const CipRequest& request);
/// Upper bound on a read reply: reply header + type code + elements.
std::size_t estimate_response_size(ElemType type, std::size_t element_count) noexcept;
/// Write replies carry only the 4-byte reply header.
inline constexpr std::size_t kWriteResponseSize = 4;

}  // namespace eip::cip
