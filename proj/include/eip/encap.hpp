#pragma once

// EtherNet/IP encapsulation layer: the 24-byte header, session registration,
// and the Common Packet Format carriers for SendRRData / SendUnitData.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "eip/wire.hpp"

namespace eip::encap {

inline constexpr std::uint16_t kDefaultPort = 0xAF12;
inline constexpr std::size_t kHeaderSize = 24;
inline constexpr std::uint16_t kProtocolVersion = 1;

namespace command {
inline constexpr std::uint16_t kNop = 0x0000;
inline constexpr std::uint16_t kRegisterSession = 0x0065;
inline constexpr std::uint16_t kUnRegisterSession = 0x0066;
inline constexpr std::uint16_t kSendRRData = 0x006F;
inline constexpr std::uint16_t kSendUnitData = 0x0070;
}  // namespace command

namespace status {
inline constexpr std::uint32_t kSuccess = 0x0000;
inline constexpr std::uint32_t kInvalidCommand = 0x0001;
inline constexpr std::uint32_t kInsufficientMemory = 0x0002;
inline constexpr std::uint32_t kIncorrectData = 0x0003;
inline constexpr std::uint32_t kInvalidSession = 0x0064;
inline constexpr std::uint32_t kInvalidLength = 0x0065;
inline constexpr std::uint32_t kUnsupportedProtocol = 0x0069;
}  // namespace status

namespace item {
inline constexpr std::uint16_t kNullAddress = 0x0000;
inline constexpr std::uint16_t kConnectedAddress = 0x00A1;
inline constexpr std::uint16_t kConnectedData = 0x00B1;
inline constexpr std::uint16_t kUnconnectedData = 0x00B2;
}  // namespace item

using SenderContext = std::array<std::uint8_t, 8>;

struct Header {
    std::uint16_t command = 0;
    std::uint16_t payload_length = 0;
    std::uint32_t session_handle = 0;
    std::uint32_t status = 0;
    SenderContext sender_context{};
    std::uint32_t options = 0;

    friend bool operator==(const Header&, const Header&) = default;
};

struct Packet {
    Header header;
    Bytes payload;
};

/// Serializes header + payload. payload_length is rewritten from the payload.
/// Throws UsageError when the payload does not fit the 16-bit length field.
Bytes encode_packet(Header header, ByteView payload);

/// Parses exactly one packet. Truncation and trailing bytes are DecodeErrors.
Packet decode_packet(ByteView bytes);

/// Total frame size (header + declared payload) once a full header is
/// buffered; nullopt while fewer than 24 bytes are available.
std::optional<std::size_t> frame_size(ByteView buffered);

struct CpfItem {
    std::uint16_t type_id = 0;
    Bytes data;

    friend bool operator==(const CpfItem&, const CpfItem&) = default;
};

void encode_cpf(wire::Writer& out, const std::vector<CpfItem>& items);
std::vector<CpfItem> decode_cpf(wire::Reader& in);

// --- session registration

Bytes build_register_session(const SenderContext& context = {});

/// Returns the server-assigned session handle. Throws SessionError on a
/// nonzero status or zero handle, DecodeError on a protocol-version mismatch.
std::uint32_t parse_register_reply(const Packet& reply);

Bytes build_unregister_session(std::uint32_t session_handle);

// --- unconnected (SendRRData)

Bytes build_rr_data(std::uint32_t session_handle, ByteView cip, const SenderContext& context = {});
Bytes parse_rr_data(ByteView payload);

// --- connected (SendUnitData)

struct UnitData {
    std::uint32_t connection_id = 0;
    std::uint16_t sequence = 0;
    Bytes cip;
};

Bytes build_unit_data(std::uint32_t session_handle, std::uint32_t connection_id, std::uint16_t sequence,
                      ByteView cip, const SenderContext& context = {});
UnitData parse_unit_data(ByteView payload);

/// Builds the SendRRData / SendUnitData payload (interface handle, timeout,
/// CPF items) without the header. Used by the simulator for replies.
Bytes rr_data_payload(ByteView cip);
Bytes unit_data_payload(std::uint32_t connection_id, std::uint16_t sequence, ByteView cip);

}  // namespace eip::encap
