#include "eip/wire.hpp"

#include <algorithm>
#include <array>
#include <cstring>

#include "eip/errors.hpp"

namespace eip::wire {

namespace {

thread_local std::endian t_host_order = std::endian::native;

// Turns the native object representation into what a host of order
// host_order() would hold in memory, then converts that to wire order.
template <std::size_t N>
void host_to_wire(std::array<std::uint8_t, N>& mem) {
    if (t_host_order != std::endian::native) std::ranges::reverse(mem);
    if (t_host_order == std::endian::big) std::ranges::reverse(mem);
}

template <std::size_t N>
void wire_to_host(std::array<std::uint8_t, N>& mem) {
    if (t_host_order == std::endian::big) std::ranges::reverse(mem);
    if (t_host_order != std::endian::native) std::ranges::reverse(mem);
}

}  // namespace

std::endian host_order() noexcept { return t_host_order; }

ScopedHostOrder::ScopedHostOrder(std::endian order) noexcept : saved_(t_host_order) {
    t_host_order = order;
}

ScopedHostOrder::~ScopedHostOrder() { t_host_order = saved_; }

template <class T>
void Writer::put(T v) {
    auto mem = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    host_to_wire(mem);
    out_.insert(out_.end(), mem.begin(), mem.end());
}

template void Writer::put(std::uint16_t);
template void Writer::put(std::uint32_t);
template void Writer::put(float);

void Writer::patch_u16(std::size_t offset, std::uint16_t v) {
    if (offset + 2 > out_.size()) throw UsageError("patch_u16 past end of buffer");
    auto mem = std::bit_cast<std::array<std::uint8_t, 2>>(v);
    host_to_wire(mem);
    out_[offset] = mem[0];
    out_[offset + 1] = mem[1];
}

template <class T>
T Reader::get() {
    std::array<std::uint8_t, sizeof(T)> mem{};
    auto src = bytes(sizeof(T));
    std::ranges::copy(src, mem.begin());
    wire_to_host(mem);
    return std::bit_cast<T>(mem);
}

std::uint8_t Reader::u8() { return bytes(1)[0]; }
std::uint16_t Reader::u16() { return get<std::uint16_t>(); }
std::uint32_t Reader::u32() { return get<std::uint32_t>(); }
float Reader::f32() { return get<float>(); }

ByteView Reader::bytes(std::size_t n) {
    if (n > remaining()) {
        throw DecodeError("truncated: need " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + ", have " + std::to_string(remaining()));
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

}  // namespace eip::wire
