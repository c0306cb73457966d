#pragma once

// Little-endian byte buffers. All multi-byte integers on the EtherNet/IP wire
// are little-endian; hosts of either order produce identical bytes.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace eip {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

namespace wire {

/// Host byte order the codec believes it runs on. Defaults to the real one;
/// tests flip it to run the big-endian conversion path on a little-endian box.
std::endian host_order() noexcept;

/// Overrides host_order() for the current thread while alive.
class ScopedHostOrder {
public:
    explicit ScopedHostOrder(std::endian order) noexcept;
    ~ScopedHostOrder();
    ScopedHostOrder(const ScopedHostOrder&) = delete;
    ScopedHostOrder& operator=(const ScopedHostOrder&) = delete;

private:
    std::endian saved_;
};

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void f32(float v) { put(v); }
    void bytes(ByteView v) { out_.insert(out_.end(), v.begin(), v.end()); }
    void text(std::string_view v) { out_.insert(out_.end(), v.begin(), v.end()); }
    /// Appends one zero byte when the length so far is odd.
    void pad_to_even() {
        if (out_.size() % 2 != 0) u8(0);
    }
    /// Overwrites a previously written 16-bit field.
    void patch_u16(std::size_t offset, std::uint16_t v);

    std::size_t size() const noexcept { return out_.size(); }
    const Bytes& view() const noexcept { return out_; }
    Bytes take() { return std::move(out_); }

private:
    template <class T>
    void put(T v);

    Bytes out_;
};

class Reader {
public:
    explicit Reader(ByteView data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    float f32();
    ByteView bytes(std::size_t n);
    void skip(std::size_t n) { bytes(n); }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool empty() const noexcept { return remaining() == 0; }
    ByteView rest() { return bytes(remaining()); }

private:
    template <class T>
    T get();

    ByteView data_;
    std::size_t pos_ = 0;
};

}  // namespace wire
}  // namespace eip
