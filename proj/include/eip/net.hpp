#pragma once

// Blocking POSIX TCP with poll()-based deadlines.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "eip/wire.hpp"

namespace eip::net {

using Clock = std::chrono::steady_clock;

class TcpStream {
public:
    TcpStream() = default;
    explicit TcpStream(int fd) noexcept : fd_(fd) {}
    ~TcpStream() { close(); }
    TcpStream(TcpStream&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    TcpStream& operator=(TcpStream&& other) noexcept;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    /// Throws ConnectionError (refused, unreachable, unresolvable) or TimeoutError.
    static TcpStream connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

    void send_all(ByteView data, Clock::time_point deadline);
    /// Reads exactly `n` bytes. ConnectionError on EOF, TimeoutError past the deadline.
    Bytes recv_exact(std::size_t n, Clock::time_point deadline);
    /// True once data (or EOF) is available within `timeout`.
    bool readable(std::chrono::milliseconds timeout);
    /// Reads one encapsulation frame (24-byte header plus declared payload).
    Bytes recv_frame(Clock::time_point deadline);

    /// Wakes any thread blocked in poll() on this socket.
    void shutdown() noexcept;
    void close() noexcept;
    bool is_open() const noexcept { return fd_ >= 0; }
    int fd() const noexcept { return fd_; }

private:
    void wait(short events, Clock::time_point deadline);

    int fd_ = -1;
};

class TcpListener {
public:
    TcpListener() = default;
    ~TcpListener() { close(); }
    TcpListener(TcpListener&& other) noexcept : fd_(std::exchange(other.fd_, -1)), port_(other.port_) {}
    TcpListener& operator=(TcpListener&& other) noexcept;
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    /// Port 0 picks an ephemeral port. Throws ConnectionError on bind failure.
    static TcpListener bind(const std::string& address, std::uint16_t port);

    /// Waits up to `timeout` for a client; nullopt on timeout.
    std::optional<TcpStream> accept(std::chrono::milliseconds timeout);

    std::uint16_t port() const noexcept { return port_; }
    void close() noexcept;
    bool is_open() const noexcept { return fd_ >= 0; }

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace eip::net
