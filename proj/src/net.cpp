#include "eip/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>

#include "eip/encap.hpp"
#include "eip/errors.hpp"

namespace eip::net {

namespace {

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

}  // namespace

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

TcpStream TcpStream::connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const auto service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
        throw ConnectionError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);

    TcpStream s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.is_open()) throw ConnectionError(sys_error("socket"));
    const int flags = ::fcntl(s.fd_, F_GETFL, 0);
    ::fcntl(s.fd_, F_SETFL, flags | O_NONBLOCK);
    const int one = 1;
    ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

    if (::connect(s.fd_, found->ai_addr, found->ai_addrlen) != 0) {
        if (errno != EINPROGRESS) throw ConnectionError(sys_error("connect to " + host + ":" + service));
        s.wait(POLLOUT, Clock::now() + timeout);
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(s.fd_, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            errno = err;
            throw ConnectionError(sys_error("connect to " + host + ":" + service));
        }
    }
    return s;
}

void TcpStream::wait(short events, Clock::time_point deadline) {
    for (;;) {
        if (!is_open()) throw ConnectionError("socket closed");
        pollfd p{fd_, events, 0};
        const int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw ConnectionError(sys_error("poll"));
        }
        if (rc == 0) throw TimeoutError("timed out waiting for peer");
        if (p.revents & POLLNVAL) throw ConnectionError("socket closed");
        return;
    }
}

void TcpStream::send_all(ByteView data, Clock::time_point deadline) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const auto n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) {
            wait(POLLOUT, deadline);
            continue;
        }
        throw ConnectionError(sys_error("send"));
    }
}

Bytes TcpStream::recv_exact(std::size_t n, Clock::time_point deadline) {
    Bytes out(n);
    std::size_t got = 0;
    while (got < n) {
        const auto r = ::recv(fd_, out.data() + got, n - got, 0);
        if (r > 0) {
            got += static_cast<std::size_t>(r);
            continue;
        }
        if (r == 0) throw ConnectionError("connection closed by peer");
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) {
            wait(POLLIN, deadline);
            continue;
        }
        throw ConnectionError(sys_error("recv"));
    }
    return out;
}

bool TcpStream::readable(std::chrono::milliseconds timeout) {
    try {
        wait(POLLIN, Clock::now() + timeout);
        return true;
    } catch (const TimeoutError&) {
        return false;
    }
}

Bytes TcpStream::recv_frame(Clock::time_point deadline) {
    auto frame = recv_exact(encap::kHeaderSize, deadline);
    const auto total = *encap::frame_size(frame);
    if (total > encap::kHeaderSize) {
        auto payload = recv_exact(total - encap::kHeaderSize, deadline);
        frame.insert(frame.end(), payload.begin(), payload.end());
    }
    return frame;
}

void TcpStream::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpStream::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
        port_ = other.port_;
    }
    return *this;
}

TcpListener TcpListener::bind(const std::string& address, std::uint16_t port) {
    TcpListener l;
    l.fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (l.fd_ < 0) throw ConnectionError(sys_error("socket"));
    const int one = 1;
    ::setsockopt(l.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, address.c_str(), &addr.sin_addr) != 1) {
        throw ConnectionError("bad bind address " + address);
    }
    if (::bind(l.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        throw ConnectionError(sys_error("bind " + address + ":" + std::to_string(port)));
    }
    if (::listen(l.fd_, 16) != 0) throw ConnectionError(sys_error("listen"));
    socklen_t len = sizeof addr;
    ::getsockname(l.fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    l.port_ = ntohs(addr.sin_port);
    return l;
}

std::optional<TcpStream> TcpListener::accept(std::chrono::milliseconds timeout) {
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc <= 0 || !(p.revents & POLLIN)) return std::nullopt;
    const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK);
    if (fd < 0) return std::nullopt;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return TcpStream(fd);
}

void TcpListener::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

}  // namespace eip::net
