#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace eip {

/// Base of every error thrown by the stack.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bytes on the wire did not match the expected layout.
class DecodeError : public Error {
public:
    using Error::Error;
};

/// A value or argument violates a documented precondition.
class UsageError : public Error {
public:
    using Error::Error;
};

/// TCP-level failure: refused, reset, closed by peer.
class ConnectionError : public Error {
public:
    using Error::Error;
};

/// No reply within the request timeout.
class TimeoutError : public Error {
public:
    using Error::Error;
};

/// Nonzero status in an encapsulation header.
class SessionError : public Error {
public:
    SessionError(std::uint32_t status, const std::string& what)
        : Error(what), status_(status) {}

    std::uint32_t status() const noexcept { return status_; }

private:
    std::uint32_t status_;
};

/// Nonzero CIP general status in a reply.
class CipError : public Error {
public:
    CipError(std::uint8_t general, std::vector<std::uint16_t> extended, const std::string& what);

    std::uint8_t general_status() const noexcept { return general_; }
    const std::vector<std::uint16_t>& extended_status() const noexcept { return extended_; }

private:
    std::uint8_t general_;
    std::vector<std::uint16_t> extended_;
};

}  // namespace eip
