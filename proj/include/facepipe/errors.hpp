#pragma once

#include <stdexcept>
#include <string>

namespace facepipe {

/// Input or filesystem problem: missing/garbled files, unreachable services.
/// CLI maps these to exit code 1.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A remote client could not be reached or answered out of protocol at the
/// transport level. Subclass of IoError so unhandled transports exit as 1.
struct TransportError : IoError {
    explicit TransportError(const std::string& msg) : IoError(msg) {}
};

/// Violation of a documented precondition or data invariant.
/// CLI maps these to exit code 2.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace facepipe
