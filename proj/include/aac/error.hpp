#pragma once

#include <stdexcept>
#include <string>

namespace aac {

/// Failure category. Each maps onto a distinct CLI exit code.
enum class ErrorKind { config, data, numeric, schema };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Short machine-readable identifier, e.g. "bad_magic".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
    case ErrorKind::schema: return 5;
    }
    return 1;
}

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::schema: return "schema";
    }
    return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, std::string code, const std::string& message) {
    throw Error(kind, std::move(code), message);
}

} // namespace aac
