#pragma once

#include <stdexcept>
#include <string>

namespace semloc {

enum class ErrorKind {
    format,
    palette,
    io,
    duplicate_id,
    aspect,
    invalid_argument,
    shape,
    unknown_id,
    degenerate,
    config,
    numeric,
};

const char* to_string(ErrorKind kind);

/// Library-wide exception. `kind` lets callers (and the CLI) classify failures.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace semloc
