#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scopetree {

enum class ErrorKind {
    InvalidPath,
    InvalidArgument,
    UnknownTopic,
    DepthExceeded,
    Conflict,
    Format,
    SuiteInvalid,
    Transport,
    FixtureMiss,
    Configuration,
    Storage,
    NotFound,
    Load,
    IncompleteAnnotation,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (CLI exit
/// codes, HTTP status mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace scopetree
