#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pgnlm {

/// Broad failure classes. The CLI prints the category name on stderr so that
/// scripts can dispatch on it.
enum class ErrorCategory {
    Usage,
    Io,
    Format,
    Geometry,
    Calibration,
    Data,
};

constexpr std::string_view category_name(ErrorCategory c) noexcept {
    switch (c) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Format: return "format";
    case ErrorCategory::Geometry: return "geometry";
    case ErrorCategory::Calibration: return "calibration";
    case ErrorCategory::Data: return "data";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

} // namespace pgnlm
