#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rmcov {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    NonFinite,
    DegenerateDesign,
    NonpositiveDiagonal,
    EigenFailure,
    MaxItersExceeded,
    InfeasibleSplit,
    NotPositiveDefinite,
    ParseError,
    EmptyInput,
    RaggedRow,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by correlation conversion; carries the offending diagonal indices.
class NonpositiveDiagonalError : public Error {
public:
    explicit NonpositiveDiagonalError(std::vector<std::size_t> indices);

    const std::vector<std::size_t>& indices() const noexcept { return indices_; }

private:
    std::vector<std::size_t> indices_;
};

} // namespace rmcov
