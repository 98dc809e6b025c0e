#include "rmcov/error.hpp"

#include <sstream>

namespace rmcov {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::NonpositiveDiagonal: return "NonpositiveDiagonal";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::InfeasibleSplit: return "InfeasibleSplit";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

std::string describe_indices(const std::vector<std::size_t>& indices) {
    std::ostringstream out;
    out << "nonpositive diagonal at indices [";
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (k > 0) out << ", ";
        out << indices[k];
    }
    out << "]";
    return out.str();
}

} // namespace

NonpositiveDiagonalError::NonpositiveDiagonalError(std::vector<std::size_t> indices)
    : Error(ErrorCode::NonpositiveDiagonal, describe_indices(indices)), indices_(std::move(indices)) {}

} // namespace rmcov
