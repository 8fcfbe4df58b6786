#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdbn {

enum class ErrorCode {
    // ingest
    MissingColumn,
    EmptyTable,
    DuplicateDate,
    EmptyIntersection,
    TooFewRows,
    FileNotFound,
    BadDate,
    // indicators
    TooShort,
    ZeroClose,
    InvalidConfig,
    // bn-core / dbn
    VariableMissing,
    IncompleteAssignment,
    ZeroProbabilityEvidence,
    WindowLengthMismatch,
    UnknownVariable,
    EvidenceOnQuery,
    SliceOutOfRange,
    InferenceTooLarge,
    BadModel,
    // backtest / baselines
    NoPositivePredictions,
    NonConvergence,
    DimensionMismatch,
};

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorCategory { Data, Convergence };

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::DuplicateDate: return "DuplicateDate";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::BadDate: return "BadDate";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ZeroClose: return "ZeroClose";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::VariableMissing: return "VariableMissing";
    case ErrorCode::IncompleteAssignment: return "IncompleteAssignment";
    case ErrorCode::ZeroProbabilityEvidence: return "ZeroProbabilityEvidence";
    case ErrorCode::WindowLengthMismatch: return "WindowLengthMismatch";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::EvidenceOnQuery: return "EvidenceOnQuery";
    case ErrorCode::SliceOutOfRange: return "SliceOutOfRange";
    case ErrorCode::InferenceTooLarge: return "InferenceTooLarge";
    case ErrorCode::BadModel: return "BadModel";
    case ErrorCode::NoPositivePredictions: return "NoPositivePredictions";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    }
    return "Unknown";
}

inline ErrorCategory category_of(ErrorCode code) {
    return code == ErrorCode::NonConvergence ? ErrorCategory::Convergence
                                             : ErrorCategory::Data;
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }
    ErrorCategory category() const noexcept { return category_of(code_); }

private:
    ErrorCode code_;
    std::string message_;
};

/// Re-throws `e` with a context prefix, keeping its code.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
    throw Error(e.code(), context + ": " + e.message());
}

} // namespace cdbn
