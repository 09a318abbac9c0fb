#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mzsim {

enum class ErrorKind {
    NonPositiveLength,
    NonPositiveInput,
    InvalidNetwork,
    UnknownNode,
    UnknownSegment,
    MirrorRemoved,
    NegativeDistance,
    ZeroProbabilityOutcome,
    ZeroWeight,
    NonTerminalState,
    UnknownTarget,
    NotRemovable,
    InvalidSchedule,
    NoFeasibleSchedule,
    UnknownScenario,
    ParseError,
    UnknownField,
    InvariantViolation,
    InvalidScenario,
    UnknownSession,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NonPositiveLength: return "NonPositiveLength";
    case ErrorKind::NonPositiveInput: return "NonPositiveInput";
    case ErrorKind::InvalidNetwork: return "InvalidNetwork";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::UnknownSegment: return "UnknownSegment";
    case ErrorKind::MirrorRemoved: return "MirrorRemoved";
    case ErrorKind::NegativeDistance: return "NegativeDistance";
    case ErrorKind::ZeroProbabilityOutcome: return "ZeroProbabilityOutcome";
    case ErrorKind::ZeroWeight: return "ZeroWeight";
    case ErrorKind::NonTerminalState: return "NonTerminalState";
    case ErrorKind::UnknownTarget: return "UnknownTarget";
    case ErrorKind::NotRemovable: return "NotRemovable";
    case ErrorKind::InvalidSchedule: return "InvalidSchedule";
    case ErrorKind::NoFeasibleSchedule: return "NoFeasibleSchedule";
    case ErrorKind::UnknownScenario: return "UnknownScenario";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownField: return "UnknownField";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::UnknownSession: return "UnknownSession";
    }
    return "Unknown";
}

} // namespace mzsim
