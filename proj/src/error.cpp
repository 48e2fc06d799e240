#include "p2pvc/error.hpp"

namespace p2pvc {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::CycleDetected: return "CycleDetected";
    case ErrorKind::Disconnected: return "Disconnected";
    case ErrorKind::MissingSlack: return "MissingSlack";
    case ErrorKind::NonPositiveImpedance: return "NonPositiveImpedance";
    case ErrorKind::AlreadyPerUnit: return "AlreadyPerUnit";
    case ErrorKind::NotPerUnit: return "NotPerUnit";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::ComplexVoltage: return "ComplexVoltage";
    case ErrorKind::UnknownDer: return "UnknownDer";
    case ErrorKind::InvalidEpsilon: return "InvalidEpsilon";
    case ErrorKind::RatingExceeded: return "RatingExceeded";
    case ErrorKind::NodeSetMismatch: return "NodeSetMismatch";
    case ErrorKind::IsolatedAgent: return "IsolatedAgent";
    case ErrorKind::EmptyProfile: return "EmptyProfile";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::PowerFlowDiverged: return "PowerFlowDiverged";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    }
    return "Unknown";
}

bool is_numerical(ErrorKind kind) noexcept {
    return kind == ErrorKind::NonConvergence || kind == ErrorKind::PowerFlowDiverged ||
           kind == ErrorKind::ComplexVoltage;
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace p2pvc
