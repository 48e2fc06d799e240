#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace p2pvc {

enum class ErrorKind {
    // grid_model
    ParseError,
    CycleDetected,
    Disconnected,
    MissingSlack,
    NonPositiveImpedance,
    AlreadyPerUnit,
    NotPerUnit,
    UnknownNode,
    // powerflow
    NonConvergence,
    ComplexVoltage,
    // sensitivity
    UnknownDer,
    InvalidEpsilon,
    // control
    RatingExceeded,
    // gossip
    NodeSetMismatch,
    IsolatedAgent,
    // sim
    EmptyProfile,
    InvalidScenario,
    PowerFlowDiverged,
    IoError,
    // cli
    SchemaMismatch,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for failures of the numerics rather than of the inputs.
bool is_numerical(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace p2pvc
