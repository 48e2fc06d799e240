#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "p2pvc/control.hpp"
#include "p2pvc/powerflow.hpp"
#include "p2pvc/scenario.hpp"

namespace p2pvc {

/// One 1 Hz sample of the closed loop. Per-DER vectors follow Scenario::ders,
/// per-node vectors follow the network's node order.
struct SampleRow {
    double time_s = 0.0;
    std::vector<double> v;
    std::vector<double> delta_p;
    std::vector<double> delta_q;
    std::vector<double> lambda_min;
    std::vector<double> lambda_max;
    std::vector<double> p;  // applied DER active power
    std::vector<double> q;  // applied DER reactive power
    std::vector<double> p_net;  // net active injection per node
};

struct RunSummary {
    std::vector<double> violation_seconds;  // per node, samples outside [v_min, v_max]
    double max_abs_delta_q = 0.0;
    double max_abs_delta_p = 0.0;
    std::uint64_t messages_sent = 0;
    std::uint64_t messages_dropped = 0;
    std::uint64_t power_flow_solves = 0;
    double min_lambda = 0.0;             // over every multiplier update of the run
    double max_capability_excess = 0.0;  // max of P^2 + Q^2 - S^2 over every DER update
    std::vector<double> s_rated;         // per DER
};

struct TimeSeriesResult {
    std::vector<std::string> node_names;
    std::vector<std::string> der_names;
    std::vector<SampleRow> rows;
    RunSummary summary;
};

struct SimulationOptions {
    /// Delivery trace sink: one `time_ms,sender,receiver,node_id,lambda_min,
    /// lambda_max,version` row per delivered entry.
    std::ostream* trace = nullptr;
    /// When set, events sharing a timestamp and priority are ordered by a
    /// seeded random key instead of insertion order.
    std::optional<std::uint64_t> tie_shuffle_seed;
};

/// Runs the closed loop. Throws Error(PowerFlowDiverged) with the simulated
/// time if a physics refresh fails, Error(InvalidScenario) for bad input.
TimeSeriesResult run_simulation(const Scenario& scenario, const SimulationOptions& options = {});

/// Network injections at absolute time t_s with all DER deltas zero.
InjectionSet base_injections(const Scenario& scenario, double t_s);

/// Compensators with setpoints and bounds at time t_s and zero deltas.
std::vector<CompensatorState> compensators_at(const Scenario& scenario, double t_s);

/// Snapshot whose v0 is the uncontrolled power flow at t_s.
ControlSnapshot uncontrolled_snapshot(const Scenario& scenario, double t_s);

/// Snapshot linearized at a sampled closed-loop state: v0 is the measured
/// voltage minus the linear-model contribution of the applied deltas, so the
/// linear model reproduces the measured voltages at those deltas.
ControlSnapshot tangent_snapshot(const Scenario& scenario, const SampleRow& row);

/// Time (absolute seconds, on a 60 s grid) of the largest uncontrolled limit
/// violation, or nullopt if the uncontrolled run never leaves the limits.
std::optional<double> worst_violation_time(const Scenario& scenario, double grid_s = 60.0);

/// True if the DER boxes can bring every linearized voltage inside the
/// limits. Snapshots with violations on both sides are reported as false.
bool correctable(const ControlSnapshot& snapshot);

/// Time of the largest uncontrolled violation that is still correctable.
std::optional<double> calibration_time(const Scenario& scenario, double grid_s = 60.0);

/// Calibrates alpha on the snapshot at calibration_time.
double calibrate_scenario_alpha(const Scenario& scenario);

}  // namespace p2pvc
