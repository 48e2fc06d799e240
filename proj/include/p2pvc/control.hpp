#pragma once

#include <cstdint>
#include <vector>

#include "p2pvc/gossip.hpp"
#include "p2pvc/grid_model.hpp"
#include "p2pvc/sensitivity.hpp"

namespace p2pvc {

struct PowerPair {
    double p = 0.0;
    double q = 0.0;
};

/// Voltage-controlling agent at one DER. All powers in pu.
struct CompensatorState {
    NodeIndex node = 0;
    double c_p = 4.0;
    double c_q = 1.0;
    double p_setpoint_0 = 0.0;
    double q_setpoint_0 = 0.0;
    double delta_p_min = 0.0;
    double delta_p_max = 0.0;
    double delta_q_min = 0.0;
    double delta_q_max = 0.0;
    double s_rated = 0.0;
    double delta_p = 0.0;
    double delta_q = 0.0;
    // Sensitivity of every node's voltage to this DER (one column of the
    // SensitivityMatrix).
    std::vector<double> dv_dp;
    std::vector<double> dv_dq;
};

/// Builds a compensator whose sensitivity rows are column `der_column` of s.
CompensatorState make_compensator(const SensitivityMatrix& s, std::size_t der_column);

struct Box {
    double lo = 0.0;
    double hi = 0.0;
    double clamp(double v) const noexcept { return v < lo ? lo : (v > hi ? hi : v); }
};

/// Unclamped stationary point of the per-DER Lagrangian for fixed multipliers:
///   dP = 1/(2 c_p) sum_n (lmin_n - lmax_n) dv_dp(n)
///   dQ = 1/(2 c_q) sum_n (lmin_n - lmax_n) dv_dq(n)
/// Nodes absent from `lambdas` contribute zero.
PowerPair raw_compensator_output(const CompensatorState& state, const LambdaVector& lambdas);

/// sqrt(s_rated^2 - p_now^2). Throws Error(RatingExceeded) if |p_now| > s_rated.
double reactive_capability(double s_rated, double p_now);

/// Reactive box given the active delta already chosen: the static bounds
/// intersected with the inverter capability at p = p_setpoint_0 + delta_p.
Box reactive_box(const CompensatorState& state, double delta_p);

/// Raw output projected onto the DER's bounds; stores and returns the deltas.
PowerPair compensator_update(CompensatorState& state, const LambdaVector& lambdas);

/// Setpoint plus delta.
PowerPair apply_compensation(const CompensatorState& state);

/// Node-side agent owning one multiplier pair.
struct LagrangianState {
    NodeIndex node = 0;
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    double alpha = 1.0;
    double v_min = 0.95;
    double v_max = 1.05;
    std::uint64_t version = 0;
};

/// Projected dual ascent step on both multipliers; bumps the version.
LagrangianState lagrangian_update(const LagrangianState& state, double v_measured);

/// Inputs for the centralized reference solver.
struct ControlSnapshot {
    std::vector<double> v0;  // per-node voltage before the deltas, pu
    std::vector<CompensatorState> compensators;
    double v_min = 0.95;
    double v_max = 1.05;
    double alpha = 1.0;
};

struct CentralizedOptions {
    double tolerance = 1e-8;  // max |lambda change| over one sweep
    long max_iterations = 100'000;
};

struct CentralizedResult {
    std::vector<double> delta_p;  // per compensator
    std::vector<double> delta_q;
    std::vector<double> lambda_max;  // per node
    std::vector<double> lambda_min;
    std::vector<double> v_linear;  // linearized voltages at the returned point
    long iterations = 0;
    bool converged = false;
};

/// Linearized voltages v0 + sum_d dv_dp dP_d + dv_dq dQ_d.
std::vector<double> linearized_voltages(const ControlSnapshot& snapshot,
                                        const std::vector<double>& delta_p,
                                        const std::vector<double>& delta_q);

/// Synchronous dual ascent to a fixed point. Never throws on
/// non-convergence; the best (last) iterate is returned with converged=false.
CentralizedResult centralized_solve(const ControlSnapshot& snapshot,
                                    const CentralizedOptions& options = {});

struct KktReport {
    double max_complementarity = 0.0;  // max_n lambda * |constraint residual|
    double max_primal_violation = 0.0; // max_n positive part of the constraints
    double min_multiplier = 0.0;
};

KktReport kkt_report(const ControlSnapshot& snapshot, const CentralizedResult& result);

/// True if the centralized iteration converges and every multiplier moves
/// monotonically (its increments never change sign).
bool converges_monotonically(const ControlSnapshot& snapshot, const CentralizedOptions& options = {});

/// Largest step size for which converges_monotonically holds, by bracketing
/// and bisection to the given relative precision.
double calibrate_alpha(ControlSnapshot snapshot, double relative_precision = 1e-3,
                       const CentralizedOptions& options = {});

}  // namespace p2pvc
