#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "p2pvc/grid_model.hpp"

namespace p2pvc {

/// Per-node complex power injection in pu, positive = generation into the
/// grid. The slack entry is ignored.
struct InjectionSet {
    std::vector<double> p;
    std::vector<double> q;

    static InjectionSet zeros(std::size_t n) { return {std::vector<double>(n), std::vector<double>(n)}; }
};

struct VoltageSolution {
    std::vector<double> magnitude;  // pu
    std::vector<double> angle;      // rad
    int iterations = 0;
    double residual = 0.0;  // max per-node complex voltage change in the last sweep
    /// Complex power delivered by the slack into the feeder, evaluated at the
    /// converged voltages.
    std::complex<double> slack_power;
    /// Series losses sum(Z |I|^2) at the converged voltages.
    std::complex<double> losses;
};

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 100;
};

/// Backward/forward sweep with constant-power injections from a flat start.
/// Throws Error(NonConvergence) when the iteration cap is hit.
VoltageSolution solve_bfs(const NetworkModel& network, const InjectionSet& injections,
                          const PowerFlowOptions& options = {});

/// Closed-form receiving-end voltage of a line fed from a 1 pu slack, where
/// (p, q) is the power the slack delivers into the line:
/// sqrt(1 - 2(rp + xq) + (r^2 + x^2)(p^2 + q^2)).
/// Throws Error(ComplexVoltage) if the radicand is negative.
double exact_two_bus_voltage(double r, double x, double p, double q);

}  // namespace p2pvc
