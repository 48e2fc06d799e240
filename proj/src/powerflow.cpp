#include "p2pvc/powerflow.hpp"

#include <cmath>
#include <string>

#include "p2pvc/error.hpp"

namespace p2pvc {

namespace {

using cplx = std::complex<double>;

struct Sweep {
    std::vector<cplx> load_current;
    std::vector<cplx> branch_current;  // indexed by child node
};

// Currents drawn at each node, aggregated leaf->root.
void backward(const NetworkModel& net, const InjectionSet& inj, const std::vector<cplx>& v,
              Sweep& s) {
    const auto& order = net.order();
    for (NodeIndex n : order) {
        const cplx consumed(-inj.p[n], -inj.q[n]);
        s.load_current[n] = n == net.slack() ? cplx{} : std::conj(consumed / v[n]);
        s.branch_current[n] = s.load_current[n];
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const NodeIndex n = *it;
        if (n == net.slack()) continue;
        s.branch_current[net.parent(n)] += s.branch_current[n];
    }
}

}  // namespace

VoltageSolution solve_bfs(const NetworkModel& network, const InjectionSet& injections,
                          const PowerFlowOptions& options) {
    if (!network.is_per_unit()) {
        throw Error(ErrorKind::NotPerUnit, "solve_bfs requires a per-unit network");
    }
    const std::size_t n = network.size();
    if (injections.p.size() != n || injections.q.size() != n) {
        throw Error(ErrorKind::InvalidScenario, "injection set does not cover every node");
    }
    for (NodeIndex i = 0; i < n; ++i) {
        if (!std::isfinite(injections.p[i]) || !std::isfinite(injections.q[i])) {
            throw Error(ErrorKind::InvalidScenario, "non-finite injection at node " +
                                                        network.nodes()[i].name);
        }
    }

    const cplx v_slack(network.v_nom_pu(), 0.0);
    std::vector<cplx> v(n, v_slack);
    Sweep sweep{std::vector<cplx>(n), std::vector<cplx>(n)};
    const auto& branches = network.branches();

    VoltageSolution sol;
    bool converged = false;
    for (int it = 1; it <= options.max_iterations; ++it) {
        backward(network, injections, v, sweep);
        double residual = 0.0;
        for (NodeIndex node : network.order()) {
            if (node == network.slack()) continue;
            const auto& br = branches[network.parent_branch(node)];
            const cplx next = v[network.parent(node)] -
                              cplx(br.resistance, br.reactance) * sweep.branch_current[node];
            residual = std::max(residual, std::abs(next - v[node]));
            v[node] = next;
        }
        sol.iterations = it;
        sol.residual = residual;
        if (!std::isfinite(residual)) break;
        if (residual <= options.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw Error(ErrorKind::NonConvergence,
                    "backward/forward sweep did not converge in " +
                        std::to_string(options.max_iterations) + " iterations (residual " +
                        std::to_string(sol.residual) + ")");
    }

    backward(network, injections, v, sweep);
    cplx feeder_current{};
    cplx losses{};
    for (NodeIndex node = 0; node < n; ++node) {
        if (node == network.slack()) continue;
        const auto& br = branches[network.parent_branch(node)];
        const cplx j = sweep.branch_current[node];
        losses += cplx(br.resistance, br.reactance) * std::norm(j);
        if (network.parent(node) == network.slack()) feeder_current += j;
    }
    sol.slack_power = v_slack * std::conj(feeder_current);
    sol.losses = losses;

    sol.magnitude.resize(n);
    sol.angle.resize(n);
    for (NodeIndex i = 0; i < n; ++i) {
        sol.magnitude[i] = std::abs(v[i]);
        sol.angle[i] = std::arg(v[i]);
    }
    sol.magnitude[network.slack()] = network.v_nom_pu();
    sol.angle[network.slack()] = 0.0;
    return sol;
}

double exact_two_bus_voltage(double r, double x, double p, double q) {
    const double radicand = 1.0 - 2.0 * (r * p + x * q) + (r * r + x * x) * (p * p + q * q);
    if (!(radicand >= 0.0)) {
        throw Error(ErrorKind::ComplexVoltage, "negative radicand " + std::to_string(radicand));
    }
    return std::sqrt(radicand);
}

}  // namespace p2pvc
