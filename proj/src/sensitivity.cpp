#include "p2pvc/sensitivity.hpp"

#include <cmath>
#include <string>

#include "p2pvc/error.hpp"

namespace p2pvc {

SensitivityMatrix sensitivity_matrix(const NetworkModel& network,
                                     std::span<const NodeIndex> der_nodes) {
    const std::size_t n = network.size();
    SensitivityMatrix s{Matrix(n, der_nodes.size()), Matrix(n, der_nodes.size()),
                        std::vector<NodeIndex>(der_nodes.begin(), der_nodes.end())};
    for (std::size_t d = 0; d < der_nodes.size(); ++d) {
        if (der_nodes[d] >= n) {
            throw Error(ErrorKind::UnknownDer,
                        "DER node index " + std::to_string(der_nodes[d]) + " does not exist");
        }
    }
    const double v_nom = network.v_nom_pu();
    for (NodeIndex node = 0; node < n; ++node) {
        for (std::size_t d = 0; d < der_nodes.size(); ++d) {
            const auto z = path_impedance(network, node, der_nodes[d]);
            s.dv_dp(node, d) = z.r / v_nom;
            s.dv_dq(node, d) = z.x / v_nom;
        }
    }
    return s;
}

SensitivityColumn finite_difference_sensitivity(const NetworkModel& network,
                                                const InjectionSet& operating_point,
                                                NodeIndex der, double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw Error(ErrorKind::InvalidEpsilon, "epsilon must be positive and finite");
    }
    if (der >= network.size()) {
        throw Error(ErrorKind::UnknownDer, "DER node index " + std::to_string(der) + " does not exist");
    }
    const std::size_t n = network.size();
    auto central = [&](std::vector<double> InjectionSet::*component) {
        InjectionSet up = operating_point;
        InjectionSet down = operating_point;
        (up.*component)[der] += epsilon;
        (down.*component)[der] -= epsilon;
        const auto vu = solve_bfs(network, up);
        const auto vd = solve_bfs(network, down);
        std::vector<double> col(n);
        for (NodeIndex i = 0; i < n; ++i) {
            col[i] = (vu.magnitude[i] - vd.magnitude[i]) / (2.0 * epsilon);
        }
        return col;
    };
    return {central(&InjectionSet::p), central(&InjectionSet::q)};
}

}  // namespace p2pvc
