#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "p2pvc/grid_model.hpp"
#include "p2pvc/rng.hpp"

namespace p2pvc::test {

inline std::filesystem::path scenario_dir() { return P2PVC_SCENARIO_DIR; }
inline std::filesystem::path data_dir() { return P2PVC_TEST_DATA_DIR; }

/// Per-unit radial network from a parent list (parent[0] ignored, node 0 is
/// the slack) and per-branch impedances for nodes 1..n-1.
inline NetworkModel tree_pu(const std::vector<std::size_t>& parent, const std::vector<double>& r,
                            const std::vector<double>& x, double v_nom = 1.0) {
    std::vector<Node> nodes(parent.size());
    std::vector<Branch> branches;
    for (std::size_t i = 0; i < parent.size(); ++i) {
        nodes[i].name = std::to_string(i);
        nodes[i].kind = i == 0 ? NodeKind::Slack : NodeKind::Load;
        if (i > 0) branches.push_back({parent[i], i, r[i], x[i]});
    }
    return NetworkModel(std::move(nodes), std::move(branches), 1.0, 1.0, v_nom, true);
}

/// Series chain 0-1-...-n with the given branch impedances.
inline NetworkModel chain_pu(const std::vector<double>& r, const std::vector<double>& x) {
    std::vector<std::size_t> parent(r.size() + 1);
    std::vector<double> rr(r.size() + 1), xx(x.size() + 1);
    for (std::size_t i = 1; i <= r.size(); ++i) {
        parent[i] = i - 1;
        rr[i] = r[i - 1];
        xx[i] = x[i - 1];
    }
    return tree_pu(parent, rr, xx);
}

inline NetworkModel two_bus(double r, double x) { return chain_pu({r}, {x}); }

/// Random recursive tree: node i attaches to a uniformly chosen earlier node.
inline NetworkModel random_tree(Rng& rng, std::size_t n, double z_max = 0.05) {
    std::vector<std::size_t> parent(n);
    std::vector<double> r(n), x(n);
    for (std::size_t i = 1; i < n; ++i) {
        parent[i] = rng.below(i);
        r[i] = z_max * (0.05 + 0.95 * rng.uniform());
        x[i] = z_max * rng.uniform();
    }
    return tree_pu(parent, r, x);
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace p2pvc::test
