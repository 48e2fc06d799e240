#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "p2pvc/grid_model.hpp"
#include "p2pvc/powerflow.hpp"

namespace p2pvc {

/// Row-major N x D matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Linear voltage model |V_n| ~ V_n0 + dv_dp(n,d) dP_d + dv_dq(n,d) dQ_d with
/// dv_dp = r_nd / V_nom and dv_dq = x_nd / V_nom. Rows are all network nodes,
/// columns the DERs in the order given at construction.
struct SensitivityMatrix {
    Matrix dv_dp;
    Matrix dv_dq;
    std::vector<NodeIndex> der_nodes;  // column -> node

    std::size_t node_count() const noexcept { return dv_dp.rows(); }
    std::size_t der_count() const noexcept { return der_nodes.size(); }
};

/// Throws Error(UnknownDer) if a DER node index is out of range.
SensitivityMatrix sensitivity_matrix(const NetworkModel& network,
                                     std::span<const NodeIndex> der_nodes);

struct SensitivityColumn {
    std::vector<double> dv_dp;  // one entry per node
    std::vector<double> dv_dq;
};

/// Central differences of solve_bfs magnitudes with respect to the active
/// and reactive injection at `der`. Throws InvalidEpsilon for epsilon <= 0
/// and propagates NonConvergence.
SensitivityColumn finite_difference_sensitivity(const NetworkModel& network,
                                                const InjectionSet& operating_point,
                                                NodeIndex der, double epsilon = 1e-4);

}  // namespace p2pvc
