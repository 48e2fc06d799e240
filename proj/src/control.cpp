#include "p2pvc/control.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "p2pvc/error.hpp"

namespace p2pvc {

CompensatorState make_compensator(const SensitivityMatrix& s, std::size_t der_column) {
    CompensatorState c;
    c.node = s.der_nodes.at(der_column);
    c.dv_dp.resize(s.node_count());
    c.dv_dq.resize(s.node_count());
    for (NodeIndex n = 0; n < s.node_count(); ++n) {
        c.dv_dp[n] = s.dv_dp(n, der_column);
        c.dv_dq[n] = s.dv_dq(n, der_column);
    }
    return c;
}

PowerPair raw_compensator_output(const CompensatorState& state, const LambdaVector& lambdas) {
    double price_p = 0.0;
    double price_q = 0.0;
    for (const auto& e : lambdas) {
        if (e.node >= state.dv_dp.size()) continue;
        const double net = e.lambda_min - e.lambda_max;
        price_p += net * state.dv_dp[e.node];
        price_q += net * state.dv_dq[e.node];
    }
    return {price_p / (2.0 * state.c_p), price_q / (2.0 * state.c_q)};
}

double reactive_capability(double s_rated, double p_now) {
    if (std::abs(p_now) > s_rated) {
        throw Error(ErrorKind::RatingExceeded, "active power " + std::to_string(p_now) +
                                                   " exceeds rating " + std::to_string(s_rated));
    }
    return std::sqrt(std::max(0.0, s_rated * s_rated - p_now * p_now));
}

Box reactive_box(const CompensatorState& state, double delta_p) {
    const double q_avail = reactive_capability(state.s_rated, state.p_setpoint_0 + delta_p);
    const Box capability{-q_avail - state.q_setpoint_0, q_avail - state.q_setpoint_0};
    Box box{std::max(state.delta_q_min, capability.lo), std::min(state.delta_q_max, capability.hi)};
    if (box.lo > box.hi) {
        // Static bounds lie outside the capability circle; the rating wins.
        box = capability;
        if (box.lo > box.hi) box.lo = box.hi = 0.5 * (box.lo + box.hi);
    }
    return box;
}

PowerPair compensator_update(CompensatorState& state, const LambdaVector& lambdas) {
    const auto raw = raw_compensator_output(state, lambdas);
    state.delta_p = Box{state.delta_p_min, state.delta_p_max}.clamp(raw.p);
    state.delta_q = reactive_box(state, state.delta_p).clamp(raw.q);
    return {state.delta_p, state.delta_q};
}

PowerPair apply_compensation(const CompensatorState& state) {
    return {state.p_setpoint_0 + state.delta_p, state.q_setpoint_0 + state.delta_q};
}

LagrangianState lagrangian_update(const LagrangianState& state, double v_measured) {
    LagrangianState next = state;
    next.lambda_max = std::max(state.lambda_max + state.alpha * (v_measured - state.v_max), 0.0);
    next.lambda_min = std::max(state.lambda_min + state.alpha * (state.v_min - v_measured), 0.0);
    next.version = state.version + 1;
    return next;
}

std::vector<double> linearized_voltages(const ControlSnapshot& snapshot,
                                        const std::vector<double>& delta_p,
                                        const std::vector<double>& delta_q) {
    std::vector<double> v = snapshot.v0;
    for (std::size_t d = 0; d < snapshot.compensators.size(); ++d) {
        const auto& c = snapshot.compensators[d];
        for (NodeIndex n = 0; n < v.size(); ++n) {
            v[n] += c.dv_dp[n] * delta_p[d] + c.dv_dq[n] * delta_q[d];
        }
    }
    return v;
}

namespace {

using Observer = std::function<void(const LambdaVector& previous, const LambdaVector& next)>;

CentralizedResult dual_ascent(const ControlSnapshot& snapshot, const CentralizedOptions& options,
                              const Observer& observe) {
    const std::size_t n = snapshot.v0.size();
    const std::size_t der_count = snapshot.compensators.size();
    for (const auto& c : snapshot.compensators) {
        if (c.dv_dp.size() != n || c.dv_dq.size() != n) {
            throw Error(ErrorKind::InvalidScenario, "compensator sensitivities do not match v0");
        }
    }
    auto compensators = snapshot.compensators;
    LambdaVector lambdas = make_lambda_vector(n);
    std::vector<LagrangianState> agents(n);
    for (NodeIndex i = 0; i < n; ++i) {
        agents[i] = {i, 0.0, 0.0, snapshot.alpha, snapshot.v_min, snapshot.v_max, 0};
    }

    CentralizedResult result;
    result.delta_p.resize(der_count);
    result.delta_q.resize(der_count);
    auto respond = [&] {
        for (std::size_t d = 0; d < der_count; ++d) {
            const auto out = compensator_update(compensators[d], lambdas);
            result.delta_p[d] = out.p;
            result.delta_q[d] = out.q;
        }
    };

    respond();
    for (long it = 1; it <= options.max_iterations; ++it) {
        const auto v = linearized_voltages(snapshot, result.delta_p, result.delta_q);
        LambdaVector next = lambdas;
        double change = 0.0;
        for (NodeIndex i = 0; i < n; ++i) {
            agents[i] = lagrangian_update(agents[i], v[i]);
            next[i] = {i, agents[i].lambda_max, agents[i].lambda_min, agents[i].version};
            change = std::max({change, std::abs(next[i].lambda_max - lambdas[i].lambda_max),
                               std::abs(next[i].lambda_min - lambdas[i].lambda_min)});
        }
        if (observe) observe(lambdas, next);
        lambdas = std::move(next);
        respond();
        result.iterations = it;
        if (!std::isfinite(change)) break;
        if (change <= options.tolerance) {
            result.converged = true;
            break;
        }
    }

    result.lambda_max.resize(n);
    result.lambda_min.resize(n);
    for (NodeIndex i = 0; i < n; ++i) {
        result.lambda_max[i] = lambdas[i].lambda_max;
        result.lambda_min[i] = lambdas[i].lambda_min;
    }
    result.v_linear = linearized_voltages(snapshot, result.delta_p, result.delta_q);
    return result;
}

}  // namespace

CentralizedResult centralized_solve(const ControlSnapshot& snapshot,
                                    const CentralizedOptions& options) {
    return dual_ascent(snapshot, options, {});
}

KktReport kkt_report(const ControlSnapshot& snapshot, const CentralizedResult& result) {
    KktReport report;
    report.min_multiplier = 0.0;
    bool first = true;
    for (NodeIndex i = 0; i < result.v_linear.size(); ++i) {
        const double over = result.v_linear[i] - snapshot.v_max;
        const double under = snapshot.v_min - result.v_linear[i];
        report.max_complementarity =
            std::max({report.max_complementarity, result.lambda_max[i] * std::abs(over),
                      result.lambda_min[i] * std::abs(under)});
        report.max_primal_violation = std::max({report.max_primal_violation, over, under});
        const double lo = std::min(result.lambda_max[i], result.lambda_min[i]);
        report.min_multiplier = first ? lo : std::min(report.min_multiplier, lo);
        first = false;
    }
    return report;
}

bool converges_monotonically(const ControlSnapshot& snapshot, const CentralizedOptions& options) {
    // Monotone here means no oscillation: the step norm never grows and no
    // multiplier reverses direction on two consecutive sweeps. A single
    // reversal is legitimate when a neighbour's correction relieves a node.
    constexpr double ignore = 1e-12;
    const std::size_t n = snapshot.v0.size();
    std::vector<int> last(2 * n, 0);
    std::vector<bool> reversed(2 * n, false);
    double prev_norm = -1.0;
    bool monotone = true;
    auto track = [&](std::size_t k, double step) {
        const int s = std::abs(step) <= ignore ? 0 : (step > 0 ? 1 : -1);
        const bool flip = s != 0 && last[k] != 0 && s != last[k];
        if (flip && reversed[k]) monotone = false;
        reversed[k] = flip;
        last[k] = s;
    };
    const auto result = dual_ascent(snapshot, options, [&](const LambdaVector& prev, const LambdaVector& next) {
        double norm = 0.0;
        for (NodeIndex i = 0; i < n; ++i) {
            const double up = next[i].lambda_max - prev[i].lambda_max;
            const double down = next[i].lambda_min - prev[i].lambda_min;
            track(2 * i, up);
            track(2 * i + 1, down);
            norm += up * up + down * down;
        }
        norm = std::sqrt(norm);
        if (prev_norm >= 0.0 && norm > prev_norm * (1.0 + 1e-9) + ignore) monotone = false;
        prev_norm = norm;
    });
    return monotone && result.converged && result.iterations > 1;
}

double calibrate_alpha(ControlSnapshot snapshot, double relative_precision,
                       const CentralizedOptions& options) {
    const bool active = std::any_of(snapshot.v0.begin(), snapshot.v0.end(), [&](double v) {
        return v < snapshot.v_min || v > snapshot.v_max;
    });
    if (!active) throw Error(ErrorKind::InvalidScenario, "calibration snapshot has no active voltage constraint");
    auto ok = [&](double alpha) {
        snapshot.alpha = alpha;
        return converges_monotonically(snapshot, options);
    };
    double lo = 1.0;
    double hi = 1.0;
    if (ok(1.0)) {
        int guard = 0;
        while (ok(hi *= 2.0)) {
            lo = hi;
            if (++guard > 60) throw Error(ErrorKind::NonConvergence, "step size is unbounded");
        }
    } else {
        int guard = 0;
        while (!ok(lo *= 0.5)) {
            hi = lo;
            if (++guard > 60) {
                throw Error(ErrorKind::NonConvergence, "no stable step size found");
            }
        }
    }
    while ((hi - lo) > relative_precision * lo) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace p2pvc
