#include <doctest.h>

#include <cmath>
#include <complex>

#include "p2pvc/error.hpp"
#include "p2pvc/powerflow.hpp"
#include "support.hpp"

using namespace p2pvc;
using namespace p2pvc::test;
using cd = std::complex<double>;

namespace {

std::vector<cd> phasors(const VoltageSolution& s) {
    std::vector<cd> v;
    for (std::size_t i = 0; i < s.magnitude.size(); ++i) v.push_back(std::polar(s.magnitude[i], s.angle[i]));
    return v;
}

InjectionSet two_bus_injection(double p, double q) {
    auto inj = InjectionSet::zeros(2);
    inj.p[1] = p;
    inj.q[1] = q;
    return inj;
}

}  // namespace

TEST_CASE("zero injections give a flat profile") {
    const auto net = load_network_file(scenario_dir() / "feeder20.json");
    const auto sol = solve_bfs(to_per_unit(net), InjectionSet::zeros(net.size()));
    for (std::size_t i = 0; i < net.size(); ++i) {
        CHECK(sol.magnitude[i] == 1.0);
        CHECK(sol.angle[i] == 0.0);
    }
    CHECK(sol.residual <= 1e-8);
}

TEST_CASE("closed form values") {
    CHECK(exact_two_bus_voltage(0.0, 0.0, 0.0, 0.0) == 1.0);
    CHECK(exact_two_bus_voltage(0.3, 0.1, 0.0, 0.0) == 1.0);
    // 1 - 2(0.05*0.2) + (0.0025 + 0.0009) * 0.04 = 0.980136
    CHECK(exact_two_bus_voltage(0.05, 0.03, 0.2, 0.0) == doctest::Approx(std::sqrt(0.980136)).epsilon(1e-14));
    CHECK(exact_two_bus_voltage(1.0, 0.0, 0.5, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(exact_two_bus_voltage(0.1, 0.1, std::nan(""), 0.0), Error);
}

TEST_CASE("two-bus sweep matches the closed form at the sending-end power") {
    const auto net = two_bus(0.05, 0.03);
    for (double p : {0.2, -0.2}) {
        const auto sol = solve_bfs(net, two_bus_injection(p, 0.0));
        const double exact = exact_two_bus_voltage(0.05, 0.03, sol.slack_power.real(), sol.slack_power.imag());
        CHECK(std::abs(sol.magnitude[1] - exact) <= 1e-8);
        if (p > 0) {
            CHECK(sol.magnitude[1] > 1.0);
        } else {
            CHECK(sol.magnitude[1] < 1.0);
        }
    }
}

TEST_CASE("randomized two-bus oracle equivalence") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const double r = uniform(rng, 1e-4, 0.1);
        const double x = uniform(rng, 1e-4, 0.1);
        const double p = uniform(rng, -0.5, 0.5);
        const double q = uniform(rng, -0.5, 0.5);
        const auto sol = solve_bfs(two_bus(r, x), two_bus_injection(p, q));
        const double exact = exact_two_bus_voltage(r, x, sol.slack_power.real(), sol.slack_power.imag());
        REQUIRE(std::abs(sol.magnitude[1] - exact) <= 1e-8);
    }
}

TEST_CASE("slack is pinned and power balances including losses") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto net = random_tree(rng, 3 + rng.below(20), 0.03);
        auto inj = InjectionSet::zeros(net.size());
        for (std::size_t i = 1; i < net.size(); ++i) {
            inj.p[i] = uniform(rng, -0.05, 0.05);
            inj.q[i] = uniform(rng, -0.03, 0.03);
        }
        const auto sol = solve_bfs(net, inj);
        CHECK(sol.magnitude[net.slack()] == net.v_nom_pu());
        CHECK(sol.angle[net.slack()] == 0.0);
        CHECK(sol.residual <= 1e-8);

        // Rebuild branch flows from the voltages alone.
        const auto v = phasors(sol);
        cd losses{}, slack{};
        for (const auto& b : net.branches()) {
            const cd z(b.resistance, b.reactance);
            const cd i = (v[b.from] - v[b.to]) / z;
            losses += z * std::norm(i);
            if (b.from == net.slack()) slack += v[b.from] * std::conj(i);
        }
        double net_load_p = 0.0, net_load_q = 0.0;
        for (std::size_t i = 1; i < net.size(); ++i) {
            net_load_p -= inj.p[i];
            net_load_q -= inj.q[i];
        }
        CHECK(std::abs(slack.real() - (net_load_p + losses.real())) <= 10 * 1e-8);
        CHECK(std::abs(slack.imag() - (net_load_q + losses.imag())) <= 10 * 1e-8);
        CHECK(std::abs(sol.slack_power - slack) <= 10 * 1e-8);
        CHECK(std::abs(sol.losses - losses) <= 10 * 1e-8);
    }
}

TEST_CASE("more load on a line lowers its end voltage") {
    const auto net = chain_pu({0.01, 0.02, 0.015, 0.01}, {0.004, 0.006, 0.005, 0.003});
    double previous = 2.0;
    for (int k = 0; k <= 20; ++k) {
        auto inj = InjectionSet::zeros(net.size());
        inj.p[4] = -0.02 * k;
        const double v = solve_bfs(net, inj).magnitude[4];
        CHECK(v < previous);
        previous = v;
    }
}

TEST_CASE("infeasible loading reports non-convergence") {
    const auto net = two_bus(0.1, 0.05);
    try {
        solve_bfs(net, two_bus_injection(-5.0, 0.0));
        FAIL("expected NonConvergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonConvergence);
    }
}

TEST_CASE("light feeder converges in few sweeps") {
    const auto net = to_per_unit(load_network_file(scenario_dir() / "feeder20.json"));
    auto inj = InjectionSet::zeros(net.size());
    for (std::size_t i = 1; i < net.size(); ++i) inj.p[i] = -0.02;
    const auto sol = solve_bfs(net, inj);
    CHECK(sol.iterations < 10);
}
