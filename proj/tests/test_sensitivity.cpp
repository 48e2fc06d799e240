#include <doctest.h>

#include <cmath>

#include "p2pvc/error.hpp"
#include "p2pvc/powerflow.hpp"
#include "p2pvc/sensitivity.hpp"
#include "support.hpp"

using namespace p2pvc;
using namespace p2pvc::test;

TEST_CASE("two-node sensitivities are the branch impedance") {
    const auto net = two_bus(0.04, 0.02);
    const std::vector<NodeIndex> ders{1};
    const auto s = sensitivity_matrix(net, ders);
    CHECK(s.dv_dp(1, 0) == doctest::Approx(0.04));
    CHECK(s.dv_dq(1, 0) == doctest::Approx(0.02));
    CHECK(s.dv_dp(0, 0) == 0.0);
    CHECK(s.dv_dq(0, 0) == 0.0);
}

TEST_CASE("nominal voltage scales the entries") {
    const auto net = tree_pu({0, 0}, {0, 0.04}, {0, 0.02}, 1.02);
    const std::vector<NodeIndex> ders{1};
    CHECK(sensitivity_matrix(net, ders).dv_dp(1, 0) == doctest::Approx(0.04 / 1.02));
}

TEST_CASE("unknown DER") {
    const auto net = two_bus(0.04, 0.02);
    const std::vector<NodeIndex> ders{5};
    CHECK_THROWS_AS(sensitivity_matrix(net, ders), Error);
}

TEST_CASE("two-bus finite differences at zero injection") {
    const auto net = two_bus(0.04, 0.02);
    const auto col = finite_difference_sensitivity(net, InjectionSet::zeros(2), 1, 1e-4);
    CHECK(std::abs(col.dv_dp[1] - 0.04) <= 1e-4);
    CHECK(std::abs(col.dv_dq[1] - 0.02) <= 1e-4);
    CHECK(col.dv_dp[0] == 0.0);
}

TEST_CASE("degenerate epsilon") {
    const auto net = two_bus(0.04, 0.02);
    for (double eps : {0.0, -1e-4}) {
        try {
            finite_difference_sensitivity(net, InjectionSet::zeros(2), 1, eps);
            FAIL("expected InvalidEpsilon");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidEpsilon);
        }
    }
}

TEST_CASE("linearization degrades under heavy load") {
    const auto net = two_bus(0.04, 0.02);
    auto heavy = InjectionSet::zeros(2);
    heavy.p[1] = -0.4;
    const auto light = finite_difference_sensitivity(net, InjectionSet::zeros(2), 1);
    const auto loaded = finite_difference_sensitivity(net, heavy, 1);
    CHECK(std::abs(loaded.dv_dp[1] - 0.04) > std::abs(light.dv_dp[1] - 0.04));
    CHECK(std::abs(loaded.dv_dp[1] - 0.04) > 1e-4);
}

TEST_CASE("laterals sharing a trunk agree with the oracle") {
    const auto net = tree_pu({0, 0, 1, 1}, {0, 0.02, 0.03, 0.04}, {0, 0.01, 0.01, 0.01});
    const std::vector<NodeIndex> ders{2};
    const auto s = sensitivity_matrix(net, ders);
    CHECK(s.dv_dp(3, 0) == doctest::Approx(0.02));
    const auto col = finite_difference_sensitivity(net, InjectionSet::zeros(4), 2);
    CHECK(std::abs(col.dv_dp[3] - 0.02) <= 1e-6);
    CHECK(std::abs(col.dv_dq[3] - 0.01) <= 1e-6);
}

TEST_CASE("bundled feeder sensitivities within 5% of finite differences") {
    const auto net = to_per_unit(load_network_file(scenario_dir() / "feeder20.json"));
    const auto ders = net.der_nodes();
    const auto s = sensitivity_matrix(net, ders);
    for (std::size_t d = 0; d < ders.size(); ++d) {
        const auto col = finite_difference_sensitivity(net, InjectionSet::zeros(net.size()), ders[d]);
        for (NodeIndex n = 0; n < net.size(); ++n) {
            CHECK(std::abs(s.dv_dp(n, d) - col.dv_dp[n]) / std::max(s.dv_dp(n, d), 1e-6) <= 0.05);
            CHECK(std::abs(s.dv_dq(n, d) - col.dv_dq[n]) / std::max(s.dv_dq(n, d), 1e-6) <= 0.05);
        }
    }
}

TEST_CASE("symmetry and nonnegativity on random trees") {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const auto net = random_tree(rng, 2 + rng.below(25));
        std::vector<NodeIndex> all(net.size());
        for (NodeIndex i = 0; i < net.size(); ++i) all[i] = i;
        const auto s = sensitivity_matrix(net, all);
        for (NodeIndex n = 0; n < net.size(); ++n) {
            CHECK(s.dv_dp(net.slack(), n) == 0.0);
            for (NodeIndex d = 0; d < net.size(); ++d) {
                CHECK(s.dv_dp(n, d) == s.dv_dp(d, n));
                CHECK(s.dv_dq(n, d) == s.dv_dq(d, n));
                CHECK(s.dv_dp(n, d) >= 0.0);
                CHECK(s.dv_dq(n, d) >= 0.0);
            }
        }
    }
}
