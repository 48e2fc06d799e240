#include <doctest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <queue>

#include "p2pvc/error.hpp"
#include "p2pvc/gossip.hpp"
#include "support.hpp"

using namespace p2pvc;
using namespace p2pvc::test;

namespace {

// Entries with equal (node, version) must be identical, as they would be if
// issued by a single owner; derive the values from the version.
LambdaVector random_vector(Rng& rng, std::size_t n, std::uint64_t max_version = 6) {
    auto v = make_lambda_vector(n);
    for (auto& e : v) {
        e.version = rng.below(max_version + 1);
        e.lambda_max = 0.25 * static_cast<double>(e.version * (e.node + 1));
        e.lambda_min = 0.5 * static_cast<double>(e.version);
    }
    return v;
}

// Every full binary bracketing of the given sequence.
std::vector<LambdaVector> all_groupings(const std::vector<LambdaVector>& xs, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return {xs[lo]};
    std::vector<LambdaVector> out;
    for (std::size_t mid = lo + 1; mid < hi; ++mid) {
        for (const auto& a : all_groupings(xs, lo, mid)) {
            for (const auto& b : all_groupings(xs, mid, hi)) out.push_back(merge(a, b));
        }
    }
    return out;
}

ErrorKind kind_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::ParseError;
}

}  // namespace

TEST_CASE("merge examples") {
    Rng rng(1);
    const auto x = random_vector(rng, 8);
    CHECK(merge(x, x) == x);

    auto local = make_lambda_vector(3);
    local[1] = {1, 0.2, 0.0, 3};
    auto incoming = make_lambda_vector(3);
    incoming[1] = {1, 0.7, 0.0, 5};
    incoming[2] = {2, 0.0, 0.0, 0};
    const auto merged = merge(local, incoming);
    CHECK(merged[1] == incoming[1]);
    CHECK(merged[0] == local[0]);
    CHECK(merged[2] == local[2]);

    // Equal versions keep the local entry.
    auto tie = local;
    tie[1].lambda_max = 9.0;
    CHECK(merge(local, tie)[1].lambda_max == 0.2);

    auto copy = local;
    CHECK(merge_into(copy, incoming));
    CHECK_FALSE(merge_into(copy, incoming));
}

TEST_CASE("merge rejects mismatched node sets") {
    const auto a = make_lambda_vector(3);
    CHECK(kind_of([&] { merge(a, make_lambda_vector(4)); }) == ErrorKind::NodeSetMismatch);
    auto b = make_lambda_vector(3);
    std::swap(b[0], b[1]);
    CHECK(kind_of([&] { merge(a, b); }) == ErrorKind::NodeSetMismatch);
}

TEST_CASE("merge orders and groupings of four vectors agree") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<LambdaVector> xs;
        for (int i = 0; i < 4; ++i) xs.push_back(random_vector(rng, 6));
        std::vector<int> perm{0, 1, 2, 3};
        std::optional<LambdaVector> reference;
        do {
            std::vector<LambdaVector> ordered;
            for (int i : perm) ordered.push_back(xs[i]);
            for (const auto& r : all_groupings(ordered, 0, ordered.size())) {
                if (!reference) reference = r;
                REQUIRE(r == *reference);
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        // The join keeps the maximum version per entry.
        for (std::size_t k = 0; k < 6; ++k) {
            std::uint64_t v = 0;
            for (const auto& x : xs) v = std::max(v, x[k].version);
            CHECK((*reference)[k].version == v);
        }
    }
}

TEST_CASE("merge is a join-semilattice operation") {
    Rng rng(3);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + rng.below(20);
        const auto a = random_vector(rng, n);
        const auto b = random_vector(rng, n);
        const auto c = random_vector(rng, n);
        REQUIRE(merge(a, a) == a);
        REQUIRE(merge(a, b) == merge(b, a));
        REQUIRE(merge(merge(a, b), c) == merge(a, merge(b, c)));
    }
}

TEST_CASE("topologies") {
    const auto complete = Topology::complete(4);
    CHECK(complete.neighbors(2) == std::vector<AgentId>{0, 1, 3});
    CHECK(complete.connected());

    const auto net = load_network_file(scenario_dir() / "feeder20.json");
    const auto electrical = Topology::electrical(net);
    std::size_t degree_sum = 0;
    for (AgentId a = 0; a < electrical.size(); ++a) degree_sum += electrical.neighbors(a).size();
    CHECK(degree_sum == 2 * net.branches().size());
    CHECK(electrical.connected());

    const auto line = Topology::from_edges(3, {{0, 1}, {1, 2}, {2, 1}});
    CHECK(line.neighbors(1) == std::vector<AgentId>{0, 2});
    CHECK_FALSE(Topology::from_edges(4, {{0, 1}, {2, 3}}).connected());
    CHECK_THROWS_AS(Topology::from_edges(3, {{0, 3}}), Error);
    CHECK_THROWS_AS(Topology::from_edges(3, {{1, 1}}), Error);
}

TEST_CASE("peer selection") {
    Rng rng(4);
    const auto pair = Topology::complete(2);
    for (int i = 0; i < 100; ++i) CHECK(select_peer(0, pair, rng) == 1);

    Rng a(77), b(77);
    const auto complete = Topology::complete(10);
    for (int i = 0; i < 1000; ++i) CHECK(select_peer(3, complete, a) == select_peer(3, complete, b));

    const auto isolated = Topology::from_edges(3, {{0, 1}});
    CHECK(kind_of([&] { select_peer(2, isolated, rng); }) == ErrorKind::IsolatedAgent);
}

TEST_CASE("peer choice is uniform over four neighbors") {
    const auto star = Topology::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        Rng rng(seed);
        std::vector<int> counts(5, 0);
        constexpr int draws = 10000;
        for (int i = 0; i < draws; ++i) ++counts[select_peer(0, star, rng)];
        CHECK(counts[0] == 0);
        const double p = 0.25;
        const double sigma = std::sqrt(p * (1 - p) / draws);
        double chi2 = 0.0;
        for (int k = 1; k <= 4; ++k) {
            const double freq = counts[k] / static_cast<double>(draws);
            CHECK(std::abs(freq - p) <= 3 * sigma);
            chi2 += (counts[k] - p * draws) * (counts[k] - p * draws) / (p * draws);
        }
        // 3 degrees of freedom, upper 0.1% point.
        CHECK(chi2 < 16.27);
    }
}

TEST_CASE("gossip tick always sends one message") {
    GossipAgent agent{0, make_lambda_vector(5), Rng(9)};
    const auto topo = Topology::complete(5);
    const auto first = on_gossip_tick(agent, topo, 100);
    const auto second = on_gossip_tick(agent, topo, 200);
    REQUIRE(first.size() == 1);
    REQUIRE(second.size() == 1);
    CHECK(first[0].payload == make_lambda_vector(5));
    CHECK(first[0].sender == 0);
    CHECK(first[0].receiver != 0);
    CHECK(first[0].send_time != second[0].send_time);
}

TEST_CASE("dissemination reaches everyone on sparse topologies with monotone views") {
    // Minimal synchronous-round protocol driver over the library calls.
    const auto net = load_network_file(scenario_dir() / "feeder20.json");
    for (const auto& topo : {Topology::electrical(net), Topology::complete(net.size())}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            std::vector<GossipAgent> agents;
            for (AgentId a = 0; a < topo.size(); ++a) agents.push_back({a, make_lambda_vector(topo.size()), Rng(seed * 100 + a)});
            const AgentId origin = seed % topo.size();
            agents[origin].view[origin] = {origin, 1.5, 0.0, 1};
            std::vector<std::uint64_t> seen(topo.size(), 0);
            int rounds = 0;
            auto informed = [&] {
                return std::all_of(agents.begin(), agents.end(), [&](const auto& g) { return g.view[origin].version == 1; });
            };
            while (!informed()) {
                std::vector<GossipMessage> inflight;
                for (auto& g : agents) {
                    for (auto& m : on_gossip_tick(g, topo, rounds * 100)) inflight.push_back(std::move(m));
                }
                for (const auto& m : inflight) merge_into(agents[m.receiver].view, m.payload);
                for (AgentId a = 0; a < topo.size(); ++a) {
                    REQUIRE(agents[a].view[origin].version >= seen[a]);
                    seen[a] = agents[a].view[origin].version;
                }
                REQUIRE(++rounds < 10000);
            }
        }
    }
}
