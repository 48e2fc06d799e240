#include <doctest.h>

#include "p2pvc/error.hpp"
#include "p2pvc/scenario.hpp"
#include "p2pvc/simulation.hpp"
#include "support.hpp"

using namespace p2pvc;
using namespace p2pvc::test;

namespace {

nlohmann::json small_doc() {
    return nlohmann::json::parse(R"({
        "network_file": "two_node.json",
        "start_s": 0, "end_s": 10,
        "profiles": {"load": {"samples": [[0, 1600], [10, 3200]]},
                     "sun": {"samples": [[0, 800]], "interpolation": "step"}},
        "households": [{"node": 2, "profile": "load"}],
        "ders": [{"der": "pv2", "s_rated_va": 4000, "pv_profile": "sun"}]})");
}

ErrorKind kind_of(const nlohmann::json& doc) {
    try {
        load_scenario(doc, data_dir());
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::ParseError;
}

}  // namespace

TEST_CASE("bundled case study parameters") {
    const auto sc = load_scenario_file(scenario_dir() / "case_study.json");
    CHECK(sc.households.size() == 20);
    CHECK(sc.ders.size() == 10);
    for (const auto& d : sc.ders) {
        CHECK(d.s_rated * sc.network->s_base() == doctest::Approx(5000.0));
        CHECK(d.c_q == 1.0);
        CHECK(d.c_p == 4.0 * d.c_q);
    }
    for (const auto& h : sc.households) CHECK(h.power_factor == 0.85);
    CHECK(sc.v_min == 0.95);
    CHECK(sc.v_max == 1.05);
    CHECK(sc.start_s == 12 * 3600.0);
    CHECK(sc.end_s == 22 * 3600.0);
    CHECK(sc.gossip.tick_ms == 100);
    CHECK(sc.gossip.latency_ms == 100);
    CHECK(sc.lambda_update_period_ms == 1000);
    CHECK(sc.network->is_per_unit());
}

TEST_CASE("case study records its calibrated step size") {
    const auto sc = load_scenario_file(scenario_dir() / "case_study.json");
    CHECK(calibrate_scenario_alpha(sc) == doctest::Approx(sc.alpha).epsilon(1e-3));
}

TEST_CASE("power values are converted to per-unit") {
    const auto sc = load_scenario(small_doc(), data_dir());
    REQUIRE(sc.ders.size() == 1);
    CHECK(sc.ders[0].s_rated == doctest::Approx(0.25));
    CHECK(sc.ders[0].delta_q_min == doctest::Approx(-0.25));
    const auto inj = base_injections(sc, 5.0);
    // 2400 W load at pf 0.85 and 800 W PV on a 16 kVA base.
    CHECK(inj.p[1] == doctest::Approx((800.0 - 2400.0) / 16000.0));
    CHECK(inj.q[1] == doctest::Approx(-2400.0 * std::tan(std::acos(0.85)) / 16000.0));
}

TEST_CASE("scenario validation") {
    auto doc = small_doc();
    doc["extra"] = 1;
    CHECK(kind_of(doc) == ErrorKind::InvalidScenario);

    doc = small_doc();
    doc["v_min"] = 1.06;
    CHECK(kind_of(doc) == ErrorKind::InvalidScenario);

    doc = small_doc();
    doc["ders"][0]["der"] = "pv9";
    CHECK(kind_of(doc) == ErrorKind::UnknownDer);

    doc = small_doc();
    doc["households"][0]["profile"] = "missing";
    CHECK(kind_of(doc) == ErrorKind::InvalidScenario);

    doc = small_doc();
    doc["households"][0]["node"] = 7;
    CHECK(kind_of(doc) == ErrorKind::UnknownNode);

    doc = small_doc();
    doc["gossip"] = {{"tick_ms", 0}};
    CHECK(kind_of(doc) == ErrorKind::InvalidScenario);

    doc = small_doc();
    doc["gossip"] = {{"topology", "ring"}};
    CHECK(kind_of(doc) == ErrorKind::InvalidScenario);

    doc = small_doc();
    doc["end_s"] = -1;
    CHECK(kind_of(doc) == ErrorKind::InvalidScenario);

    doc = small_doc();
    doc.erase("start_s");
    CHECK(kind_of(doc) == ErrorKind::InvalidScenario);
}

TEST_CASE("custom topology edges") {
    auto doc = small_doc();
    doc["gossip"] = nlohmann::json::parse(R"({"topology": [[1, 2]]})");
    auto sc = load_scenario(doc, data_dir());
    CHECK(sc.gossip.topology == TopologyKind::Custom);
    CHECK(sc.topology().neighbors(0) == std::vector<AgentId>{1});
}
