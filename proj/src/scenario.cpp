#include "p2pvc/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "p2pvc/error.hpp"

namespace p2pvc {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw Error(ErrorKind::InvalidScenario, where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) {
            throw Error(ErrorKind::InvalidScenario, "unknown key '" + key + "' in " + where);
        }
    }
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

std::string as_id(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw Error(ErrorKind::InvalidScenario, "ids must be strings or integers");
}

Interpolation parse_interpolation(const json& j) {
    const auto s = j.value("interpolation", std::string("linear"));
    if (s == "linear") return Interpolation::Linear;
    if (s == "step") return Interpolation::Step;
    throw Error(ErrorKind::InvalidScenario, "unknown interpolation '" + s + "'");
}

ProfileUnit parse_unit(const json& j) {
    const auto s = j.value("unit", std::string("watts"));
    if (s == "watts") return ProfileUnit::Watts;
    if (s == "pu") return ProfileUnit::PerUnit;
    throw Error(ErrorKind::InvalidScenario, "unknown profile unit '" + s + "'");
}

Profile parse_profile(const json& j, const std::filesystem::path& base_dir) {
    reject_unknown(j, {"file", "samples", "synthetic", "interpolation", "unit"}, "profile");
    const auto interp = parse_interpolation(j);
    const auto unit = parse_unit(j);
    const int sources = static_cast<int>(j.contains("file")) + static_cast<int>(j.contains("samples")) +
                        static_cast<int>(j.contains("synthetic"));
    if (sources != 1) {
        throw Error(ErrorKind::InvalidScenario,
                    "profile needs exactly one of 'file', 'samples', 'synthetic'");
    }
    if (j.contains("file")) {
        return load_profile_csv(base_dir / j.at("file").get<std::string>(), interp, unit);
    }
    if (j.contains("samples")) {
        Profile p;
        p.interpolation = interp;
        p.unit = unit;
        for (const auto& s : j.at("samples")) p.samples.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
        p.validate();
        return p;
    }
    return generate_profile(parse_synthetic(j.at("synthetic")), interp, unit);
}

Scenario parse(const json& doc, const std::filesystem::path& base_dir) {
    reject_unknown(doc,
                   {"description", "network", "network_file", "seed", "start_s", "end_s",
                    "control_enabled", "v_min", "v_max", "alpha", "lambda_update_period_ms",
                    "sample_period_ms", "gossip", "power_factor", "profiles", "households", "ders"},
                   "scenario");
    Scenario sc;

    if (doc.contains("network") == doc.contains("network_file")) {
        throw Error(ErrorKind::InvalidScenario, "scenario needs exactly one of 'network', 'network_file'");
    }
    const NetworkModel physical = doc.contains("network")
                                      ? load_network(doc.at("network"))
                                      : load_network(read_json(base_dir / doc.at("network_file").get<std::string>()));
    sc.network = std::make_shared<const NetworkModel>(to_per_unit(physical));
    const auto& net = *sc.network;
    const double s_base = net.s_base();

    sc.seed = doc.value("seed", std::uint64_t{0});
    sc.start_s = doc.at("start_s").get<double>();
    sc.end_s = doc.at("end_s").get<double>();
    sc.control_enabled = doc.value("control_enabled", true);
    sc.v_min = doc.value("v_min", 0.95);
    sc.v_max = doc.value("v_max", 1.05);
    sc.alpha = doc.value("alpha", 1.0);
    sc.lambda_update_period_ms = doc.value("lambda_update_period_ms", std::int64_t{1000});
    sc.sample_period_ms = doc.value("sample_period_ms", std::int64_t{1000});
    const double default_pf = doc.value("power_factor", 0.85);

    if (doc.contains("gossip")) {
        const auto& g = doc.at("gossip");
        reject_unknown(g, {"tick_ms", "latency_ms", "drop_probability", "topology"}, "gossip");
        sc.gossip.tick_ms = g.value("tick_ms", std::int64_t{100});
        sc.gossip.latency_ms = g.value("latency_ms", std::int64_t{100});
        sc.gossip.drop_probability = g.value("drop_probability", 0.0);
        if (g.contains("topology")) {
            const auto& t = g.at("topology");
            if (t.is_string()) {
                const auto kind = t.get<std::string>();
                if (kind == "complete") {
                    sc.gossip.topology = TopologyKind::Complete;
                } else if (kind == "electrical") {
                    sc.gossip.topology = TopologyKind::Electrical;
                } else {
                    throw Error(ErrorKind::InvalidScenario, "unknown topology '" + kind + "'");
                }
            } else if (t.is_array()) {
                sc.gossip.topology = TopologyKind::Custom;
                for (const auto& e : t) {
                    sc.gossip.edges.emplace_back(net.index_of(as_id(e.at(0))), net.index_of(as_id(e.at(1))));
                }
            } else {
                throw Error(ErrorKind::InvalidScenario, "topology must be a name or an edge list");
            }
        }
    }

    if (doc.contains("profiles")) {
        for (const auto& [name, pj] : doc.at("profiles").items()) {
            sc.profile_names.push_back(name);
            sc.profiles.push_back(parse_profile(pj, base_dir));
        }
    }
    auto profile_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < sc.profile_names.size(); ++i) {
            if (sc.profile_names[i] == name) return i;
        }
        throw Error(ErrorKind::InvalidScenario, "unknown profile '" + name + "'");
    };

    if (doc.contains("households")) {
        for (const auto& h : doc.at("households")) {
            reject_unknown(h, {"node", "profile", "power_factor"}, "household");
            sc.households.push_back({net.index_of(as_id(h.at("node"))),
                                     profile_index(h.at("profile").get<std::string>()),
                                     h.value("power_factor", default_pf)});
        }
    }

    if (doc.contains("ders")) {
        for (const auto& d : doc.at("ders")) {
            reject_unknown(d, {"der", "node", "s_rated_va", "c_p", "c_q", "pv_profile", "q_setpoint_var",
                               "delta_q_min_var", "delta_q_max_var"},
                           "der");
            DerSpec spec;
            if (d.contains("der")) {
                spec.name = as_id(d.at("der"));
                auto node = net.find_der(spec.name);
                if (!node) throw Error(ErrorKind::UnknownDer, "no node hosts DER '" + spec.name + "'");
                spec.node = *node;
            } else if (d.contains("node")) {
                spec.node = net.index_of(as_id(d.at("node")));
                spec.name = net.nodes()[spec.node].der.value_or(net.nodes()[spec.node].name);
            } else {
                throw Error(ErrorKind::InvalidScenario, "der entry needs 'der' or 'node'");
            }
            const double s_va = d.at("s_rated_va").get<double>();
            spec.s_rated = s_va / s_base;
            spec.c_p = d.value("c_p", 4.0);
            spec.c_q = d.value("c_q", 1.0);
            if (d.contains("pv_profile")) spec.pv_profile = profile_index(d.at("pv_profile").get<std::string>());
            spec.q_setpoint = d.value("q_setpoint_var", 0.0) / s_base;
            spec.delta_q_min = d.value("delta_q_min_var", -s_va) / s_base;
            spec.delta_q_max = d.value("delta_q_max_var", s_va) / s_base;
            sc.ders.push_back(std::move(spec));
        }
    }
    sc.validate();
    return sc;
}

}  // namespace

void Scenario::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidScenario, msg); };
    if (!network) fail("scenario has no network");
    if (!network->is_per_unit()) fail("scenario network must be per-unit");
    if (!(v_min < v_max)) fail("v_min must be below v_max");
    if (!(alpha > 0.0)) fail("alpha must be positive");
    if (gossip.tick_ms <= 0 || gossip.latency_ms < 0 || lambda_update_period_ms <= 0 || sample_period_ms <= 0) {
        fail("periods must be positive");
    }
    if (!(gossip.drop_probability >= 0.0 && gossip.drop_probability < 1.0)) {
        fail("drop_probability must be in [0, 1)");
    }
    if (!(end_s >= start_s)) fail("end_s must not precede start_s");
    std::set<NodeIndex> der_nodes;
    for (const auto& d : ders) {
        if (d.node >= network->size()) fail("DER on unknown node");
        if (!der_nodes.insert(d.node).second) fail("more than one DER on node " + network->nodes()[d.node].name);
        if (!(d.s_rated > 0.0)) fail("DER " + d.name + " needs a positive rating");
        if (!(d.c_p > 0.0) || !(d.c_q > 0.0)) fail("DER " + d.name + " needs positive cost weights");
        if (!(d.delta_q_min <= d.delta_q_max)) fail("DER " + d.name + " has inverted reactive bounds");
        if (d.pv_profile && *d.pv_profile >= profiles.size()) fail("DER " + d.name + " references a missing profile");
    }
    for (const auto& h : households) {
        if (h.node >= network->size()) fail("household on unknown node");
        if (h.profile >= profiles.size()) fail("household references a missing profile");
        if (!(h.power_factor > 0.0 && h.power_factor <= 1.0)) fail("power factor must be in (0, 1]");
    }
    if (control_enabled && !topology().connected()) fail("communication topology is not connected");
}

Topology Scenario::topology() const {
    switch (gossip.topology) {
    case TopologyKind::Complete: return Topology::complete(network->size());
    case TopologyKind::Electrical: return Topology::electrical(*network);
    case TopologyKind::Custom: return Topology::from_edges(network->size(), gossip.edges);
    }
    return Topology::complete(network->size());
}

Scenario load_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    try {
        return parse(doc, base_dir);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidScenario, e.what());
    }
}

Scenario load_scenario_file(const std::filesystem::path& path) {
    return load_scenario(read_json(path), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace p2pvc
