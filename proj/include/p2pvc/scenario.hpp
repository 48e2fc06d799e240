#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "p2pvc/gossip.hpp"
#include "p2pvc/grid_model.hpp"
#include "p2pvc/profile.hpp"

namespace p2pvc {

/// One household load: active power from a profile, reactive power from a
/// constant power factor (lagging).
struct Household {
    NodeIndex node = 0;
    std::size_t profile = 0;
    double power_factor = 0.85;
};

/// Inverter-coupled DER. Powers in pu of the network base.
struct DerSpec {
    NodeIndex node = 0;
    std::string name;
    double s_rated = 0.0;
    double c_p = 4.0;
    double c_q = 1.0;
    std::optional<std::size_t> pv_profile;  // available active power
    double q_setpoint = 0.0;
    double delta_q_min = 0.0;
    double delta_q_max = 0.0;
};

enum class TopologyKind { Complete, Electrical, Custom };

struct GossipConfig {
    std::int64_t tick_ms = 100;
    std::int64_t latency_ms = 100;
    double drop_probability = 0.0;
    TopologyKind topology = TopologyKind::Complete;
    std::vector<std::pair<AgentId, AgentId>> edges;  // Custom only
};

struct Scenario {
    std::shared_ptr<const NetworkModel> network;  // per-unit
    std::vector<Profile> profiles;
    std::vector<std::string> profile_names;
    std::vector<Household> households;
    std::vector<DerSpec> ders;
    double v_min = 0.95;
    double v_max = 1.05;
    double alpha = 1.0;
    GossipConfig gossip;
    std::int64_t lambda_update_period_ms = 1000;
    std::int64_t sample_period_ms = 1000;
    double start_s = 0.0;
    double end_s = 0.0;
    std::uint64_t seed = 0;
    bool control_enabled = true;

    /// Throws Error(InvalidScenario).
    void validate() const;
    Topology topology() const;
};

/// Parses a scenario document; relative file references resolve against
/// `base_dir`.
Scenario load_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
Scenario load_scenario_file(const std::filesystem::path& path);

}  // namespace p2pvc
