#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace p2pvc {

using NodeIndex = std::size_t;

enum class NodeKind { Slack, Load };

struct Node {
    std::string name;
    NodeKind kind = NodeKind::Load;
    std::optional<std::string> der;  // DER id attached at this node
};

/// Series impedance between two nodes. Units are ohm until the network is
/// converted with to_per_unit().
struct Branch {
    NodeIndex from = 0;
    NodeIndex to = 0;
    double resistance = 0.0;
    double reactance = 0.0;
};

struct Impedance {
    double r = 0.0;
    double x = 0.0;
};

/// Validated radial feeder. Immutable once constructed.
///
/// Every branch is oriented away from the slack node after construction, so
/// `branches()[parent_branch(n)].to == n` for every non-slack node n.
class NetworkModel {
public:
    /// Validates topology and impedances. Throws Error with kind
    /// MissingSlack, NonPositiveImpedance, UnknownNode, CycleDetected or
    /// Disconnected.
    NetworkModel(std::vector<Node> nodes, std::vector<Branch> branches, double v_base,
                 double s_base, double v_nom_pu = 1.0, bool per_unit = false);

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<Branch>& branches() const noexcept { return branches_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    double v_base() const noexcept { return v_base_; }
    double s_base() const noexcept { return s_base_; }
    double v_nom_pu() const noexcept { return v_nom_pu_; }
    double z_base() const noexcept { return v_base_ * v_base_ / s_base_; }
    bool is_per_unit() const noexcept { return per_unit_; }

    NodeIndex slack() const noexcept { return slack_; }
    /// Parent of n on the path towards the slack; the slack is its own parent.
    NodeIndex parent(NodeIndex n) const { return parent_.at(n); }
    /// Index into branches() of the branch feeding n. Undefined for the slack.
    std::size_t parent_branch(NodeIndex n) const { return parent_branch_.at(n); }
    std::size_t depth(NodeIndex n) const { return depth_.at(n); }
    /// Nodes in breadth-first order from the slack (slack first).
    const std::vector<NodeIndex>& order() const noexcept { return order_; }

    /// Total impedance of the slack->n path.
    Impedance path_from_slack(NodeIndex n) const { return cumulative_.at(n); }

    NodeIndex index_of(std::string_view name) const;
    std::optional<NodeIndex> find(std::string_view name) const;
    /// Node hosting the DER with the given id.
    std::optional<NodeIndex> find_der(std::string_view der_id) const;
    /// All nodes that declare an attached DER, in index order.
    std::vector<NodeIndex> der_nodes() const;

private:
    std::vector<Node> nodes_;
    std::vector<Branch> branches_;
    double v_base_;
    double s_base_;
    double v_nom_pu_;
    bool per_unit_;

    NodeIndex slack_ = 0;
    std::vector<NodeIndex> parent_;
    std::vector<std::size_t> parent_branch_;
    std::vector<std::size_t> depth_;
    std::vector<NodeIndex> order_;
    std::vector<Impedance> cumulative_;
    std::map<std::string, NodeIndex, std::less<>> by_name_;
};

/// Parses the network JSON document. Unknown keys are rejected.
NetworkModel load_network(const nlohmann::json& doc);
NetworkModel parse_network(std::string_view text);
NetworkModel load_network_file(const std::filesystem::path& path);

/// Scales impedances by s_base / v_base^2. Throws AlreadyPerUnit on a second
/// application.
NetworkModel to_per_unit(const NetworkModel& network);

/// Impedance of the branches shared by the slack->n and slack->d paths.
Impedance path_impedance(const NetworkModel& network, NodeIndex n, NodeIndex d);
Impedance path_impedance(const NetworkModel& network, std::string_view n, std::string_view d);

}  // namespace p2pvc
