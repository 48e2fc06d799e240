#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "p2pvc/grid_model.hpp"
#include "p2pvc/rng.hpp"

namespace p2pvc {

using AgentId = std::size_t;
using SimTimeMs = std::int64_t;

struct LambdaEntry {
    NodeIndex node = 0;
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    std::uint64_t version = 0;  // issued only by the owning node's agent

    friend bool operator==(const LambdaEntry&, const LambdaEntry&) = default;
};

/// Gossiped multiplier vector, one entry per monitored node, ordered by node.
using LambdaVector = std::vector<LambdaEntry>;

/// All-zero vector at version 0 over nodes 0..n-1.
LambdaVector make_lambda_vector(std::size_t n);

/// Per-entry higher version wins; on equal versions the local entry is kept.
/// Throws Error(NodeSetMismatch) unless both cover the same nodes in order.
LambdaVector merge(const LambdaVector& local, const LambdaVector& incoming);

/// In-place merge; returns true if any local entry was replaced.
bool merge_into(LambdaVector& local, const LambdaVector& incoming);

/// Undirected communication graph over agents.
class Topology {
public:
    explicit Topology(std::vector<std::vector<AgentId>> neighbors);

    static Topology complete(std::size_t n);
    /// Agents talk to their electrical neighbors (one agent per node).
    static Topology electrical(const NetworkModel& network);
    static Topology from_edges(std::size_t n, const std::vector<std::pair<AgentId, AgentId>>& edges);

    std::size_t size() const noexcept { return neighbors_.size(); }
    const std::vector<AgentId>& neighbors(AgentId a) const { return neighbors_.at(a); }
    bool connected() const;

private:
    std::vector<std::vector<AgentId>> neighbors_;
};

/// Uniform choice among the agent's neighbors. Throws Error(IsolatedAgent).
AgentId select_peer(AgentId agent, const Topology& topology, Rng& rng);

struct GossipMessage {
    AgentId sender = 0;
    AgentId receiver = 0;
    LambdaVector payload;
    SimTimeMs send_time = 0;
};

/// Gossip-layer state of one agent: its current view of the multiplier
/// vector and its private random stream.
struct GossipAgent {
    AgentId id = 0;
    LambdaVector view;
    Rng rng;
};

/// One unconditional push of the agent's current view to a random neighbor.
std::vector<GossipMessage> on_gossip_tick(GossipAgent& agent, const Topology& topology,
                                          SimTimeMs now);

}  // namespace p2pvc
