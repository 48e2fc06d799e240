#include "p2pvc/gossip.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "p2pvc/error.hpp"

namespace p2pvc {

namespace {

void check_same_nodes(const LambdaVector& a, const LambdaVector& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::NodeSetMismatch, "lambda vectors have " + std::to_string(a.size()) +
                                                    " and " + std::to_string(b.size()) + " entries");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].node != b[i].node) {
            throw Error(ErrorKind::NodeSetMismatch, "lambda vectors disagree on entry " +
                                                        std::to_string(i));
        }
    }
}

}  // namespace

LambdaVector make_lambda_vector(std::size_t n) {
    LambdaVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i].node = i;
    return v;
}

LambdaVector merge(const LambdaVector& local, const LambdaVector& incoming) {
    LambdaVector out = local;
    merge_into(out, incoming);
    return out;
}

bool merge_into(LambdaVector& local, const LambdaVector& incoming) {
    check_same_nodes(local, incoming);
    bool changed = false;
    for (std::size_t i = 0; i < local.size(); ++i) {
        if (incoming[i].version > local[i].version) {
            local[i] = incoming[i];
            changed = true;
        }
    }
    return changed;
}

Topology::Topology(std::vector<std::vector<AgentId>> neighbors) : neighbors_(std::move(neighbors)) {
    for (AgentId a = 0; a < neighbors_.size(); ++a) {
        auto& list = neighbors_[a];
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        for (AgentId b : list) {
            if (b >= neighbors_.size() || b == a) {
                throw Error(ErrorKind::InvalidScenario,
                            "topology edge " + std::to_string(a) + "-" + std::to_string(b) +
                                " is invalid");
            }
        }
    }
}

Topology Topology::complete(std::size_t n) {
    std::vector<std::vector<AgentId>> nb(n);
    for (AgentId a = 0; a < n; ++a) {
        for (AgentId b = 0; b < n; ++b) {
            if (a != b) nb[a].push_back(b);
        }
    }
    return Topology(std::move(nb));
}

Topology Topology::electrical(const NetworkModel& network) {
    std::vector<std::pair<AgentId, AgentId>> edges;
    for (const auto& br : network.branches()) edges.emplace_back(br.from, br.to);
    return from_edges(network.size(), edges);
}

Topology Topology::from_edges(std::size_t n, const std::vector<std::pair<AgentId, AgentId>>& edges) {
    std::vector<std::vector<AgentId>> nb(n);
    for (auto [a, b] : edges) {
        if (a >= n || b >= n) {
            throw Error(ErrorKind::InvalidScenario, "topology edge references unknown agent");
        }
        nb[a].push_back(b);
        nb[b].push_back(a);
    }
    return Topology(std::move(nb));
}

bool Topology::connected() const {
    if (neighbors_.empty()) return true;
    std::vector<bool> seen(neighbors_.size(), false);
    std::deque<AgentId> queue{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!queue.empty()) {
        const AgentId a = queue.front();
        queue.pop_front();
        for (AgentId b : neighbors_[a]) {
            if (!seen[b]) {
                seen[b] = true;
                ++count;
                queue.push_back(b);
            }
        }
    }
    return count == neighbors_.size();
}

AgentId select_peer(AgentId agent, const Topology& topology, Rng& rng) {
    const auto& nb = topology.neighbors(agent);
    if (nb.empty()) {
        throw Error(ErrorKind::IsolatedAgent, "agent " + std::to_string(agent) + " has no neighbors");
    }
    return nb[rng.below(nb.size())];
}

std::vector<GossipMessage> on_gossip_tick(GossipAgent& agent, const Topology& topology,
                                          SimTimeMs now) {
    std::vector<GossipMessage> out;
    out.push_back({agent.id, select_peer(agent.id, topology, agent.rng), agent.view, now});
    return out;
}

}  // namespace p2pvc
