#include "p2pvc/grid_model.hpp"

#include <deque>
#include <fstream>
#include <numeric>
#include <map>
#include <set>
#include <sstream>

#include "p2pvc/error.hpp"

namespace p2pvc {

namespace {

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[b] = a;
        return true;
    }

private:
    std::vector<std::size_t> parent_;
};

void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                         std::string_view where) {
    if (!obj.is_object()) {
        throw Error(ErrorKind::ParseError, std::string(where) + " must be an object");
    }
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) {
            throw Error(ErrorKind::ParseError,
                        "unknown key '" + key + "' in " + std::string(where));
        }
    }
}

std::string id_string(const nlohmann::json& v, std::string_view where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw Error(ErrorKind::ParseError, std::string(where) + ": id must be a string or integer");
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(ErrorKind::ParseError,
                    std::string(where) + ": missing required key '" + key + "'");
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError,
                    std::string(where) + ": bad value for '" + key + "': " + e.what());
    }
}

}  // namespace

NetworkModel::NetworkModel(std::vector<Node> nodes, std::vector<Branch> branches, double v_base,
                           double s_base, double v_nom_pu, bool per_unit)
    : nodes_(std::move(nodes)),
      branches_(std::move(branches)),
      v_base_(v_base),
      s_base_(s_base),
      v_nom_pu_(v_nom_pu),
      per_unit_(per_unit) {
    if (!(v_base_ > 0.0) || !(s_base_ > 0.0)) {
        throw Error(ErrorKind::ParseError, "v_base and s_base must be positive");
    }
    if (!(v_nom_pu_ > 0.0)) {
        throw Error(ErrorKind::ParseError, "v_nom_pu must be positive");
    }

    const std::size_t n = nodes_.size();
    std::size_t slack_count = 0;
    for (NodeIndex i = 0; i < n; ++i) {
        if (!by_name_.emplace(nodes_[i].name, i).second) {
            throw Error(ErrorKind::ParseError, "duplicate node id '" + nodes_[i].name + "'");
        }
        if (nodes_[i].kind == NodeKind::Slack) {
            slack_ = i;
            ++slack_count;
        }
    }
    if (slack_count != 1) {
        throw Error(ErrorKind::MissingSlack,
                    "expected exactly one slack node, found " + std::to_string(slack_count));
    }
    std::set<std::string> der_ids;
    for (const auto& node : nodes_) {
        if (node.der && !der_ids.insert(*node.der).second) {
            throw Error(ErrorKind::ParseError, "duplicate der id '" + *node.der + "'");
        }
    }

    DisjointSet components(n);
    std::vector<std::vector<std::size_t>> incident(n);
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        const auto& br = branches_[b];
        if (br.from >= n || br.to >= n) {
            throw Error(ErrorKind::UnknownNode, "branch " + std::to_string(b) +
                                                    " references a node that does not exist");
        }
        if (!(br.resistance > 0.0) || !(br.reactance >= 0.0)) {
            throw Error(ErrorKind::NonPositiveImpedance,
                        "branch " + nodes_[br.from].name + "-" + nodes_[br.to].name +
                            " requires r > 0 and x >= 0");
        }
        if (!components.unite(br.from, br.to)) {
            throw Error(ErrorKind::CycleDetected, "branch " + nodes_[br.from].name + "-" +
                                                      nodes_[br.to].name + " closes a loop");
        }
        incident[br.from].push_back(b);
        incident[br.to].push_back(b);
    }

    constexpr auto unset = static_cast<std::size_t>(-1);
    parent_.assign(n, unset);
    parent_branch_.assign(n, unset);
    depth_.assign(n, 0);
    cumulative_.assign(n, Impedance{});
    order_.clear();
    order_.reserve(n);

    parent_[slack_] = slack_;
    std::deque<NodeIndex> queue{slack_};
    while (!queue.empty()) {
        const NodeIndex u = queue.front();
        queue.pop_front();
        order_.push_back(u);
        for (std::size_t b : incident[u]) {
            auto& br = branches_[b];
            const NodeIndex v = br.from == u ? br.to : br.from;
            if (parent_[v] != unset) continue;
            if (br.from != u) std::swap(br.from, br.to);
            parent_[v] = u;
            parent_branch_[v] = b;
            depth_[v] = depth_[u] + 1;
            cumulative_[v] = {cumulative_[u].r + br.resistance, cumulative_[u].x + br.reactance};
            queue.push_back(v);
        }
    }
    if (order_.size() != n) {
        for (NodeIndex i = 0; i < n; ++i) {
            if (parent_[i] == unset) {
                throw Error(ErrorKind::Disconnected,
                            "node '" + nodes_[i].name + "' is not reachable from the slack");
            }
        }
    }
}

NodeIndex NetworkModel::index_of(std::string_view name) const {
    if (auto idx = find(name)) return *idx;
    throw Error(ErrorKind::UnknownNode, "no node '" + std::string(name) + "'");
}

std::optional<NodeIndex> NetworkModel::find(std::string_view name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

std::optional<NodeIndex> NetworkModel::find_der(std::string_view der_id) const {
    for (NodeIndex i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].der && *nodes_[i].der == der_id) return i;
    }
    return std::nullopt;
}

std::vector<NodeIndex> NetworkModel::der_nodes() const {
    std::vector<NodeIndex> out;
    for (NodeIndex i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].der) out.push_back(i);
    }
    return out;
}

namespace {

NetworkModel load_network_impl(const nlohmann::json& doc) {
    reject_unknown_keys(doc, {"v_base_volts", "s_base_va", "v_nom_pu", "nodes", "branches"},
                        "network");
    const auto v_base = required<double>(doc, "v_base_volts", "network");
    const auto s_base = required<double>(doc, "s_base_va", "network");
    const double v_nom = doc.value("v_nom_pu", 1.0);

    const auto& jnodes = doc.at("nodes");
    if (!jnodes.is_array()) throw Error(ErrorKind::ParseError, "nodes must be an array");
    std::vector<Node> nodes;
    std::map<std::string, NodeIndex, std::less<>> index;
    for (const auto& jn : jnodes) {
        reject_unknown_keys(jn, {"id", "kind", "der"}, "node");
        if (!jn.contains("id")) throw Error(ErrorKind::ParseError, "node: missing 'id'");
        Node node;
        node.name = id_string(jn.at("id"), "node");
        const auto kind = jn.value("kind", std::string("load"));
        if (kind == "slack") {
            node.kind = NodeKind::Slack;
        } else if (kind == "load") {
            node.kind = NodeKind::Load;
        } else {
            throw Error(ErrorKind::ParseError, "node '" + node.name + "': unknown kind '" + kind + "'");
        }
        if (jn.contains("der") && !jn.at("der").is_null()) {
            node.der = id_string(jn.at("der"), "node der");
        }
        if (!index.emplace(node.name, nodes.size()).second) {
            throw Error(ErrorKind::ParseError, "duplicate node id '" + node.name + "'");
        }
        nodes.push_back(std::move(node));
    }

    const auto& jbranches = doc.at("branches");
    if (!jbranches.is_array()) throw Error(ErrorKind::ParseError, "branches must be an array");
    std::vector<Branch> branches;
    for (const auto& jb : jbranches) {
        reject_unknown_keys(jb, {"from", "to", "r_ohm", "x_ohm"}, "branch");
        if (!jb.contains("from") || !jb.contains("to")) {
            throw Error(ErrorKind::ParseError, "branch: missing 'from' or 'to'");
        }
        const auto from = id_string(jb.at("from"), "branch");
        const auto to = id_string(jb.at("to"), "branch");
        auto fi = index.find(from);
        auto ti = index.find(to);
        if (fi == index.end() || ti == index.end()) {
            throw Error(ErrorKind::UnknownNode,
                        "branch " + from + "-" + to + " references an unknown node");
        }
        if (fi->second == ti->second) {
            throw Error(ErrorKind::CycleDetected, "self-loop at node '" + from + "'");
        }
        branches.push_back({fi->second, ti->second, required<double>(jb, "r_ohm", "branch"),
                            required<double>(jb, "x_ohm", "branch")});
    }
    return NetworkModel(std::move(nodes), std::move(branches), v_base, s_base, v_nom, false);
}

}  // namespace

NetworkModel load_network(const nlohmann::json& doc) {
    try {
        return load_network_impl(doc);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

NetworkModel parse_network(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    return load_network(doc);
}

NetworkModel load_network_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_network(buf.str());
}

NetworkModel to_per_unit(const NetworkModel& network) {
    if (network.is_per_unit()) {
        throw Error(ErrorKind::AlreadyPerUnit, "network impedances are already per-unit");
    }
    const double scale = network.s_base() / (network.v_base() * network.v_base());
    std::vector<Branch> branches = network.branches();
    for (auto& b : branches) {
        b.resistance *= scale;
        b.reactance *= scale;
    }
    return NetworkModel(network.nodes(), std::move(branches), network.v_base(), network.s_base(),
                        network.v_nom_pu(), true);
}

Impedance path_impedance(const NetworkModel& network, NodeIndex n, NodeIndex d) {
    if (n >= network.size() || d >= network.size()) {
        throw Error(ErrorKind::UnknownNode, "path_impedance: node index out of range");
    }
    if (!network.is_per_unit()) {
        throw Error(ErrorKind::NotPerUnit, "path_impedance requires a per-unit network");
    }
    while (network.depth(n) > network.depth(d)) n = network.parent(n);
    while (network.depth(d) > network.depth(n)) d = network.parent(d);
    while (n != d) {
        n = network.parent(n);
        d = network.parent(d);
    }
    return network.path_from_slack(n);
}

Impedance path_impedance(const NetworkModel& network, std::string_view n, std::string_view d) {
    return path_impedance(network, network.index_of(n), network.index_of(d));
}

}  // namespace p2pvc
