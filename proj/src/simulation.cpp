#include "p2pvc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "p2pvc/error.hpp"
#include "p2pvc/rng.hpp"

namespace p2pvc {

namespace {

double profile_pu(const Scenario& sc, std::size_t profile, double t_s) {
    const auto& p = sc.profiles[profile];
    const double v = interpolate_profile(p, t_s);
    return p.unit == ProfileUnit::Watts ? v / sc.network->s_base() : v;
}

double available_pv(const Scenario& sc, const DerSpec& der, double t_s) {
    if (!der.pv_profile) return 0.0;
    return std::clamp(profile_pu(sc, *der.pv_profile, t_s), 0.0, der.s_rated);
}

void set_time_dependent(const Scenario& sc, const DerSpec& der, double t_s, CompensatorState& c) {
    c.p_setpoint_0 = available_pv(sc, der, t_s);
    c.q_setpoint_0 = der.q_setpoint;
    // PV can only curtail.
    c.delta_p_min = -c.p_setpoint_0;
    c.delta_p_max = 0.0;
}

void add_loads(const Scenario& sc, double t_s, InjectionSet& inj) {
    for (const auto& h : sc.households) {
        const double p = profile_pu(sc, h.profile, t_s);
        const double tan_phi = std::sqrt(1.0 - h.power_factor * h.power_factor) / h.power_factor;
        inj.p[h.node] -= p;
        inj.q[h.node] -= p * tan_phi;
    }
}

std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

enum class EventKind : int {
    Physics = 1,
    GossipTick = 3,
    Delivery = 4,
    LambdaUpdate = 5,
    Sample = 6,
};

struct Event {
    SimTimeMs time = 0;
    EventKind kind = EventKind::Physics;
    std::uint64_t key = 0;
    std::uint64_t seq = 0;
    AgentId agent = 0;
    std::size_t message = 0;  // Delivery only: slot in the message pool
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const noexcept {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return static_cast<int>(a.kind) > static_cast<int>(b.kind);
        if (a.key != b.key) return a.key > b.key;
        return a.seq > b.seq;
    }
};

class Engine {
public:
    Engine(const Scenario& sc, const SimulationOptions& options)
        : sc_(sc),
          net_(*sc.network),
          options_(options),
          topology_(sc.topology()),
          n_(net_.size()) {
        std::vector<NodeIndex> der_nodes;
        for (const auto& d : sc_.ders) der_nodes.push_back(d.node);
        sens_ = sensitivity_matrix(net_, der_nodes);

        der_at_node_.assign(n_, npos);
        for (std::size_t d = 0; d < sc_.ders.size(); ++d) {
            const auto& spec = sc_.ders[d];
            auto c = make_compensator(sens_, d);
            c.c_p = spec.c_p;
            c.c_q = spec.c_q;
            c.s_rated = spec.s_rated;
            c.delta_q_min = spec.delta_q_min;
            c.delta_q_max = spec.delta_q_max;
            compensators_.push_back(std::move(c));
            der_at_node_[spec.node] = d;
        }

        agents_.resize(n_);
        gossip_.resize(n_);
        drop_rng_.reserve(n_);
        for (AgentId a = 0; a < n_; ++a) {
            agents_[a] = {a, 0.0, 0.0, sc_.alpha, sc_.v_min, sc_.v_max, 0};
            gossip_[a] = {a, make_lambda_vector(n_), Rng(derive_seed(sc_.seed, 3 * a))};
            drop_rng_.emplace_back(derive_seed(sc_.seed, 3 * a + 1));
        }

        if (options_.trace) *options_.trace << "time_ms,sender,receiver,node_id,lambda_min,lambda_max,version\n";

        result_.node_names.reserve(n_);
        for (const auto& node : net_.nodes()) result_.node_names.push_back(node.name);
        for (const auto& d : sc_.ders) {
            result_.der_names.push_back(d.name);
            result_.summary.s_rated.push_back(d.s_rated);
        }
        result_.summary.violation_seconds.assign(n_, 0.0);
        if (options_.tie_shuffle_seed) shuffle_rng_ = Rng(*options_.tie_shuffle_seed);
    }

    TimeSeriesResult run() {
        const auto duration_ms = static_cast<SimTimeMs>(std::llround((sc_.end_s - sc_.start_s) * 1000.0));
        push({0, EventKind::Physics});
        push({0, EventKind::Sample});
        if (sc_.control_enabled) {
            for (AgentId a = 0; a < n_; ++a) {
                // Asynchronous phases drawn from a stream separate from peer selection.
                Rng phase(derive_seed(sc_.seed, 3 * a + 2));
                push({static_cast<SimTimeMs>(phase.below(static_cast<std::uint64_t>(sc_.gossip.tick_ms))),
                      EventKind::GossipTick, 0, 0, a});
                push({static_cast<SimTimeMs>(phase.below(static_cast<std::uint64_t>(sc_.lambda_update_period_ms))),
                      EventKind::LambdaUpdate, 0, 0, a});
            }
        }

        while (!queue_.empty()) {
            std::pop_heap(queue_.begin(), queue_.end(), EventAfter{});
            const Event ev = queue_.back();
            queue_.pop_back();
            if (ev.time > duration_ms) {
                if (ev.kind == EventKind::Delivery) free_slots_.push_back(ev.message);
                continue;
            }
            now_ = ev.time;
            switch (ev.kind) {
            case EventKind::Physics: on_physics(); break;
            case EventKind::GossipTick: on_gossip_tick(ev.agent); break;
            case EventKind::Delivery: on_delivery(ev.message); break;
            case EventKind::LambdaUpdate: on_lambda_update(ev.agent); break;
            case EventKind::Sample: on_sample(); break;
            }
        }
        return std::move(result_);
    }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    double now_s() const { return sc_.start_s + static_cast<double>(now_) / 1000.0; }

    void push(Event ev) {
        ev.seq = seq_++;
        ev.key = options_.tie_shuffle_seed ? shuffle_rng_() : ev.seq;
        queue_.push_back(ev);
        std::push_heap(queue_.begin(), queue_.end(), EventAfter{});
    }

    void update_compensator(std::size_t d) {
        auto& c = compensators_[d];
        if (sc_.control_enabled) {
            compensator_update(c, gossip_[c.node].view);
        } else {
            c.delta_p = 0.0;
            c.delta_q = 0.0;
        }
        const auto applied = apply_compensation(c);
        const double excess = applied.p * applied.p + applied.q * applied.q - c.s_rated * c.s_rated;
        result_.summary.max_capability_excess = std::max(result_.summary.max_capability_excess, excess);
    }

    void on_physics() {
        const double t = now_s();
        for (std::size_t d = 0; d < compensators_.size(); ++d) {
            set_time_dependent(sc_, sc_.ders[d], t, compensators_[d]);
            update_compensator(d);
        }
        InjectionSet inj = InjectionSet::zeros(n_);
        add_loads(sc_, t, inj);
        for (const auto& c : compensators_) {
            const auto applied = apply_compensation(c);
            inj.p[c.node] += applied.p;
            inj.q[c.node] += applied.q;
        }
        if (!solved_ || inj.p != injections_.p || inj.q != injections_.q) {
            try {
                solution_ = solve_bfs(net_, inj);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NonConvergence) throw;
                throw Error(ErrorKind::PowerFlowDiverged,
                            "at t=" + fmt9(t) + " s: " + std::string(e.what()));
            }
            injections_ = std::move(inj);
            solved_ = true;
            ++result_.summary.power_flow_solves;
        }
        push({now_ + sc_.gossip.tick_ms, EventKind::Physics});
    }

    void on_gossip_tick(AgentId a) {
        for (auto& msg : p2pvc::on_gossip_tick(gossip_[a], topology_, now_)) {
            ++result_.summary.messages_sent;
            if (sc_.gossip.drop_probability > 0.0 && drop_rng_[a].uniform() < sc_.gossip.drop_probability) {
                ++result_.summary.messages_dropped;
                continue;
            }
            std::size_t slot;
            if (free_slots_.empty()) {
                slot = pool_.size();
                pool_.push_back(std::move(msg));
            } else {
                slot = free_slots_.back();
                free_slots_.pop_back();
                pool_[slot] = std::move(msg);
            }
            push({now_ + sc_.gossip.latency_ms, EventKind::Delivery, 0, 0, pool_[slot].receiver, slot});
        }
        push({now_ + sc_.gossip.tick_ms, EventKind::GossipTick, 0, 0, a});
    }

    void on_delivery(std::size_t slot) {
        const GossipMessage& msg = pool_[slot];
        if (options_.trace) {
            auto& out = *options_.trace;
            for (const auto& e : msg.payload) {
                out << now_ << ',' << result_.node_names[msg.sender] << ','
                    << result_.node_names[msg.receiver] << ',' << result_.node_names[e.node] << ','
                    << fmt9(e.lambda_min) << ',' << fmt9(e.lambda_max) << ',' << e.version << '\n';
            }
        }
        const bool changed = merge_into(gossip_[msg.receiver].view, msg.payload);
        if (changed && der_at_node_[msg.receiver] != npos) update_compensator(der_at_node_[msg.receiver]);
        free_slots_.push_back(slot);
    }

    void on_lambda_update(AgentId a) {
        agents_[a] = lagrangian_update(agents_[a], solution_.magnitude[a]);
        auto& mine = gossip_[a].view[a];
        mine = {a, agents_[a].lambda_max, agents_[a].lambda_min, agents_[a].version};
        result_.summary.min_lambda =
            std::min({result_.summary.min_lambda, agents_[a].lambda_max, agents_[a].lambda_min});
        if (der_at_node_[a] != npos) update_compensator(der_at_node_[a]);
        push({now_ + sc_.lambda_update_period_ms, EventKind::LambdaUpdate, 0, 0, a});
    }

    void on_sample() {
        SampleRow row;
        row.time_s = now_s();
        row.v = solution_.magnitude;
        row.p_net = injections_.p;
        row.lambda_min.resize(n_);
        row.lambda_max.resize(n_);
        for (AgentId a = 0; a < n_; ++a) {
            row.lambda_min[a] = agents_[a].lambda_min;
            row.lambda_max[a] = agents_[a].lambda_max;
        }
        for (const auto& c : compensators_) {
            const auto applied = apply_compensation(c);
            row.delta_p.push_back(c.delta_p);
            row.delta_q.push_back(c.delta_q);
            row.p.push_back(applied.p);
            row.q.push_back(applied.q);
            result_.summary.max_abs_delta_q = std::max(result_.summary.max_abs_delta_q, std::abs(c.delta_q));
            result_.summary.max_abs_delta_p = std::max(result_.summary.max_abs_delta_p, std::abs(c.delta_p));
        }
        const double period_s = static_cast<double>(sc_.sample_period_ms) / 1000.0;
        for (NodeIndex i = 0; i < n_; ++i) {
            if (row.v[i] < sc_.v_min || row.v[i] > sc_.v_max) result_.summary.violation_seconds[i] += period_s;
        }
        result_.rows.push_back(std::move(row));
        push({now_ + sc_.sample_period_ms, EventKind::Sample});
    }

    const Scenario& sc_;
    const NetworkModel& net_;
    SimulationOptions options_;
    Topology topology_;
    std::size_t n_;

    SensitivityMatrix sens_;
    std::vector<CompensatorState> compensators_;
    std::vector<std::size_t> der_at_node_;
    std::vector<LagrangianState> agents_;
    std::vector<GossipAgent> gossip_;
    std::vector<Rng> drop_rng_;

    InjectionSet injections_;
    VoltageSolution solution_;
    bool solved_ = false;

    std::vector<Event> queue_;
    std::vector<GossipMessage> pool_;
    std::vector<std::size_t> free_slots_;
    std::uint64_t seq_ = 0;
    Rng shuffle_rng_{0};
    SimTimeMs now_ = 0;

    TimeSeriesResult result_;
};

}  // namespace

TimeSeriesResult run_simulation(const Scenario& scenario, const SimulationOptions& options) {
    scenario.validate();
    return Engine(scenario, options).run();
}

InjectionSet base_injections(const Scenario& scenario, double t_s) {
    InjectionSet inj = InjectionSet::zeros(scenario.network->size());
    add_loads(scenario, t_s, inj);
    for (const auto& d : scenario.ders) {
        inj.p[d.node] += available_pv(scenario, d, t_s);
        inj.q[d.node] += d.q_setpoint;
    }
    return inj;
}

std::vector<CompensatorState> compensators_at(const Scenario& scenario, double t_s) {
    std::vector<NodeIndex> der_nodes;
    for (const auto& d : scenario.ders) der_nodes.push_back(d.node);
    const auto sens = sensitivity_matrix(*scenario.network, der_nodes);
    std::vector<CompensatorState> out;
    for (std::size_t d = 0; d < scenario.ders.size(); ++d) {
        const auto& spec = scenario.ders[d];
        auto c = make_compensator(sens, d);
        c.c_p = spec.c_p;
        c.c_q = spec.c_q;
        c.s_rated = spec.s_rated;
        c.delta_q_min = spec.delta_q_min;
        c.delta_q_max = spec.delta_q_max;
        set_time_dependent(scenario, spec, t_s, c);
        out.push_back(std::move(c));
    }
    return out;
}

ControlSnapshot uncontrolled_snapshot(const Scenario& scenario, double t_s) {
    ControlSnapshot snap;
    snap.v0 = solve_bfs(*scenario.network, base_injections(scenario, t_s)).magnitude;
    snap.compensators = compensators_at(scenario, t_s);
    snap.v_min = scenario.v_min;
    snap.v_max = scenario.v_max;
    snap.alpha = scenario.alpha;
    return snap;
}

ControlSnapshot tangent_snapshot(const Scenario& scenario, const SampleRow& row) {
    ControlSnapshot snap;
    snap.compensators = compensators_at(scenario, row.time_s);
    if (row.v.size() != scenario.network->size() || row.delta_p.size() != snap.compensators.size() ||
        row.delta_q.size() != snap.compensators.size()) {
        throw Error(ErrorKind::SchemaMismatch, "sample row does not match the scenario");
    }
    const auto model = linearized_voltages(
        {std::vector<double>(row.v.size(), 0.0), snap.compensators, 0.0, 0.0, 0.0}, row.delta_p, row.delta_q);
    snap.v0.resize(row.v.size());
    for (NodeIndex i = 0; i < row.v.size(); ++i) snap.v0[i] = row.v[i] - model[i];
    snap.v_min = scenario.v_min;
    snap.v_max = scenario.v_max;
    snap.alpha = scenario.alpha;
    return snap;
}

std::optional<double> worst_violation_time(const Scenario& scenario, double grid_s) {
    std::optional<double> worst_t;
    double worst = 0.0;
    for (double t = scenario.start_s; t <= scenario.end_s + 1e-9; t += grid_s) {
        const auto v = solve_bfs(*scenario.network, base_injections(scenario, t)).magnitude;
        for (double m : v) {
            const double violation = std::max(m - scenario.v_max, scenario.v_min - m);
            if (violation > worst) {
                worst = violation;
                worst_t = t;
            }
        }
    }
    return worst_t;
}

bool correctable(const ControlSnapshot& snapshot) {
    bool under = false;
    bool over = false;
    for (double v : snapshot.v0) {
        under = under || v < snapshot.v_min;
        over = over || v > snapshot.v_max;
    }
    if (under && over) return false;
    // Sensitivities are nonnegative, so the box corner in the correcting
    // direction bounds what any feasible delta can achieve.
    std::vector<double> dp(snapshot.compensators.size());
    std::vector<double> dq(snapshot.compensators.size());
    for (std::size_t d = 0; d < dp.size(); ++d) {
        const auto& c = snapshot.compensators[d];
        dp[d] = over ? c.delta_p_min : 0.0;
        const Box box = reactive_box(c, dp[d]);
        dq[d] = over ? box.lo : box.hi;
    }
    for (double v : linearized_voltages(snapshot, dp, dq)) {
        if (v < snapshot.v_min - 1e-12 || v > snapshot.v_max + 1e-12) return false;
    }
    return true;
}

std::optional<double> calibration_time(const Scenario& scenario, double grid_s) {
    std::optional<double> best_t;
    double best = 0.0;
    for (double t = scenario.start_s; t <= scenario.end_s + 1e-9; t += grid_s) {
        const auto snap = uncontrolled_snapshot(scenario, t);
        double violation = 0.0;
        for (double m : snap.v0) violation = std::max({violation, m - scenario.v_max, scenario.v_min - m});
        if (violation > best && correctable(snap)) {
            best = violation;
            best_t = t;
        }
    }
    return best_t;
}

double calibrate_scenario_alpha(const Scenario& scenario) {
    const auto t = calibration_time(scenario);
    if (!t) throw Error(ErrorKind::InvalidScenario, "scenario has no correctable voltage violation");
    return calibrate_alpha(uncontrolled_snapshot(scenario, *t));
}

}  // namespace p2pvc
