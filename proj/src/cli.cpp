#include "p2pvc/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "p2pvc/control.hpp"
#include "p2pvc/error.hpp"
#include "p2pvc/powerflow.hpp"
#include "p2pvc/result_io.hpp"
#include "p2pvc/scenario.hpp"
#include "p2pvc/sensitivity.hpp"
#include "p2pvc/simulation.hpp"

namespace p2pvc {

namespace {

constexpr const char* kOutDirEnv = "P2PVC_OUT_DIR";

constexpr const char* kSchemaHelp = R"(File formats
  Network (JSON): {"v_base_volts": V, "s_base_va": S, "v_nom_pu": 1.0 (optional),
    "nodes": [{"id": ID, "kind": "slack"|"load", "der": DER_ID (optional)}],
    "branches": [{"from": ID, "to": ID, "r_ohm": R, "x_ohm": X}]}
    Unknown keys are rejected. Exactly one slack; branches must form a tree.
  Scenario (JSON): {"network": {...} | "network_file": PATH, "seed": N,
    "start_s": T0, "end_s": T1, "control_enabled": true, "v_min": 0.95, "v_max": 1.05,
    "alpha": A, "lambda_update_period_ms": 1000, "sample_period_ms": 1000,
    "power_factor": 0.85,
    "gossip": {"tick_ms": 100, "latency_ms": 100, "drop_probability": 0,
               "topology": "complete"|"electrical"|[[ID, ID], ...]},
    "profiles": {NAME: {"file": CSV | "samples": [[t, v], ...] | "synthetic": {...},
                        "interpolation": "linear"|"step", "unit": "watts"|"pu"}},
    "households": [{"node": ID, "profile": NAME, "power_factor": PF}],
    "ders": [{"der": DER_ID | "node": ID, "s_rated_va": S, "c_p": 4, "c_q": 1,
              "pv_profile": NAME, "q_setpoint_var": 0,
              "delta_q_min_var": -S, "delta_q_max_var": S}]}
  Profile CSV: header "time_s,value".
  Result CSV: time_s,V_<node>...,dP_<der>...,dQ_<der>...,lmin_<node>...,lmax_<node>...,
    P_<der>...,Q_<der>...,Pnet_<node>... (pu, %.9g); summary in <name>.summary.csv.
Precedence: command-line flag > scenario file > built-in default.
Environment: P2PVC_OUT_DIR is the default output directory for simulate.
Exit codes: 0 ok, 1 invalid input, 2 numerical failure.)";

std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::optional<std::filesystem::path> default_out_dir() {
    if (const char* dir = std::getenv(kOutDirEnv); dir && *dir) return std::filesystem::path(dir);
    return std::nullopt;
}

struct CommonOptions {
    std::optional<std::uint64_t> seed;
};

Scenario load_with_overrides(const std::string& path, const CommonOptions& common,
                             const std::optional<double>& alpha, const std::string& control) {
    Scenario sc = load_scenario_file(path);
    if (common.seed) sc.seed = *common.seed;
    if (alpha) sc.alpha = *alpha;
    if (control == "on") sc.control_enabled = true;
    if (control == "off") sc.control_enabled = false;
    sc.validate();
    return sc;
}

NetworkModel network_from(const std::string& network_path, const std::string& scenario_path,
                          std::vector<NodeIndex>* ders) {
    if (!network_path.empty()) {
        auto net = to_per_unit(load_network_file(network_path));
        if (ders) *ders = net.der_nodes();
        return net;
    }
    const auto sc = load_scenario_file(scenario_path);
    if (ders) {
        ders->clear();
        for (const auto& d : sc.ders) ders->push_back(d.node);
    }
    return *sc.network;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot write " + path);
    f << text;
}

std::string matrix_csv(const NetworkModel& net, const Matrix& m, const std::vector<NodeIndex>& ders) {
    std::string s = "node";
    for (NodeIndex d : ders) {
        s += ',';
        s += net.nodes()[d].der.value_or(net.nodes()[d].name);
    }
    s += '\n';
    for (NodeIndex n = 0; n < net.size(); ++n) {
        s += net.nodes()[n].name;
        for (std::size_t c = 0; c < ders.size(); ++c) s += ',' + fmt9(m(n, c));
        s += '\n';
    }
    return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Peer-to-peer voltage control simulator for radial distribution feeders", "p2pvc"};
    app.footer(kSchemaHelp);
    app.require_subcommand(1, 1);

    CommonOptions common;
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", common.seed, "RNG seed override (default: scenario seed)")
            ->check(CLI::NonNegativeNumber);
    };

    // simulate
    std::string sim_scenario, sim_out, sim_trace, sim_control;
    std::vector<std::uint64_t> sweep;
    unsigned threads = 1;
    std::optional<double> sim_alpha;
    auto* simulate = app.add_subcommand("simulate", "Run the closed-loop simulation");
    simulate->add_option("--scenario", sim_scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", sim_out,
                         "Result CSV (a directory with --sweep); default $P2PVC_OUT_DIR or stdout");
    simulate->add_option("--control", sim_control, "Override control: on|off")->check(CLI::IsMember({"on", "off"}));
    simulate->add_option("--alpha", sim_alpha, "Dual ascent step size override")->check(CLI::PositiveNumber);
    simulate->add_option("--trace", sim_trace, "Gossip delivery trace CSV");
    simulate->add_option("--sweep", sweep, "Run one simulation per listed seed")->delimiter(',');
    simulate->add_option("--threads", threads, "Worker threads for --sweep")->check(CLI::PositiveNumber);
    add_seed(simulate);

    // powerflow
    std::string pf_network, pf_scenario, pf_out;
    std::optional<double> pf_time;
    auto* powerflow = app.add_subcommand("powerflow", "Solve one power flow and print per-node voltages");
    auto* pf_net_opt = powerflow->add_option("--network", pf_network, "Network JSON (zero injections)")
                           ->check(CLI::ExistingFile);
    auto* pf_sc_opt = powerflow->add_option("--scenario", pf_scenario, "Scenario JSON (uncontrolled injections)")
                          ->check(CLI::ExistingFile);
    pf_net_opt->excludes(pf_sc_opt);
    powerflow->add_option("--time-s", pf_time, "Scenario time in seconds (default: start)");
    powerflow->add_option("--out", pf_out, "Output CSV (default stdout)");
    add_seed(powerflow);

    // sensitivity
    std::string sens_network, sens_scenario, sens_prefix;
    std::vector<std::string> sens_ders;
    auto* sensitivity = app.add_subcommand("sensitivity", "Dump the linear voltage sensitivities as CSV");
    auto* sn = sensitivity->add_option("--network", sens_network, "Network JSON")->check(CLI::ExistingFile);
    auto* ss = sensitivity->add_option("--scenario", sens_scenario, "Scenario JSON")->check(CLI::ExistingFile);
    sn->excludes(ss);
    sensitivity->add_option("--ders", sens_ders, "DER ids or node ids (default: all declared DERs)")->delimiter(',');
    sensitivity->add_option("--out-prefix", sens_prefix, "Write <prefix>_dv_dp.csv and <prefix>_dv_dq.csv");
    add_seed(sensitivity);

    // solve-snapshot
    std::string snap_scenario, snap_out;
    std::optional<double> snap_time, snap_alpha;
    bool calibrate = false;
    auto* solve = app.add_subcommand("solve-snapshot", "Centralized reference solve of one operating point");
    solve->add_option("--scenario", snap_scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    solve->add_option("--time-s", snap_time, "Snapshot time (default: worst uncontrolled violation, or the worst correctable one with --calibrate-alpha)");
    solve->add_option("--alpha", snap_alpha, "Step size override")->check(CLI::PositiveNumber);
    solve->add_flag("--calibrate-alpha", calibrate,
                    "Print the largest step size with monotone convergence at the snapshot");
    solve->add_option("--out", snap_out, "Output CSV (default stdout)");
    add_seed(solve);

    // plot-data
    std::string plot_run, plot_uncontrolled, plot_scenario, plot_out;
    std::optional<double> q_limit;
    auto* plot = app.add_subcommand("plot-data", "Write plot-ready panel CSVs from a controlled run");
    plot->add_option("--run", plot_run, "Controlled run CSV")->required()->check(CLI::ExistingFile);
    auto* pu = plot->add_option("--uncontrolled", plot_uncontrolled, "Paired control-off run CSV")
                   ->check(CLI::ExistingFile);
    auto* ps = plot->add_option("--scenario", plot_scenario, "Scenario to simulate the control-off pair from")
                   ->check(CLI::ExistingFile);
    pu->excludes(ps);
    plot->add_option("--q-limit", q_limit, "Reactive limit line in pu (default: largest DER rating)");
    plot->add_option("--out", plot_out, "Output directory")->required();
    add_seed(plot);

    std::vector<const char*> argv{"p2pvc"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (simulate->parsed()) {
            const std::string control = sim_control;
            Scenario base = load_with_overrides(sim_scenario, common, sim_alpha, control);
            if (!sweep.empty()) {
                std::filesystem::path dir = sim_out.empty() ? default_out_dir().value_or("") : std::filesystem::path(sim_out);
                if (dir.empty()) throw Error(ErrorKind::InvalidScenario, "--sweep needs --out DIR or " + std::string(kOutDirEnv));
                std::filesystem::create_directories(dir);
                std::atomic<std::size_t> next{0};
                std::mutex err_mutex;
                std::optional<Error> failure;
                auto worker = [&] {
                    for (std::size_t i = next++; i < sweep.size(); i = next++) {
                        try {
                            Scenario sc = base;
                            sc.seed = sweep[i];
                            export_csv(run_simulation(sc), dir / ("seed_" + std::to_string(sweep[i]) + ".csv"));
                        } catch (const Error& e) {
                            std::lock_guard lock(err_mutex);
                            if (!failure) failure = e;
                        }
                    }
                };
                std::vector<std::thread> pool;
                for (unsigned t = 0; t < std::max(1u, threads); ++t) pool.emplace_back(worker);
                for (auto& t : pool) t.join();
                if (failure) throw *failure;
                return 0;
            }
            std::ofstream trace_file;
            SimulationOptions options;
            if (!sim_trace.empty()) {
                trace_file.open(sim_trace, std::ios::binary);
                if (!trace_file) throw Error(ErrorKind::IoError, "cannot write " + sim_trace);
                options.trace = &trace_file;
            }
            const auto result = run_simulation(base, options);
            std::filesystem::path path = sim_out;
            if (path.empty()) {
                if (auto dir = default_out_dir()) {
                    std::filesystem::create_directories(*dir);
                    path = *dir / (std::filesystem::path(sim_scenario).stem().string() + ".csv");
                }
            }
            if (path.empty()) {
                write_result_csv(result, out);
            } else {
                export_csv(result, path);
            }
            err << "simulated " << result.rows.size() << " samples, " << result.summary.messages_sent
                << " messages\n";
            return 0;
        }

        if (powerflow->parsed()) {
            if (pf_network.empty() && pf_scenario.empty()) {
                throw Error(ErrorKind::InvalidScenario, "powerflow needs --network or --scenario");
            }
            std::optional<Scenario> sc;
            InjectionSet inj;
            NetworkModel net = [&] {
                if (!pf_network.empty()) return to_per_unit(load_network_file(pf_network));
                sc = load_scenario_file(pf_scenario);
                return *sc->network;
            }();
            inj = sc ? base_injections(*sc, pf_time.value_or(sc->start_s)) : InjectionSet::zeros(net.size());
            const auto sol = solve_bfs(net, inj);
            std::string text = "node,v_pu,angle_deg\n";
            for (NodeIndex n = 0; n < net.size(); ++n) {
                text += net.nodes()[n].name + ',' + fmt9(sol.magnitude[n]) + ',' +
                        fmt9(sol.angle[n] * 180.0 / 3.14159265358979323846) + '\n';
            }
            write_text(pf_out, text, out);
            err << "converged in " << sol.iterations << " sweeps\n";
            return 0;
        }

        if (sensitivity->parsed()) {
            if (sens_network.empty() && sens_scenario.empty()) {
                throw Error(ErrorKind::InvalidScenario, "sensitivity needs --network or --scenario");
            }
            std::vector<NodeIndex> ders;
            const auto net = network_from(sens_network, sens_scenario, &ders);
            if (!sens_ders.empty()) {
                ders.clear();
                for (const auto& id : sens_ders) {
                    if (auto n = net.find_der(id)) {
                        ders.push_back(*n);
                    } else if (auto m = net.find(id)) {
                        ders.push_back(*m);
                    } else {
                        throw Error(ErrorKind::UnknownDer, "unknown DER '" + id + "'");
                    }
                }
            }
            const auto s = sensitivity_matrix(net, ders);
            const auto dp = matrix_csv(net, s.dv_dp, ders);
            const auto dq = matrix_csv(net, s.dv_dq, ders);
            if (sens_prefix.empty()) {
                out << "# dv_dp\n" << dp << "\n# dv_dq\n" << dq;
            } else {
                write_text(sens_prefix + "_dv_dp.csv", dp, out);
                write_text(sens_prefix + "_dv_dq.csv", dq, out);
            }
            return 0;
        }

        if (solve->parsed()) {
            Scenario sc = load_with_overrides(snap_scenario, common, snap_alpha, "");
            double t = sc.start_s;
            if (snap_time) {
                t = *snap_time;
            } else if (auto worst = calibrate ? calibration_time(sc) : worst_violation_time(sc)) {
                t = *worst;
            }
            auto snap = uncontrolled_snapshot(sc, t);
            if (calibrate) {
                const double alpha = calibrate_alpha(snap);
                out << fmt9(alpha) << '\n';
                err << "calibrated at t=" << fmt9(t) << " s\n";
                return 0;
            }
            const auto res = centralized_solve(snap);
            std::string text = "der,delta_p,delta_q\n";
            for (std::size_t d = 0; d < sc.ders.size(); ++d) {
                text += sc.ders[d].name + ',' + fmt9(res.delta_p[d]) + ',' + fmt9(res.delta_q[d]) + '\n';
            }
            text += "\nnode,v0,v_linear,lambda_min,lambda_max\n";
            for (NodeIndex n = 0; n < sc.network->size(); ++n) {
                text += sc.network->nodes()[n].name + ',' + fmt9(snap.v0[n]) + ',' + fmt9(res.v_linear[n]) + ',' +
                        fmt9(res.lambda_min[n]) + ',' + fmt9(res.lambda_max[n]) + '\n';
            }
            write_text(snap_out, text, out);
            err << "t=" << fmt9(t) << " s, " << res.iterations << " iterations, "
                << (res.converged ? "converged" : "NOT converged") << '\n';
            if (!res.converged) {
                err << "NonConvergence: dual ascent did not reach tolerance; best iterate written\n";
                return 2;
            }
            return 0;
        }

        if (plot->parsed()) {
            const auto controlled = read_result_csv(std::filesystem::path(plot_run));
            TimeSeriesResult uncontrolled;
            std::vector<double> ratings;
            if (!plot_uncontrolled.empty()) {
                uncontrolled = read_result_csv(std::filesystem::path(plot_uncontrolled));
            } else if (!plot_scenario.empty()) {
                Scenario sc = load_with_overrides(plot_scenario, common, std::nullopt, "off");
                uncontrolled = run_simulation(sc);
                for (const auto& d : sc.ders) ratings.push_back(d.s_rated);
            } else {
                throw Error(ErrorKind::InvalidScenario, "plot-data needs --uncontrolled or --scenario");
            }
            double limit = 0.0;
            if (q_limit) {
                limit = *q_limit;
            } else {
                const auto summary = summary_path(plot_run);
                if (ratings.empty() && std::filesystem::exists(summary)) ratings = read_summary_ratings(summary);
                for (double r : ratings) limit = std::max(limit, r);
            }
            write_plot_panels(plot_data(controlled, uncontrolled, limit), plot_out);
            return 0;
        }
    } catch (const Error& e) {
        err << e.what() << '\n';
        return is_numerical(e.kind()) ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace p2pvc
