#include "p2pvc/result_io.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "p2pvc/error.hpp"

namespace p2pvc {

namespace {

std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void append(std::string& line, const std::string& prefix, const std::vector<std::string>& names) {
    for (const auto& n : names) {
        line += ',';
        line += prefix;
        line += n;
    }
}

void append(std::string& line, const std::vector<double>& values) {
    for (double v : values) {
        line += ',';
        line += fmt9(v);
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    return out;
}

}  // namespace

std::string result_header(const TimeSeriesResult& r) {
    std::string h = "time_s";
    append(h, "V_", r.node_names);
    append(h, "dP_", r.der_names);
    append(h, "dQ_", r.der_names);
    append(h, "lmin_", r.node_names);
    append(h, "lmax_", r.node_names);
    append(h, "P_", r.der_names);
    append(h, "Q_", r.der_names);
    append(h, "Pnet_", r.node_names);
    return h;
}

void write_result_csv(const TimeSeriesResult& r, std::ostream& out) {
    out << result_header(r) << '\n';
    std::string line;
    for (const auto& row : r.rows) {
        line = fmt9(row.time_s);
        append(line, row.v);
        append(line, row.delta_p);
        append(line, row.delta_q);
        append(line, row.lambda_min);
        append(line, row.lambda_max);
        append(line, row.p);
        append(line, row.q);
        append(line, row.p_net);
        out << line << '\n';
    }
}

void write_summary_csv(const TimeSeriesResult& r, std::ostream& out) {
    const auto& s = r.summary;
    out << "metric,key,value\n";
    for (std::size_t i = 0; i < r.node_names.size() && i < s.violation_seconds.size(); ++i) {
        out << "violation_seconds," << r.node_names[i] << ',' << fmt9(s.violation_seconds[i]) << '\n';
    }
    for (std::size_t d = 0; d < r.der_names.size() && d < s.s_rated.size(); ++d) {
        out << "s_rated," << r.der_names[d] << ',' << fmt9(s.s_rated[d]) << '\n';
    }
    out << "max_abs_delta_q,," << fmt9(s.max_abs_delta_q) << '\n';
    out << "max_abs_delta_p,," << fmt9(s.max_abs_delta_p) << '\n';
    out << "messages_sent,," << s.messages_sent << '\n';
    out << "messages_dropped,," << s.messages_dropped << '\n';
    out << "power_flow_solves,," << s.power_flow_solves << '\n';
    out << "min_lambda,," << fmt9(s.min_lambda) << '\n';
    out << "max_capability_excess,," << fmt9(s.max_capability_excess) << '\n';
}

std::filesystem::path summary_path(const std::filesystem::path& result_path) {
    auto p = result_path;
    p.replace_extension(".summary.csv");
    return p;
}

void export_csv(const TimeSeriesResult& result, const std::filesystem::path& path) {
    {
        auto out = open_out(path);
        write_result_csv(result, out);
        if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
    }
    auto out = open_out(summary_path(path));
    write_summary_csv(result, out);
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + summary_path(path).string());
}

TimeSeriesResult read_result_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::SchemaMismatch, "result file is empty");
    const auto cols = split(line);
    if (cols.empty() || cols[0] != "time_s") throw Error(ErrorKind::SchemaMismatch, "first column must be time_s");

    TimeSeriesResult r;
    // Groups must appear in the order written by write_result_csv.
    const std::vector<std::string> prefixes{"V_", "dP_", "dQ_", "lmin_", "lmax_", "P_", "Q_", "Pnet_"};
    std::vector<std::size_t> group_of(cols.size(), 0);
    std::vector<std::vector<std::string>> names(prefixes.size());
    std::size_t group = 0;
    for (std::size_t c = 1; c < cols.size(); ++c) {
        std::size_t match = prefixes.size();
        for (std::size_t g = group; g < prefixes.size(); ++g) {
            if (cols[c].rfind(prefixes[g], 0) == 0) {
                match = g;
                break;
            }
        }
        if (match == prefixes.size()) throw Error(ErrorKind::SchemaMismatch, "unexpected column '" + cols[c] + "'");
        group = match;
        group_of[c] = match;
        names[match].push_back(cols[c].substr(prefixes[match].size()));
    }
    r.node_names = names[0];
    r.der_names = names[1];
    if (names[2] != r.der_names || names[3] != r.node_names || names[4] != r.node_names ||
        (!names[5].empty() && names[5] != r.der_names) || (!names[6].empty() && names[6] != r.der_names) ||
        (!names[7].empty() && names[7] != r.node_names)) {
        throw Error(ErrorKind::SchemaMismatch, "column groups disagree on node or DER names");
    }

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line);
        if (fields.size() != cols.size()) {
            throw Error(ErrorKind::SchemaMismatch, "line " + std::to_string(lineno) + " has " +
                                                       std::to_string(fields.size()) + " fields");
        }
        SampleRow row;
        std::vector<double>* target[] = {&row.v, &row.delta_p, &row.delta_q, &row.lambda_min,
                                         &row.lambda_max, &row.p, &row.q, &row.p_net};
        try {
            row.time_s = std::stod(fields[0]);
            for (std::size_t c = 1; c < fields.size(); ++c) target[group_of[c]]->push_back(std::stod(fields[c]));
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::SchemaMismatch, "malformed number on line " + std::to_string(lineno));
        }
        r.rows.push_back(std::move(row));
    }
    return r;
}

TimeSeriesResult read_result_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return read_result_csv(in);
}

std::vector<double> read_summary_ratings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::vector<double> ratings;
    std::string line;
    while (std::getline(in, line)) {
        const auto f = split(line);
        if (f.size() == 3 && f[0] == "s_rated") ratings.push_back(std::stod(f[2]));
    }
    return ratings;
}

PlotPanels plot_data(const TimeSeriesResult& controlled, const TimeSeriesResult& uncontrolled,
                     double q_limit) {
    if (controlled.node_names != uncontrolled.node_names || controlled.rows.size() != uncontrolled.rows.size()) {
        throw Error(ErrorKind::SchemaMismatch, "controlled and uncontrolled runs cover different nodes or times");
    }
    for (std::size_t i = 0; i < controlled.rows.size(); ++i) {
        if (controlled.rows[i].time_s != uncontrolled.rows[i].time_s) {
            throw Error(ErrorKind::SchemaMismatch, "runs disagree on sample times");
        }
    }
    auto voltages = [](const TimeSeriesResult& r) {
        std::string s = "time_s";
        append(s, "V_", r.node_names);
        s += '\n';
        for (const auto& row : r.rows) {
            s += fmt9(row.time_s);
            append(s, row.v);
            s += '\n';
        }
        return s;
    };

    PlotPanels panels;
    panels.aggregate_power = "time_s,P_net_total\n";
    panels.reactive_power = "time_s";
    append(panels.reactive_power, "dQ_", controlled.der_names);
    panels.reactive_power += ",q_limit_lower,q_limit_upper\n";
    for (const auto& row : controlled.rows) {
        double total = 0.0;
        for (double p : row.p_net) total += p;
        panels.aggregate_power += fmt9(row.time_s) + ',' + fmt9(total) + '\n';
        panels.reactive_power += fmt9(row.time_s);
        append(panels.reactive_power, row.delta_q);
        panels.reactive_power += ',' + fmt9(-q_limit) + ',' + fmt9(q_limit) + '\n';
    }
    panels.voltages_uncontrolled = voltages(uncontrolled);
    panels.voltages_controlled = voltages(controlled);
    return panels;
}

void write_plot_panels(const PlotPanels& panels, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string());
    const std::pair<const char*, const std::string*> files[] = {
        {"panel1_aggregate_power.csv", &panels.aggregate_power},
        {"panel2_voltages_uncontrolled.csv", &panels.voltages_uncontrolled},
        {"panel3_reactive_power.csv", &panels.reactive_power},
        {"panel4_voltages_controlled.csv", &panels.voltages_controlled},
    };
    for (const auto& [name, text] : files) {
        auto out = open_out(dir / name);
        out << *text;
        if (!out) throw Error(ErrorKind::IoError, "failed writing " + (dir / name).string());
    }
}

}  // namespace p2pvc
