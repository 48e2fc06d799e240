#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "p2pvc/simulation.hpp"

namespace p2pvc {

/// `time_s,V_<node>...,dP_<der>...,dQ_<der>...,lmin_<node>...,lmax_<node>...`
/// followed by `P_<der>...,Q_<der>...,Pnet_<node>...`; values as %.9g.
std::string result_header(const TimeSeriesResult& result);

void write_result_csv(const TimeSeriesResult& result, std::ostream& out);
void write_summary_csv(const TimeSeriesResult& result, std::ostream& out);

/// Path of the summary file written next to a result file:
/// `run.csv` -> `run.summary.csv`.
std::filesystem::path summary_path(const std::filesystem::path& result_path);

/// Writes the result to `path` and its summary next to it. Throws
/// Error(IoError).
void export_csv(const TimeSeriesResult& result, const std::filesystem::path& path);

/// Parses a result CSV written by export_csv (rows only; the summary keeps
/// its defaults). Throws Error(SchemaMismatch) on unexpected columns.
TimeSeriesResult read_result_csv(std::istream& in);
TimeSeriesResult read_result_csv(const std::filesystem::path& path);

/// DER ratings (pu) recorded in a summary file.
std::vector<double> read_summary_ratings(const std::filesystem::path& path);

/// Four CSV panels: aggregate net active power, uncontrolled voltages,
/// reactive compensation with +-limit lines, controlled voltages.
struct PlotPanels {
    std::string aggregate_power;
    std::string voltages_uncontrolled;
    std::string reactive_power;
    std::string voltages_controlled;
};

/// Throws Error(SchemaMismatch) if the two runs differ in nodes or times.
PlotPanels plot_data(const TimeSeriesResult& controlled, const TimeSeriesResult& uncontrolled,
                     double q_limit);

void write_plot_panels(const PlotPanels& panels, const std::filesystem::path& dir);

}  // namespace p2pvc
