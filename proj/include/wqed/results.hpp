#ifndef WQED_RESULTS_HPP
#define WQED_RESULTS_HPP

#include "wqed/dynamics.hpp"
#include "wqed/observables.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wqed {

/*
 * Series CSV:
 *   # units: omega0 = v_g = k0 = 1
 *   t,re_alpha_1,im_alpha_1,...,Pe_1,...,Pe_total,Nb,norm_residual,Gamma_inst_total
 * Values use 17 significant digits; quantities a solver does not produce are "nan".
 */
std::string csv_text(const Trajectory& traj, const ObservableSeries& obs);

// Writes atomically (temporary file + rename). Throws IoError naming the path.
void write_text(const std::filesystem::path& path, std::string_view text);

struct RunEntry {
    std::string file;
    std::string label;
    std::string solver;
    double gamma_ratio = 0.0;
    std::string status = "pending"; // pending, completed, aborted, failed
    std::size_t steps = 0;
    std::size_t last_valid_step = 0;
    std::string abort_reason;
    std::optional<double> max_norm_residual;
    double final_pe_total = 0.0;
    double wall_seconds = 0.0;
    long kernel_evaluations = 0;
};

struct RunManifest {
    std::string scenario_hash;
    std::string code_version;
    std::string state = "running"; // running, finished
    std::string scenario_text;     // canonical scenario document
    std::vector<std::pair<std::string, double>> pre_normalization_norms; // per setup label
    std::vector<std::pair<std::string, std::string>> overrides;           // flag, JSON value
    double wall_seconds = 0.0;
    std::vector<RunEntry> runs;
};

std::string manifest_text(const RunManifest& m);

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct Plot {
    std::string title;
    std::string x_label = "t [1/omega0]";
    std::string y_label;
    std::vector<PlotSeries> series;
    std::optional<std::pair<double, double>> x_range;
};

// Polyline plot with axes, ticks and a legend.
std::string svg_text(const Plot& plot);

} // namespace wqed

#endif
