#ifndef WQED_RUNNER_HPP
#define WQED_RUNNER_HPP

#include "wqed/results.hpp"
#include "wqed/scenario.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wqed {

struct RunResult {
    RunSpec spec;
    Trajectory traj;
    ObservableSeries obs;
    double wall_seconds = 0.0;
    long kernel_evaluations = 0; // A + B evaluations of the table used (Volterra)
    std::size_t kernel_classes = 0;
    std::string file;            // CSV name inside the output directory
    std::string failure;         // observables could not be formed

    std::optional<double> max_norm_residual() const;
};

struct RunnerOptions {
    std::filesystem::path out_root = "wqed-out";
    std::optional<std::filesystem::path> kernel_cache;
    unsigned workers = 0; // 0: hardware concurrency
    bool write_files = true;
    bool quicklooks = true;
    std::vector<std::pair<std::string, std::string>> overrides; // recorded in the manifest
    VolterraOptions volterra;
};

struct ScenarioResult {
    std::string hash;
    std::filesystem::path dir;
    std::vector<RunResult> runs;
    double wall_seconds = 0.0;

    bool any_aborted() const;
};

// <root>/<name>-<first 12 hex digits of the scenario hash>
std::filesystem::path output_dir(const Scenario& s, const std::filesystem::path& root);

// Mode count for the oracle: enough that the field does not revive before t_max.
std::size_t oracle_mode_count(const ChainGeometry& geometry, double cutoff, double t_max);

// Runs one spec. Volterra runs need a kernel table covering the spec.
RunResult execute_run(const RunSpec& spec, const KernelTable* table = nullptr, const VolterraOptions& opts = {});

/*
 * Expands the scenario, builds one kernel table per distinct (model, geometry,
 * grid, cutoff), then runs everything on a pool of threads. With write_files
 * the manifest is written before the first run and finalized after the last,
 * next to one CSV per run and the quick-look SVGs.
 */
ScenarioResult run_scenario(const Scenario& s, const RunnerOptions& opts);

// Quick-look plots mirroring the figure panels; returns (file name, svg).
std::vector<std::pair<std::string, std::string>> quicklooks(const Scenario& s, const ScenarioResult& r);

} // namespace wqed

#endif
