#include "wqed/runner.hpp"

#include "wqed/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <thread>
#include <tuple>

namespace wqed {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Tables depend on the coupling model, positions, grid and cutoff, not on gamma.
using TableKey = std::tuple<int, std::vector<double>, double, std::size_t, double>;

TableKey table_key(const RunSpec& r)
{
    return {static_cast<int>(r.model.kind), r.geometry.positions(), r.grid.dt, r.grid.n_steps, r.params.cutoff};
}

void parallel_for(std::size_t n, unsigned workers, const auto& body)
{
    if (workers == 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k)
            body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < n; k = next++) {
                try {
                    body(k);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

RunEntry entry_of(const RunResult& r)
{
    RunEntry e;
    e.file = r.file;
    e.label = r.spec.label;
    e.solver = r.spec.solver_tag();
    e.gamma_ratio = r.spec.params.gamma;
    e.steps = r.traj.steps();
    e.last_valid_step = r.traj.last_valid_step;
    e.status = r.traj.status == RunStatus::Aborted ? "aborted" : "completed";
    e.abort_reason = r.traj.abort_reason;
    if (!r.failure.empty()) {
        e.status = "failed";
        e.abort_reason = r.failure;
    }
    e.max_norm_residual = r.max_norm_residual();
    e.final_pe_total = r.obs.pe_total.empty() ? 0.0 : r.obs.pe_total.back();
    e.wall_seconds = r.wall_seconds;
    e.kernel_evaluations = r.kernel_evaluations;
    return e;
}

} // namespace

std::optional<double> RunResult::max_norm_residual() const
{
    if (traj.norm_residual.empty())
        return std::nullopt;
    double m = 0.0;
    for (double v : traj.norm_residual)
        m = std::max(m, std::abs(v));
    return m;
}

bool ScenarioResult::any_aborted() const
{
    return std::any_of(runs.begin(), runs.end(), [](const RunResult& r) { return r.traj.status == RunStatus::Aborted; });
}

std::filesystem::path output_dir(const Scenario& s, const std::filesystem::path& root)
{
    return root / (s.name + "-" + scenario_hash(s).substr(0, 12));
}

std::size_t oracle_mode_count(const ChainGeometry& geometry, double cutoff, double t_max)
{
    const double span = geometry.positions().back() - geometry.positions().front();
    const double need = 1.25 * (2.0 * t_max + span) * cutoff / std::numbers::pi;
    return std::max<std::size_t>(8000, static_cast<std::size_t>(std::ceil(need)));
}

RunResult execute_run(const RunSpec& spec, const KernelTable* table, const VolterraOptions& opts)
{
    RunResult r;
    r.spec = spec;
    r.file = spec.file_stem() + ".csv";
    const auto t0 = Clock::now();
    const auto& init = spec.initial.amplitudes;
    switch (spec.solver.kind) {
    case SolverKind::Volterra:
        if (!table)
            throw DomainError("volterra run " + spec.file_stem() + " needs a kernel table");
        r.traj = solve_volterra(spec.params, spec.geometry, spec.model, init, spec.grid, *table, opts);
        r.kernel_evaluations = table->evaluations_A + table->evaluations_B;
        r.kernel_classes = table->n_classes();
        break;
    case SolverKind::Dde:
        r.traj = solve_dde(spec.params, spec.geometry, init, spec.grid);
        break;
    case SolverKind::Markov:
        r.traj = solve_markov(spec.params, spec.geometry, init, spec.grid);
        break;
    case SolverKind::Oracle: {
        OracleOptions o;
        o.n_modes = oracle_mode_count(spec.geometry, spec.params.cutoff, spec.grid.t_max());
        r.traj = solve_mode_oracle(spec.params, spec.geometry, spec.model, init, spec.grid, o);
        break;
    }
    }
    r.wall_seconds = seconds_since(t0);
    try {
        r.obs = observables(r.traj, spec.params.gamma, spec.smoothing_window);
    } catch (const DomainError& e) {
        // Populations reaching zero leave Gamma_inst undefined; P_e stays usable.
        r.obs = population(r.traj, spec.params.gamma);
        r.failure = std::string("Gamma_inst undefined: ") + e.what();
    }
    return r;
}

ScenarioResult run_scenario(const Scenario& s, const RunnerOptions& opts)
{
    const auto t0 = Clock::now();
    const std::vector<RunSpec> specs = expand_runs(s);

    ScenarioResult out;
    out.hash = scenario_hash(s);
    out.dir = output_dir(s, opts.out_root);

    RunManifest manifest;
    manifest.scenario_hash = out.hash;
    manifest.code_version = std::string(kCodeVersion);
    manifest.scenario_text = serialize_scenario(s);
    manifest.overrides = opts.overrides;
    for (const auto& spec : specs) {
        auto& norms = manifest.pre_normalization_norms;
        if (std::none_of(norms.begin(), norms.end(), [&](const auto& p) { return p.first == spec.label; }))
            norms.emplace_back(spec.label, spec.initial.pre_normalization_norm);
        RunEntry e;
        e.file = spec.file_stem() + ".csv";
        e.label = spec.label;
        e.solver = spec.solver_tag();
        e.gamma_ratio = spec.params.gamma;
        manifest.runs.push_back(e);
    }
    if (opts.write_files)
        write_text(out.dir / "manifest.json", manifest_text(manifest));

    std::map<TableKey, KernelTable> tables;
    std::vector<const RunSpec*> needs;
    for (const auto& spec : specs)
        if (spec.solver.kind == SolverKind::Volterra && tables.emplace(table_key(spec), KernelTable{}).second)
            needs.push_back(&spec);
    parallel_for(needs.size(), opts.workers, [&](std::size_t k) {
        const RunSpec& r = *needs[k];
        KernelTable& t = tables.at(table_key(r));
        t = opts.kernel_cache ? cached_kernel_table(*opts.kernel_cache, r.model, r.geometry.positions(), r.grid.dt,
                                                    r.grid.n_steps, r.params.cutoff)
                              : build_kernel_table(r.model, r.geometry.positions(), r.grid.dt, r.grid.n_steps,
                                                   r.params.cutoff);
    });

    out.runs.resize(specs.size());
    parallel_for(specs.size(), opts.workers, [&](std::size_t k) {
        const RunSpec& spec = specs[k];
        const KernelTable* table = spec.solver.kind == SolverKind::Volterra ? &tables.at(table_key(spec)) : nullptr;
        out.runs[k] = execute_run(spec, table, opts.volterra);
        out.runs[k].traj.scenario_hash = out.hash;
        if (opts.write_files)
            write_text(out.dir / out.runs[k].file, csv_text(out.runs[k].traj, out.runs[k].obs));
    });

    if (opts.write_files && opts.quicklooks)
        for (const auto& [name, svg] : quicklooks(s, out))
            write_text(out.dir / name, svg);

    out.wall_seconds = seconds_since(t0);
    if (opts.write_files) {
        manifest.state = "finished";
        manifest.wall_seconds = out.wall_seconds;
        for (std::size_t k = 0; k < out.runs.size(); ++k)
            manifest.runs[k] = entry_of(out.runs[k]);
        write_text(out.dir / "manifest.json", manifest_text(manifest));
    }
    return out;
}

// --- quick-looks -----------------------------------------------------------

namespace {

std::vector<double> column(const ObservableSeries& o, const std::vector<double>& flat, std::size_t atom)
{
    std::vector<double> out(o.times.size());
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n] = flat[n * o.n_atoms + atom];
    return out;
}

std::string gamma_text(double g)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", g);
    return buf;
}

} // namespace

std::vector<std::pair<std::string, std::string>> quicklooks(const Scenario& s, const ScenarioResult& r)
{
    std::vector<std::pair<std::string, std::string>> files;
    auto setup_of = [&](std::size_t k) -> const Scenario& { return k == 0 ? s : s.companions[k - 1]; };

    // Runs grouped by label in expansion order.
    std::vector<std::string> labels;
    for (const auto& run : r.runs)
        if (std::find(labels.begin(), labels.end(), run.spec.label) == labels.end())
            labels.push_back(run.spec.label);

    for (const auto& label : labels) {
        std::vector<const RunResult*> group;
        for (const auto& run : r.runs)
            if (run.spec.label == label)
                group.push_back(&run);
        const RunSpec& first = group.front()->spec;
        const Scenario& setup = setup_of(first.setup);
        const std::string tag = setup.name + ", N = " + std::to_string(first.geometry.size()) +
                                ", Gamma0/omega0 = " + gamma_text(first.params.gamma);

        Plot g{"Gamma_inst (total), " + tag, "t [1/omega0]", "Gamma_inst / Gamma0", {}, setup.plot_window};
        Plot d{"Delta P_e (total), " + tag, "t [1/omega0]", "Delta P_e / (Gamma0/omega0)", {}, setup.plot_window};
        for (const RunResult* run : group) {
            if (!run->obs.gamma_total.empty())
                g.series.push_back({run->spec.solver_tag(), run->obs.times, run->obs.gamma_total});
            d.series.push_back({run->spec.solver_tag(), run->obs.times, run->obs.delta_pe_total});
        }
        files.emplace_back(label + "__gamma_inst_total.svg", svg_text(g));
        files.emplace_back(label + "__delta_pe_total.svg", svg_text(d));

        const std::size_t n = first.geometry.size();
        if (n > 1) {
            std::vector<std::size_t> atoms{1, (n + 1) / 2, n};
            atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
            for (std::size_t a : atoms) {
                const std::string an = "atom " + std::to_string(a);
                Plot ga{"Gamma_inst, " + an + ", " + tag, "t [1/omega0]", "Gamma_inst / Gamma0", {}, setup.plot_window};
                Plot da{"Delta P_e, " + an + ", " + tag, "t [1/omega0]", "Delta P_e / (Gamma0/omega0)", {},
                        setup.plot_window};
                for (const RunResult* run : group) {
                    if (a - 1 < run->obs.gamma_atom.size() && !run->obs.gamma_atom[a - 1].empty())
                        ga.series.push_back({run->spec.solver_tag(), run->obs.times, run->obs.gamma_atom[a - 1]});
                    da.series.push_back({run->spec.solver_tag(), run->obs.times, column(run->obs, run->obs.delta_pe, a - 1)});
                }
                files.emplace_back(label + "__atom" + std::to_string(a) + "_gamma_inst.svg", svg_text(ga));
                files.emplace_back(label + "__atom" + std::to_string(a) + "_delta_pe.svg", svg_text(da));
            }
        }
    }

    // Several gamma values of one setup: rescaled curves per solver on one plot.
    for (std::size_t k = 0; k <= s.companions.size(); ++k) {
        const Scenario& setup = setup_of(k);
        if (setup.gamma_ratios.size() < 2)
            continue;
        std::vector<std::string> tags;
        for (const auto& run : r.runs)
            if (run.spec.setup == k && std::find(tags.begin(), tags.end(), run.spec.solver_tag()) == tags.end())
                tags.push_back(run.spec.solver_tag());
        for (const auto& tag : tags) {
            Plot p{"Gamma_inst (total) for several Gamma0, " + setup.name + ", " + tag, "t [1/omega0]",
                   "Gamma_inst / Gamma0", {}, setup.plot_window};
            Plot q{"Delta P_e (total) for several Gamma0, " + setup.name + ", " + tag, "t [1/omega0]",
                   "Delta P_e / (Gamma0/omega0)", {}, setup.plot_window};
            for (const auto& run : r.runs) {
                if (run.spec.setup != k || run.spec.solver_tag() != tag)
                    continue;
                const std::string name = "gamma = " + gamma_text(run.spec.params.gamma);
                if (!run.obs.gamma_total.empty())
                    p.series.push_back({name, run.obs.times, run.obs.gamma_total});
                q.series.push_back({name, run.obs.times, run.obs.delta_pe_total});
            }
            const std::string prefix = k ? "c" + std::to_string(k) + "_" : "";
            files.emplace_back(prefix + setup.name + "__" + tag + "__gamma_inst_collapse.svg", svg_text(p));
            files.emplace_back(prefix + setup.name + "__" + tag + "__delta_pe_collapse.svg", svg_text(q));
        }
    }
    return files;
}

} // namespace wqed
