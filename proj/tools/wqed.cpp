// wqed: run scenarios, reproduce figures, validate the solvers, compute Zeno times.

#include "wqed/errors.hpp"
#include "wqed/runner.hpp"
#include "wqed/scenario.hpp"
#include "wqed/validation.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

using namespace wqed;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfig = 2, kAbort = 3 };

constexpr const char* kOutEnv = "WQED_OUT";

std::filesystem::path default_root()
{
    if (const char* env = std::getenv(kOutEnv); env && *env)
        return env;
    return "wqed-out";
}

std::string json_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep))
        if (!item.empty())
            out.push_back(item);
    return out;
}

void print_summary(const ScenarioResult& r)
{
    std::printf("%-18s %-20s %-10s %14s %14s %10s\n", "run", "solver", "status", "Pe_total(end)", "max|norm res|",
                "wall [s]");
    for (const auto& run : r.runs) {
        const auto res = run.max_norm_residual();
        char resbuf[32] = "n/a";
        if (res)
            std::snprintf(resbuf, sizeof resbuf, "%.3e", *res);
        std::printf("%-18s %-20s %-10s %14.8f %14s %10.2f\n", run.spec.label.c_str(), run.spec.solver_tag().c_str(),
                    run.traj.status == RunStatus::Aborted ? "aborted" : "completed",
                    run.obs.pe_total.empty() ? 0.0 : run.obs.pe_total.back(), resbuf, run.wall_seconds);
        if (run.traj.status == RunStatus::Aborted)
            std::printf("    %s (last valid step %zu)\n", run.traj.abort_reason.c_str(), run.traj.last_valid_step);
        if (!run.failure.empty())
            std::printf("    %s\n", run.failure.c_str());
    }
    std::printf("output: %s  (hash %s, %.2f s)\n", r.dir.string().c_str(), r.hash.c_str(), r.wall_seconds);
}

struct RunFlags {
    std::string config;
    std::string preset;
    std::string out;
    std::optional<double> dt;
    std::optional<double> t_max;
    std::string solvers;
    unsigned workers = 0;
    std::string kernel_cache;
    bool no_svg = false;
};

int execute(Scenario s, const RunFlags& f)
{
    RunnerOptions opts;
    auto apply = [&](auto&& fn) {
        fn(s);
        for (auto& c : s.companions)
            fn(c);
    };
    if (f.dt) {
        apply([&](Scenario& x) { x.dt = *f.dt; });
        opts.overrides.emplace_back("dt", json_number(*f.dt));
    }
    if (f.t_max) {
        apply([&](Scenario& x) { x.t_max = *f.t_max; });
        opts.overrides.emplace_back("t_max", json_number(*f.t_max));
    }
    if (!f.solvers.empty()) {
        std::vector<SolverRequest> req;
        std::string list = "[";
        for (const auto& name : split(f.solvers, ',')) {
            req.push_back(SolverRequest::parse(name));
            list += (list.size() > 1 ? ",\"" : "\"") + name + "\"";
        }
        s.solvers = req;
        opts.overrides.emplace_back("solvers", list + "]");
    }
    validate(s);

    if (!f.out.empty()) {
        opts.out_root = f.out;
        opts.overrides.emplace_back("out", "\"" + f.out + "\"");
    } else if (!s.out_dir.empty()) {
        opts.out_root = s.out_dir;
    } else {
        opts.out_root = default_root();
    }
    opts.workers = f.workers;
    opts.quicklooks = !f.no_svg;
    if (!f.kernel_cache.empty())
        opts.kernel_cache = f.kernel_cache;

    const ScenarioResult r = run_scenario(s, opts);
    print_summary(r);
    return r.any_aborted() ? kAbort : kOk;
}

void add_run_flags(CLI::App* cmd, RunFlags& f)
{
    cmd->add_option("--out", f.out, std::string("Output root (default $") + kOutEnv + " or ./wqed-out)");
    cmd->add_option("--dt", f.dt, "Override the time step [1/omega0]");
    cmd->add_option("--tmax", f.t_max, "Override the final time [1/omega0]");
    cmd->add_option("--solvers", f.solvers, "Override the solver list, comma separated (volterra-constant,dde,...)");
    cmd->add_option("--workers", f.workers, "Worker threads (0 = one per core)");
    cmd->add_option("--kernel-cache", f.kernel_cache, "Directory for cached kernel tables");
    cmd->add_flag("--no-svg", f.no_svg, "Skip the quick-look plots");
}

int cmd_zeno(const std::string& model_name, double gamma, double cutoff, bool fit, double dt, double horizon)
{
    const CouplingModel model{coupling_kind_from_string(model_name)};
    const PhysicalParams p{gamma, cutoff};
    const double closed = zeno_closed_form(model, p);
    p.validate();
    std::printf("tau_Z (closed form)        = %.6g [1/omega0]\n", closed);
    std::printf("tau_Z (kernel curvature)   = %.6g [1/omega0]\n", zeno_kernel_prediction(model, p));
    if (!fit)
        return kOk;
    if (!(dt > 0.0) || !(horizon > 0.0))
        throw ConfigError("--dt and --horizon must be > 0");
    const ChainGeometry g = ChainGeometry::uniform(1, 0.0);
    const TimeGrid grid = TimeGrid::covering(horizon, dt);
    const KernelTable table = build_kernel_table(model, g.positions(), dt, grid.n_steps, cutoff);
    VolterraOptions o;
    o.photon_number = false;
    const Trajectory traj = solve_volterra(p, g, model, std::vector<cplx>{1.0}, grid, table, o);
    if (traj.status == RunStatus::Aborted)
        throw NumericAbort(traj.abort_reason, static_cast<long>(traj.last_valid_step));
    const ObservableSeries obs = population(traj, gamma);
    const ZenoFit f = fit_zeno(obs.times, obs.pe_total, horizon);
    std::printf("tau_Z (fit, t <= %g, dt %g) = %.6g [1/omega0]  (%zu points, residual %.3g)\n", horizon, dt, f.tau,
                f.points, f.residual);
    std::printf("relative deviation from closed form: %.4f\n", std::abs(f.tau - closed) / closed);
    if (f.quadratic_regime_violated)
        std::printf("warning: quadratic regime violated (residual %.3g > %.3g); shorten --horizon\n", f.residual,
                    kZenoResidualLimit);
    return kOk;
}

int cmd_validate(const std::string& level, bool tamper)
{
    VolterraOptions opts;
    if (tamper) {
        opts.sign = -1.0;
        std::printf("note: memory-term sign flipped (--tamper-sign)\n");
    }
    const std::vector<Check> checks = level == "full" ? full_checks(opts) : quick_checks(opts);
    bool ok = true;
    for (const auto& c : checks) {
        std::printf("%s\n", format_check(c).c_str());
        ok = ok && c.pass;
    }
    std::printf("%s: %s\n", level.c_str(), ok ? "all checks passed" : "FAILED");
    return ok ? kOk : kCheckFailed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"wqed: single-excitation dynamics of an atom chain coupled to a waveguide"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "Run a scenario file or preset");
    auto* config_opt = run->add_option("--config", run_flags.config, "Scenario JSON file");
    auto* preset_opt = run->add_option("--preset", run_flags.preset, "Preset name (fig1bc, fig2ab, fig2cd, fig2e, fig3, spfig)");
    config_opt->excludes(preset_opt);
    add_run_flags(run, run_flags);

    RunFlags repro_flags;
    std::string figure;
    auto* repro = app.add_subcommand("reproduce", "Run a figure preset and write its quick-look plots");
    repro->add_option("--figure", figure, "Figure id (fig1b, fig2a, ..., fig3, spfig)")->required();
    add_run_flags(repro, repro_flags);

    std::string zeno_model = "constant";
    double zeno_gamma = 1e-4, zeno_cutoff = 1e4, zeno_dt = 0.005, zeno_horizon = 0.2;
    bool zeno_fit = false;
    auto* zeno = app.add_subcommand("zeno", "Zeno time from the short-time expansion");
    zeno->add_option("--model", zeno_model, "constant or linear")->capture_default_str();
    zeno->add_option("--gamma", zeno_gamma, "Gamma0 / omega0")->capture_default_str();
    zeno->add_option("--cutoff", zeno_cutoff, "Lambda / k0")->capture_default_str();
    zeno->add_flag("--fit-from-run", zeno_fit, "Also fit a short single-atom run");
    zeno->add_option("--dt", zeno_dt, "Time step of the fitted run")->capture_default_str();
    zeno->add_option("--horizon", zeno_horizon, "Fit window [0, horizon]")->capture_default_str();

    std::string level = "quick";
    bool tamper = false;
    auto* val = app.add_subcommand("validate", "Kernel, oracle, convergence and reduction checks");
    val->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}))->capture_default_str();
    val->add_flag("--tamper-sign", tamper, "Flip the memory-term sign (the checks must then fail)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*run) {
            if (run_flags.config.empty() == run_flags.preset.empty())
                throw ConfigError("run needs exactly one of --config or --preset");
            Scenario s = run_flags.config.empty() ? preset(run_flags.preset) : load_scenario(run_flags.config);
            return execute(std::move(s), run_flags);
        }
        if (*repro)
            return execute(preset(figure), repro_flags);
        if (*zeno)
            return cmd_zeno(zeno_model, zeno_gamma, zeno_cutoff, zeno_fit, zeno_dt, zeno_horizon);
        if (*val)
            return cmd_validate(level, tamper);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kConfig;
    } catch (const NumericAbort& e) {
        std::fprintf(stderr, "numeric abort: %s (last valid step %ld)\n", e.what(), e.last_valid_step());
        return kAbort;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "domain error: %s\n", e.what());
        return kConfig;
    }
    return kOk;
}
