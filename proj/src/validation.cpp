#include "wqed/validation.hpp"

#include "wqed/observables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace wqed {

namespace {

constexpr double pi = std::numbers::pi;

Check make(std::string name, double measured, double threshold, std::string detail = {})
{
    Check c{std::move(name), measured, threshold, "<", measured < threshold, std::move(detail)};
    return c;
}

Check make_range(std::string name, double measured, double lo, double hi)
{
    Check c;
    c.name = std::move(name);
    c.measured = measured;
    c.threshold = hi;
    char buf[64];
    std::snprintf(buf, sizeof buf, "in [%g, %g]", lo, hi);
    c.relation = buf;
    c.pass = measured >= lo && measured <= hi;
    return c;
}

double max_deviation(const Trajectory& a, const Trajectory& b, std::size_t stride_b = 1)
{
    double m = 0.0;
    for (std::size_t n = 0; n < a.steps() && n * stride_b < b.steps(); ++n)
        for (std::size_t i = 0; i < a.n_atoms; ++i)
            m = std::max(m, std::abs(a.alpha(n, i) - b.alpha(n * stride_b, i)));
    return m;
}

template <class Solve>
double halving_ratio(Solve solve)
{
    const double dts[3] = {0.01, 0.005, 0.0025};
    Trajectory r[3];
    for (int k = 0; k < 3; ++k)
        r[k] = solve(dts[k]);
    const double e0 = max_deviation(r[0], r[1], 2);
    const double e1 = max_deviation(r[1], r[2], 2);
    return e0 / e1;
}

const ChainGeometry& benchmark_pair()
{
    static const ChainGeometry g = ChainGeometry::uniform(2, 0.1 * pi);
    return g;
}

} // namespace

std::string format_check(const Check& c)
{
    char buf[512];
    if (c.relation == "<")
        std::snprintf(buf, sizeof buf, "[%s] %-44s measured %.4g  (threshold < %.4g)", c.pass ? "PASS" : "FAIL",
                      c.name.c_str(), c.measured, c.threshold);
    else
        std::snprintf(buf, sizeof buf, "[%s] %-44s measured %.4g  (required %s)", c.pass ? "PASS" : "FAIL",
                      c.name.c_str(), c.measured, c.relation.c_str());
    std::string out = buf;
    if (!c.detail.empty())
        out += "\n       " + c.detail;
    return out;
}

KernelGridResult kernel_grid_errors(double cutoff)
{
    // r = 1, phi = 1 lies on the light cone; r = 0 uses the self-kernel forms.
    const double rs[4] = {0.0, 0.1 * pi, 1.0, 2.0 * pi};
    const double phis[8] = {0.05, 0.3, 1.0, 2.5, 6.0, 10.0, 25.0, 48.0};
    KernelGridResult out;
    for (CouplingKind kind : {CouplingKind::Constant, CouplingKind::Linear}) {
        const CouplingModel m{kind};
        for (double r : rs)
            for (double phi : phis) {
                const bool special = r == 0.0 || r == phi;
                const cplx qa = kernel_A_quadrature(m, r, phi, cutoff).value;
                const cplx qb = kernel_B_quadrature(m, r, phi, cutoff).value;
                const double ea = std::abs(kernel_A(m, r, phi, cutoff) - qa) / std::abs(qa);
                const double eb = std::abs(kernel_B(m, r, phi, cutoff) - qb) / std::abs(qb);
                double& slot = special ? out.max_rel_error_special : out.max_rel_error;
                slot = std::max({slot, ea, eb});
                ++out.points;
            }
    }
    out.points /= 2;
    return out;
}

double oracle_deviation(std::size_t n_atoms, CouplingKind kind, const VolterraOptions& opts, std::string* detail)
{
    const CouplingModel model{kind};
    const PhysicalParams p{1e-2, 50.0};
    const ChainGeometry g = ChainGeometry::uniform(n_atoms, 0.1 * pi);
    std::vector<cplx> init(n_atoms, 0.0);
    init[0] = 1.0;
    const TimeGrid grid = TimeGrid::covering(30.0, 0.005);
    const KernelTable table = build_kernel_table(model, g.positions(), grid.dt, grid.n_steps, p.cutoff);
    const Trajectory v = solve_volterra(p, g, model, init, grid, table, opts);
    if (v.status == RunStatus::Aborted) {
        if (detail)
            *detail = v.abort_reason;
        return std::numeric_limits<double>::infinity();
    }
    const Trajectory o = solve_mode_oracle(p, g, model, init, grid, {});
    return max_deviation(v, o);
}

double volterra_convergence_ratio(CouplingKind kind, const VolterraOptions& opts)
{
    const CouplingModel model{kind};
    const PhysicalParams p{1e-2, 1e4};
    const std::vector<cplx> init{1.0, 0.0};
    VolterraOptions o = opts;
    o.photon_number = false;
    return halving_ratio([&](double dt) {
        const TimeGrid grid = TimeGrid::covering(5.0, dt);
        const KernelTable table = build_kernel_table(model, benchmark_pair().positions(), dt, grid.n_steps, p.cutoff);
        return solve_volterra(p, benchmark_pair(), model, init, grid, table, o);
    });
}

double dde_convergence_ratio()
{
    const PhysicalParams p{1e-2, 1e4};
    const std::vector<cplx> init{1.0, 0.0};
    return halving_ratio([&](double dt) { return solve_dde(p, benchmark_pair(), init, TimeGrid::covering(5.0, dt)); });
}

double reduction_chain_deviation()
{
    const PhysicalParams p{1e-2, 1e4};
    const ChainGeometry g = ChainGeometry::uniform(10, 0.1 * pi);
    const InitialState s = timed_dicke(g, 1.0);
    const TimeGrid grid = TimeGrid::covering(50.0, 0.005);
    const Trajectory d = solve_dde(p, g, s.amplitudes, grid, {true});
    const Trajectory m = solve_markov(p, g, s.amplitudes, grid);
    return max_deviation(d, m);
}

std::vector<Check> quick_checks(const VolterraOptions& opts)
{
    std::vector<Check> out;
    for (double cutoff : {50.0, 1e4}) {
        const KernelGridResult k = kernel_grid_errors(cutoff);
        char name[64];
        std::snprintf(name, sizeof name, "kernel grid, cutoff %g", cutoff);
        out.push_back(make(name, k.max_rel_error, 1e-9));
        std::snprintf(name, sizeof name, "kernel grid special points, cutoff %g", cutoff);
        out.push_back(make(name, k.max_rel_error_special, 1e-6));
    }
    for (CouplingKind kind : {CouplingKind::Constant, CouplingKind::Linear}) {
        std::string detail;
        const double dev = oracle_deviation(1, kind, opts, &detail);
        out.push_back(make("oracle equivalence N=1, " + std::string(to_string(kind)), dev, 1e-3, detail));
    }
    return out;
}

std::vector<Check> full_checks(const VolterraOptions& opts)
{
    std::vector<Check> out = quick_checks(opts);
    for (CouplingKind kind : {CouplingKind::Constant, CouplingKind::Linear}) {
        std::string detail;
        const double dev = oracle_deviation(2, kind, opts, &detail);
        out.push_back(make("oracle equivalence N=2, " + std::string(to_string(kind)), dev, 1e-3, detail));
    }
    for (CouplingKind kind : {CouplingKind::Constant, CouplingKind::Linear})
        out.push_back(make_range("convergence ratio volterra-" + std::string(to_string(kind)),
                                 volterra_convergence_ratio(kind, opts), 3.4, 4.6));
    out.push_back(make_range("convergence ratio dde", dde_convergence_ratio(), 3.4, 4.6));
    out.push_back(make("reduction chain dde(zero delay) vs markov", reduction_chain_deviation(), 1e-8));

    // Normalization on the twenty-atom chain.
    {
        const PhysicalParams p{1e-4, 1e4};
        const ChainGeometry g = ChainGeometry::uniform(20, 0.1 * pi);
        const InitialState s = timed_dicke(g, 1.0);
        const TimeGrid grid = TimeGrid::covering(10.0, 0.005);
        for (CouplingKind kind : {CouplingKind::Constant, CouplingKind::Linear}) {
            const CouplingModel m{kind};
            const KernelTable t = build_kernel_table(m, g.positions(), grid.dt, grid.n_steps, p.cutoff);
            const Trajectory v = solve_volterra(p, g, m, s.amplitudes, grid, t, opts);
            double worst = std::numeric_limits<double>::infinity();
            if (v.status == RunStatus::Completed) {
                worst = 0.0;
                for (double r : v.norm_residual)
                    worst = std::max(worst, std::abs(r));
            }
            out.push_back(make("normalization N=20, " + std::string(to_string(kind)), worst, 1e-3, v.abort_reason));
        }
    }

    // Zeno curvature: the fitted tau against 1/sqrt(gamma B(0,0)) on a grid
    // fine enough to resolve the 1/cutoff scale.
    for (CouplingKind kind : {CouplingKind::Constant, CouplingKind::Linear}) {
        const CouplingModel m{kind};
        const PhysicalParams p{1e-4, 1e4};
        const double dt = kind == CouplingKind::Constant ? 0.005 : 1e-6;
        const double horizon = kind == CouplingKind::Constant ? 0.05 : 1e-5;
        const ChainGeometry g = ChainGeometry::uniform(1, 0.0);
        const TimeGrid grid = TimeGrid::covering(horizon, dt);
        const KernelTable t = build_kernel_table(m, g.positions(), dt, grid.n_steps, p.cutoff);
        VolterraOptions o = opts;
        o.photon_number = false;
        const Trajectory v = solve_volterra(p, g, m, std::vector<cplx>{1.0}, grid, t, o);
        const ObservableSeries obs = population(v, p.gamma);
        const double predicted = zeno_kernel_prediction(m, p);
        double dev = std::numeric_limits<double>::infinity();
        std::string detail = v.abort_reason;
        if (v.status == RunStatus::Completed) {
            const ZenoFit f = fit_zeno(obs.times, obs.pe_total, horizon);
            dev = std::abs(f.tau - predicted) / predicted;
            char buf[160];
            std::snprintf(buf, sizeof buf, "fitted %.4g, curvature prediction %.4g, closed form %.4g", f.tau, predicted,
                          zeno_closed_form(m, p));
            detail = buf;
        }
        out.push_back(make("zeno curvature, " + std::string(to_string(kind)), dev, 0.02, detail));
    }
    return out;
}

} // namespace wqed
