#include "wqed/observables.hpp"

#include "wqed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wqed {

std::string_view to_string(StateKind kind)
{
    switch (kind) {
    case StateKind::SingleAtom:
        return "single_atom";
    case StateKind::TimedDicke:
        return "timed_dicke";
    case StateKind::Subradiant:
        return "subradiant";
    case StateKind::Custom:
        break;
    }
    return "custom";
}

std::string InitialState::label() const
{
    switch (kind) {
    case StateKind::SingleAtom:
        return "single_atom(" + std::to_string(atom_index + 1) + ")";
    case StateKind::TimedDicke:
        return "timed_dicke(k=" + std::to_string(k_over_k0) + ")";
    default:
        return std::string(to_string(kind));
    }
}

InitialState single_atom(const ChainGeometry& geometry, std::size_t index)
{
    if (index >= geometry.size())
        throw ConfigError("atom_index " + std::to_string(index + 1) + " outside 1.." + std::to_string(geometry.size()));
    InitialState s;
    s.kind = StateKind::SingleAtom;
    s.atom_index = index;
    s.amplitudes.assign(geometry.size(), 0.0);
    s.amplitudes[index] = 1.0;
    return s;
}

InitialState timed_dicke(const ChainGeometry& geometry, double k_over_k0)
{
    const std::size_t n = geometry.size();
    InitialState s;
    s.kind = StateKind::TimedDicke;
    s.k_over_k0 = k_over_k0;
    const double amp = 1.0 / std::sqrt(static_cast<double>(n));
    for (double x : geometry.positions())
        s.amplitudes.push_back(std::polar(amp, k_over_k0 * x));
    return s;
}

InitialState subradiant_state(const ChainGeometry& geometry, PhaseOrigin origin)
{
    const std::size_t n = geometry.size();
    if (n < 2)
        throw ConfigError("subradiant state needs N >= 2");
    const auto d = geometry.uniform_spacing();
    if (!d)
        throw ConfigError("subradiant state needs a uniform chain (k d undefined)");
    const double nn = static_cast<double>(n);
    const double k = std::numbers::pi * nn / (nn + 1.0) / *d;
    const double shift = (origin == PhaseOrigin::VirtualSite ? *d : 0.0) - geometry.positions().front();

    InitialState s;
    s.kind = StateKind::Subradiant;
    s.k_over_k0 = k;
    double norm2 = 0.0;
    for (double x : geometry.positions()) {
        // (e^{ikx} - e^{-ikx}) / sqrt(2N)
        const cplx a = cplx(0.0, 2.0 * std::sin(k * (x + shift))) / std::sqrt(2.0 * nn);
        s.amplitudes.push_back(a);
        norm2 += std::norm(a);
    }
    s.pre_normalization_norm = std::sqrt(norm2);
    for (cplx& a : s.amplitudes)
        a /= s.pre_normalization_norm;
    return s;
}

InitialState custom_state(std::vector<cplx> amplitudes)
{
    double norm2 = 0.0;
    for (const cplx& a : amplitudes)
        norm2 += std::norm(a);
    if (amplitudes.empty() || std::abs(norm2 - 1.0) > 1e-12)
        throw DomainError("custom initial state must have unit norm, got " + std::to_string(norm2));
    InitialState s;
    s.amplitudes = std::move(amplitudes);
    return s;
}

GammaInst gamma_inst(std::span<const double> p, double dt, std::size_t window)
{
    if (window % 2 == 0)
        throw DomainError("smoothing window must be odd and >= 1");
    if (!(dt > 0.0))
        throw DomainError("gamma_inst: dt must be positive");
    const std::size_t n = p.size();
    std::vector<double> lp(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(p[k] > 0.0))
            throw DomainError("gamma_inst: nonpositive population at index " + std::to_string(k));
        lp[k] = std::log(p[k]);
    }
    GammaInst out;
    out.rate.assign(n, 0.0);
    if (n < 3) {
        if (n == 2)
            out.rate[0] = out.rate[1] = -(lp[1] - lp[0]) / dt;
        return out;
    }
    const std::size_t half = window / 2;
    for (std::size_t k = 0; k < n; ++k) {
        double slope;
        if (k == 0) {
            slope = (-3.0 * lp[0] + 4.0 * lp[1] - lp[2]) / (2.0 * dt);
        } else if (k == n - 1) {
            slope = (3.0 * lp[n - 1] - 4.0 * lp[n - 2] + lp[n - 3]) / (2.0 * dt);
        } else {
            // Least-squares slope of a quadratic over a symmetric stencil.
            const std::size_t h = std::max<std::size_t>(1, std::min({half, k, n - 1 - k}));
            double num = 0.0, den = 0.0;
            for (std::size_t q = 1; q <= h; ++q) {
                num += static_cast<double>(q) * (lp[k + q] - lp[k - q]);
                den += 2.0 * static_cast<double>(q * q);
            }
            slope = num / (den * dt);
        }
        out.rate[k] = -slope;
        if (out.rate[k] < 0.0)
            out.negative_at.push_back(k);
    }
    return out;
}

ObservableSeries population(const Trajectory& traj, double gamma)
{
    ObservableSeries o;
    const std::size_t steps = traj.steps();
    const std::size_t na = traj.n_atoms;
    o.n_atoms = na;
    o.gamma = gamma;
    o.times.resize(steps);
    o.pe.resize(steps * na);
    o.pe_total.resize(steps);
    o.delta_pe.resize(steps * na);
    o.delta_pe_total.resize(steps);
    for (std::size_t n = 0; n < steps; ++n) {
        o.times[n] = traj.time(n);
        double tot = 0.0;
        for (std::size_t i = 0; i < na; ++i) {
            const double p = std::norm(traj.alpha(n, i));
            o.pe[n * na + i] = p;
            o.delta_pe[n * na + i] = (p - std::norm(traj.alpha(0, i))) / gamma;
            tot += p;
        }
        o.pe_total[n] = tot;
        o.delta_pe_total[n] = (tot - o.pe_total[0]) / gamma;
    }
    return o;
}

ObservableSeries observables(const Trajectory& traj, double gamma, std::size_t smoothing_window)
{
    ObservableSeries o = population(traj, gamma);
    const std::size_t steps = o.times.size();
    if (steps == 0)
        return o;
    const double dt = traj.grid.dt;
    GammaInst g = gamma_inst(o.pe_total, dt, smoothing_window);
    o.gamma_total = std::move(g.rate);
    for (double& v : o.gamma_total)
        v /= gamma;
    o.negative_total_at = std::move(g.negative_at);
    o.gamma_atom.resize(o.n_atoms);
    std::vector<double> pi(steps);
    for (std::size_t i = 0; i < o.n_atoms; ++i) {
        bool positive = true;
        for (std::size_t n = 0; n < steps; ++n) {
            pi[n] = o.pe[n * o.n_atoms + i];
            positive = positive && pi[n] > 0.0;
        }
        if (!positive)
            continue;
        o.gamma_atom[i] = gamma_inst(pi, dt, smoothing_window).rate;
        for (double& v : o.gamma_atom[i])
            v /= gamma;
    }
    return o;
}

double zeno_closed_form(const CouplingModel& model, const PhysicalParams& params)
{
    if (!(params.gamma > 0.0))
        throw ConfigError("gamma_ratio must be > 0");
    if (model.kind == CouplingKind::Constant)
        return std::sqrt(std::numbers::pi / (2.0 * params.gamma));
    if (!(params.cutoff > 1.0))
        throw ConfigError("cutoff must be > 1 for the linear model");
    return std::sqrt(std::numbers::pi / (2.0 * params.gamma * std::log(params.cutoff)));
}

double zeno_kernel_prediction(const CouplingModel& model, const PhysicalParams& params)
{
    params.validate();
    return 1.0 / std::sqrt(params.gamma * kernel_B(model, 0.0, 0.0, params.cutoff).real());
}

ZenoFit fit_zeno(std::span<const double> times, std::span<const double> p, double horizon)
{
    if (times.size() != p.size())
        throw DomainError("fit_zeno: times and populations differ in length");
    double num = 0.0, den = 0.0, scale = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < times.size() && times[k] <= horizon * (1.0 + 1e-12); ++k) {
        const double t2 = times[k] * times[k];
        num += t2 * (1.0 - p[k]);
        den += t2 * t2;
        scale = std::max(scale, std::abs(1.0 - p[k]));
        ++used;
    }
    if (used < 3 || !(num > 0.0))
        throw DomainError("fit_zeno: need at least three points with decaying population");
    const double c = num / den;
    ZenoFit f;
    f.tau = 1.0 / std::sqrt(c);
    f.points = used;
    double ss = 0.0;
    for (std::size_t k = 0; k < used; ++k) {
        const double e = p[k] - (1.0 - c * times[k] * times[k]);
        ss += e * e;
    }
    f.residual = std::sqrt(ss / static_cast<double>(used)) / scale;
    f.quadratic_regime_violated = f.residual > kZenoResidualLimit;
    return f;
}

} // namespace wqed
