// Acceptance suite: one line per criterion, exit status 0 when every
// criterion passes except the documented known failures.

#include "wqed/observables.hpp"
#include "wqed/runner.hpp"
#include "wqed/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

using namespace wqed;

namespace {

constexpr double pi = std::numbers::pi;

// Criteria that fail for a documented reason (see README).
const std::set<int> kKnownFailures{4};

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ScenarioResult run(const Scenario& s)
{
    RunnerOptions o;
    o.write_files = false;
    o.quicklooks = false;
    return run_scenario(s, o);
}

const RunResult& find(const ScenarioResult& r, std::size_t setup, double gamma, const std::string& tag)
{
    for (const auto& x : r.runs)
        if (x.spec.setup == setup && x.spec.params.gamma == gamma && x.spec.solver_tag() == tag)
            return x;
    throw std::runtime_error("missing run " + tag);
}

const ObservableSeries& obs(const ScenarioResult& r, std::size_t setup, double gamma, const std::string& tag)
{
    const RunResult& x = find(r, setup, gamma, tag);
    if (x.traj.status != RunStatus::Completed || !x.failure.empty())
        throw std::runtime_error(x.file + " did not complete: " + x.traj.abort_reason + x.failure);
    return x.obs;
}

const std::vector<std::string> kThreeWay{"volterra-constant", "volterra-linear", "dde"};

double max_pairwise(const std::vector<const std::vector<double>*>& s, double t_lo, double t_hi,
                    const std::vector<double>& times)
{
    double worst = 0.0;
    for (std::size_t n = 0; n < times.size(); ++n) {
        if (times[n] < t_lo || times[n] > t_hi)
            continue;
        for (std::size_t a = 0; a < s.size(); ++a)
            for (std::size_t b = a + 1; b < s.size(); ++b)
                worst = std::max(worst, std::abs((*s[a])[n] - (*s[b])[n]));
    }
    return worst;
}

Outcome c1()
{
    const auto t0 = std::chrono::steady_clock::now();
    double generic = 0.0, special = 0.0;
    for (double cutoff : {50.0, 1e4}) {
        const KernelGridResult g = kernel_grid_errors(cutoff);
        generic = std::max(generic, g.max_rel_error);
        special = std::max(special, g.max_rel_error_special);
    }
    const double wall = seconds_since(t0);
    return {generic < 1e-9 && special < 1e-6,
            fmt("generic %.2e (< 1e-9), special %.2e (< 1e-6), %.1f s", generic, special, wall)};
}

Outcome c2()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string detail;
    for (std::size_t n : {1u, 2u})
        for (CouplingKind k : {CouplingKind::Constant, CouplingKind::Linear})
            worst = std::max(worst, oracle_deviation(n, k, {}, &detail));
    const double wall = seconds_since(t0);
    return {worst < 1e-3 && wall <= 120.0, fmt("max |dalpha| %.2e (< 1e-3), %.1f s (<= 120 s)%s", worst, wall,
                                               detail.empty() ? "" : (" " + detail).c_str())};
}

Outcome c3(const std::vector<const ScenarioResult*>& fig2)
{
    double worst = 0.0;
    std::size_t runs = 0;
    for (const ScenarioResult* r : fig2)
        for (const auto& x : r->runs)
            if (auto m = x.max_norm_residual()) {
                worst = std::max(worst, *m);
                ++runs;
            }
    return {runs > 0 && worst < 1e-3, fmt("max |norm residual| %.2e over %zu Volterra runs (< 1e-3)", worst, runs)};
}

Outcome c4()
{
    bool pass = true;
    std::string detail;
    for (CouplingKind kind : {CouplingKind::Constant, CouplingKind::Linear}) {
        const CouplingModel m{kind};
        const PhysicalParams p{1e-4, 1e4};
        const auto g = ChainGeometry::uniform(1, 0.0);
        const auto grid = TimeGrid::covering(0.2, 0.005);
        const KernelTable t = build_kernel_table(m, g.positions(), grid.dt, grid.n_steps, p.cutoff);
        const ObservableSeries o = population(solve_volterra(p, g, m, std::vector<cplx>{1.0}, grid, t), p.gamma);
        const ZenoFit f = fit_zeno(o.times, o.pe_total);
        const double ref = zeno_closed_form(m, p);
        const double rel = std::abs(f.tau - ref) / ref;
        pass = pass && rel < 0.05;
        detail += fmt("%s tau %.2f vs %.2f (%.1f%%, < 5%%; kernel curvature %.2f)%s; ", to_string(kind).data(), f.tau,
                      ref, 100.0 * rel, zeno_kernel_prediction(m, p),
                      f.quadratic_regime_violated ? " quadratic regime violated" : "");
    }
    return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome c5(const ScenarioResult& r)
{
    bool pass = true;
    double peak_lo = 1e300, peak_hi = 0.0, amp_min = 1e300;
    const std::vector<double> gammas{1e-2, 1e-3, 1e-6};
    std::vector<const ObservableSeries*> s;
    for (double g : gammas) {
        const ObservableSeries& o = obs(r, 0, g, "volterra-constant");
        s.push_back(&o);
        const double peak = *std::max_element(o.gamma_total.begin(), o.gamma_total.end());
        peak_lo = std::min(peak_lo, peak);
        peak_hi = std::max(peak_hi, peak);
        double lo = 1e300, hi = -1e300;
        for (std::size_t n = 0; n < o.times.size(); ++n)
            if (o.times[n] >= 45.0) {
                lo = std::min(lo, o.gamma_total[n]);
                hi = std::max(hi, o.gamma_total[n]);
            }
        amp_min = std::min(amp_min, 0.5 * (hi - lo));
        pass = pass && peak >= 1.3 && peak <= 1.5 && lo < 1.0 && hi > 1.0;
    }
    const double collapse = max_pairwise({&s[0]->gamma_total, &s[1]->gamma_total, &s[2]->gamma_total}, 0.0, 50.0,
                                         s[0]->times);
    pass = pass && amp_min > 1e-4 && collapse < 0.05;
    return {pass, fmt("peaks %.3f..%.3f (in [1.3, 1.5]), oscillation at t in [45, 50] straddles 1 with amplitude >= "
                      "%.2e, collapse %.4f (< 0.05)",
                      peak_lo, peak_hi, amp_min, collapse)};
}

Outcome c6(const ScenarioResult& r)
{
    const double g = 1e-4;
    const ObservableSeries& d = obs(r, 0, g, "dde");
    const double spacing = 0.1 * pi;
    const double dt = d.times[1] - d.times[0];
    // Flat between retardation multiples; the change happens across them.
    double spread = 0.0, max_jump = 0.0, jumps = 0.0;
    for (int m = 0; m < 19; ++m) {
        const double a = m * spacing, b = (m + 1) * spacing;
        double lo = 1e300, hi = -1e300;
        for (std::size_t n = 0; n < d.times.size(); ++n)
            if (d.times[n] > a + 2.5 * dt && d.times[n] < b - 2.5 * dt) {
                lo = std::min(lo, d.gamma_total[n]);
                hi = std::max(hi, d.gamma_total[n]);
            }
        spread = std::max(spread, hi - lo);
        const std::size_t before = static_cast<std::size_t>(std::floor(b / dt)) - 1;
        const std::size_t after = static_cast<std::size_t>(std::ceil(b / dt)) + 2;
        const double jump = std::abs(d.gamma_total[after] - d.gamma_total[before]);
        max_jump = std::max(max_jump, jump);
        jumps += jump;
    }
    double variation = 0.0;
    for (std::size_t n = 1; n < d.times.size() && d.times[n] <= 19.0 * spacing + 3.0 * dt; ++n)
        variation += std::abs(d.gamma_total[n] - d.gamma_total[n - 1]);
    const double share = jumps / variation;
    bool pass = spread < 1e-2 * max_jump && share > 0.99;
    std::string detail = fmt("DDE spread within steps %.2e (< 1%% of largest jump %.2f), %.2f%% of variation at multiples of d (> 99%%); ", spread, max_jump, 100.0 * share);
    for (const char* tag : {"volterra-constant", "volterra-linear"}) {
        const ObservableSeries& v = obs(r, 0, g, tag);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t n = 0; n < v.times.size(); ++n)
            if (v.times[n] >= 6.0 && v.times[n] <= 10.0) {
                sum += std::abs(v.gamma_total[n] - d.gamma_total[n]) / std::abs(d.gamma_total[n]);
                ++count;
            }
        const double rel = sum / static_cast<double>(count);
        pass = pass && rel < 0.05;
        detail += fmt("%s mean rel dev %.2f%% (< 5%%); ", tag, 100.0 * rel);
    }
    return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome c7(const ScenarioResult& r)
{
    const double g = 1e-4;
    std::vector<const ObservableSeries*> s;
    for (const auto& tag : kThreeWay)
        s.push_back(&obs(r, 0, g, tag));
    bool pass = true;
    std::string detail = "atom 20 peaks";
    for (const ObservableSeries* o : s) {
        const auto& last = o->gamma_atom.at(19);
        const double peak = *std::max_element(last.begin(), last.end());
        pass = pass && peak >= 17.0 && peak <= 23.0;
        detail += fmt(" %.2f", peak);
    }
    auto dev = [&](std::size_t atom) {
        return max_pairwise({&s[0]->gamma_atom.at(atom), &s[1]->gamma_atom.at(atom), &s[2]->gamma_atom.at(atom)},
                            0.0, 10.0, s[0]->times);
    };
    const double middle = dev(9), edge = dev(0);
    pass = pass && middle < edge;
    return {pass, detail + fmt(" (in [17, 23]); three-way deviation atom 10 %.3f < atom 1 %.3f", middle, edge)};
}

Outcome c8(const ScenarioResult& r)
{
    bool pass = true;
    std::string detail;
    for (double g : {1e-3, 1e-6}) {
        const ObservableSeries& c = obs(r, 0, g, "volterra-constant");
        const ObservableSeries& l = obs(r, 0, g, "volterra-linear");
        const ObservableSeries& d = obs(r, 0, g, "dde");
        double gap = 0.0;
        for (std::size_t n = 0; n < c.times.size(); ++n)
            gap = std::max(gap, std::abs(c.delta_pe_at(n, 0) - l.delta_pe_at(n, 0)));
        const std::size_t end = c.times.size() - 1;
        const double cv = c.delta_pe_at(end, 0), lv = l.delta_pe_at(end, 0), dv = d.delta_pe_at(end, 0);
        const bool between = dv >= std::min(cv, lv) && dv <= std::max(cv, lv);
        pass = pass && gap >= std::sqrt(10.0) && gap <= 15.0 && between;
        detail += fmt("gamma %g: max gap %.2f (in [3.16, 15]), t = 50 const %.2f dde %.2f lin %.2f%s; ", g, gap, cv, dv,
                      lv, between ? "" : " (dde outside)");
    }
    return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome c9(const ScenarioResult& r)
{
    bool pass = true;
    std::string detail;
    auto window_gap = [](const ObservableSeries& a, const ObservableSeries& b, std::size_t atom_a,
                         std::size_t atom_b) {
        double gap = 0.0;
        for (std::size_t n = 0; n < a.times.size(); ++n)
            if (a.times[n] >= 45.0)
                gap = std::max(gap, std::abs(a.delta_pe_at(n, atom_a) - b.delta_pe_at(n, atom_b)));
        return gap;
    };
    for (double g : {1e-3, 1e-6}) {
        const double sc = window_gap(obs(r, 1, g, "volterra-constant"), obs(r, 1, g, "markov"), 0, 0);
        const double sl = window_gap(obs(r, 1, g, "volterra-linear"), obs(r, 1, g, "markov"), 0, 0);
        const double cc = window_gap(obs(r, 0, g, "volterra-constant"), obs(r, 0, g, "dde"), 9, 9);
        const double cl = window_gap(obs(r, 0, g, "volterra-linear"), obs(r, 0, g, "dde"), 9, 9);
        const double factor = std::min(cc / sc, cl / sl);
        pass = pass && sc < sl && sl < 1.0 && factor >= 5.0;
        detail += fmt("gamma %g: single const %.3f < lin %.3f < 1, chain atom 10 %.2f / %.2f (x%.1f >= 5); ", g, sc,
                      sl, cc, cl, factor);
    }
    // Weak-coupling regime only; reported for reference.
    const double sc = window_gap(obs(r, 1, 1e-2, "volterra-constant"), obs(r, 1, 1e-2, "markov"), 0, 0);
    const double sl = window_gap(obs(r, 1, 1e-2, "volterra-linear"), obs(r, 1, 1e-2, "markov"), 0, 0);
    detail += fmt("gamma 0.01 (info): single const %.3f lin %.3f", sc, sl);
    return {pass, detail};
}

Outcome c10(const ScenarioResult& r, const ScenarioResult& single)
{
    const double g = 1e-4;
    bool pass = true;
    std::string detail;
    std::vector<double> rms;
    double dpe = 0.0;
    for (const auto& tag : kThreeWay) {
        const ObservableSeries& o = obs(r, 0, g, tag);
        bool neg = false, pos = false;
        double s2 = 0.0;
        for (double v : o.gamma_total) {
            neg = neg || v < 0.0;
            pos = pos || v > 0.0;
            s2 += v * v;
        }
        rms.push_back(std::sqrt(s2 / static_cast<double>(o.gamma_total.size())));
        for (double v : o.delta_pe_total)
            dpe = std::max(dpe, std::abs(v));
        pass = pass && neg && pos;
        detail += fmt("%s %s rms %.3f; ", tag.c_str(), neg && pos ? "alternates" : "one-signed", rms.back());
    }
    pass = pass && rms[2] > rms[1] && rms[1] > rms[0];
    // Single-atom scale: |Delta P_e| of one excited atom over the same window.
    const ObservableSeries& one = obs(single, 0, g, "volterra-constant");
    double scale = 0.0;
    for (double v : one.delta_pe_total)
        scale = std::max(scale, std::abs(v));
    pass = pass && dpe <= scale;
    return {pass, detail + fmt("ordering dde > lin > const; max |dPe_total| %.3f (<= single-atom %.3f)", dpe, scale)};
}

Outcome c11(const ScenarioResult& wide, const ScenarioResult& narrow)
{
    auto dev = [](const ScenarioResult& r) {
        std::vector<const std::vector<double>*> s;
        for (const auto& tag : kThreeWay)
            s.push_back(&obs(r, 0, 1e-4, tag).gamma_total);
        return max_pairwise(s, 0.0, 10.0, obs(r, 0, 1e-4, "dde").times);
    };
    const double a = dev(wide), b = dev(narrow);
    return {a < b, fmt("max three-way deviation d = 0.5 pi %.3f < d = 0.1 pi %.3f", a, b)};
}

Outcome c12()
{
    const double c = volterra_convergence_ratio(CouplingKind::Constant);
    const double l = volterra_convergence_ratio(CouplingKind::Linear);
    const double d = dde_convergence_ratio();
    const double chain = reduction_chain_deviation();
    auto in = [](double x) { return x >= 3.4 && x <= 4.6; };
    return {in(c) && in(l) && in(d) && chain < 1e-8,
            fmt("ratios volterra-constant %.3f, volterra-linear %.3f, dde %.3f (in [3.4, 4.6]); dde(0 delay) vs "
                "markov %.2e (< 1e-8)",
                c, l, d, chain)};
}

Outcome c13()
{
    Scenario s = preset("fig2ab");
    s.dt = 0.001; // 10^4 steps over t = 10
    RunnerOptions o;
    o.write_files = false;
    o.quicklooks = false;
    o.workers = 1;
    const auto t0 = std::chrono::steady_clock::now();
    const ScenarioResult r = run_scenario(s, o);
    const double wall = seconds_since(t0);
    bool pass = wall <= 300.0 && !r.any_aborted();
    std::string detail = fmt("%zu steps, %.1f s on one core (<= 300 s)", s.grid().n_steps, wall);
    for (const auto& x : r.runs) {
        if (x.spec.solver.kind != SolverKind::Volterra)
            continue;
        const long budget = 2L * static_cast<long>(x.kernel_classes) * static_cast<long>(x.spec.grid.points());
        pass = pass && x.kernel_evaluations <= budget;
        detail += fmt("; %s %ld kernel evaluations (<= 2 x %zu classes x %zu points)", x.spec.solver_tag().c_str(),
                      x.kernel_evaluations, x.kernel_classes, x.spec.grid.points());
    }
    return {pass, detail};
}

} // namespace

int main()
{
    std::vector<std::pair<int, Outcome>> results;
    auto report = [&](int id, auto&& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const bool known = !o.pass && kKnownFailures.count(id);
        std::printf("C%-2d %s  %s\n", id, o.pass ? "PASS" : (known ? "FAIL (known)" : "FAIL"), o.detail.c_str());
        std::fflush(stdout);
        results.emplace_back(id, o);
    };

    const ScenarioResult fig1 = run(preset("fig1bc"));
    const ScenarioResult fig2ab = run(preset("fig2ab"));
    const ScenarioResult fig2e = run(preset("fig2e")); // the fig2cd chain plus single-atom companions
    const ScenarioResult fig3 = run(preset("fig3"));
    Scenario single = preset("fig3");
    single.n_atoms = 1;
    single.spacing_over_pi.reset();
    single.initial = {};
    single.solvers = {SolverRequest::parse("volterra-constant")};
    const ScenarioResult fig3_single = run(single);
    const ScenarioResult sp_wide = run(preset("spfig"));
    Scenario narrow = preset("spfig");
    narrow.spacing_over_pi = 0.1;
    const ScenarioResult sp_narrow = run(narrow);

    report(1, c1);
    report(2, c2);
    report(3, [&] { return c3({&fig2ab, &fig2e}); });
    report(4, c4);
    report(5, [&] { return c5(fig1); });
    report(6, [&] { return c6(fig2ab); });
    report(7, [&] { return c7(fig2ab); });
    report(8, [&] { return c8(fig2e); });
    report(9, [&] { return c9(fig2e); });
    report(10, [&] { return c10(fig3, fig3_single); });
    report(11, [&] { return c11(sp_wide, sp_narrow); });
    report(12, c12);
    report(13, c13);

    int unexpected = 0, passed = 0;
    for (const auto& [id, o] : results) {
        passed += o.pass;
        unexpected += !o.pass && !kKnownFailures.count(id);
    }
    std::printf("%d/%zu criteria pass; %d unexpected failure(s)\n", passed, results.size(), unexpected);
    return unexpected == 0 ? 0 : 1;
}
