#include "wqed/dynamics.hpp"

#include "wqed/errors.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wqed {

namespace {

constexpr double pi = std::numbers::pi;
constexpr cplx I{0.0, 1.0};

void check_init(std::span<const cplx> init, const ChainGeometry& geometry)
{
    if (init.size() != geometry.size())
        throw DomainError("initial state has " + std::to_string(init.size()) + " amplitudes for " +
                          std::to_string(geometry.size()) + " atoms");
    double norm = 0.0;
    for (const cplx& a : init) {
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
            throw DomainError("initial state is not finite");
        norm += std::norm(a);
    }
    if (std::abs(norm - 1.0) > 1e-12)
        throw DomainError("initial state norm is " + std::to_string(norm) + ", expected 1");
}

Trajectory start(std::string solver, std::size_t n_atoms, const TimeGrid& grid, std::span<const cplx> init)
{
    Trajectory t;
    t.solver = std::move(solver);
    t.grid = grid;
    t.n_atoms = n_atoms;
    t.amplitudes.reserve(grid.points() * n_atoms);
    t.amplitudes.assign(init.begin(), init.end());
    return t;
}

void abort_run(Trajectory& t, std::size_t last_valid, std::string reason)
{
    t.status = RunStatus::Aborted;
    t.last_valid_step = last_valid;
    t.abort_reason = std::move(reason);
    t.amplitudes.resize((last_valid + 1) * t.n_atoms);
    if (t.has_photon_number()) {
        t.photon_number.resize(std::min(t.photon_number.size(), last_valid + 1));
        t.norm_residual.resize(t.photon_number.size());
    }
}

// Returns a description of the first guard violation in row, or "".
std::string guard(std::span<const cplx> row)
{
    for (std::size_t i = 0; i < row.size(); ++i) {
        const double m = std::abs(row[i]);
        if (!std::isfinite(m))
            return "blow-up guard: non-finite amplitude on atom " + std::to_string(i + 1);
        if (m > kBlowUpLimit)
            return "blow-up guard: |alpha_" + std::to_string(i + 1) + "| = " + std::to_string(m) +
                   " exceeds 1 + 1e-3 (sign convention or step size)";
    }
    return {};
}

// Maps atom pairs onto the table's distance classes and groups them by
// (class, source atom), so that atoms sharing both reuse one convolution.
struct PairPlan {
    std::vector<std::size_t> cls;
    std::vector<std::size_t> src;
    std::vector<std::size_t> of; // [i * n + j] -> index into cls/src
    std::vector<std::size_t> table_class; // [i * n + j]
};

PairPlan plan_pairs(const ChainGeometry& g, const KernelTable& table)
{
    const std::size_t n = g.size();
    const auto& d = table.classes.distances;
    double scale = 1.0;
    for (double x : g.positions())
        scale = std::max(scale, std::abs(x));
    const double tol = 1e-9 * scale;

    PairPlan p;
    p.of.assign(n * n, 0);
    p.table_class.assign(n * n, 0);
    std::vector<long> slot(d.size() * n, -1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double r = g.distance(i, j);
            auto it = std::lower_bound(d.begin(), d.end(), r - tol);
            if (it == d.end() || std::abs(*it - r) > tol)
                throw DomainError("kernel table has no distance class for r = " + std::to_string(r));
            const auto c = static_cast<std::size_t>(it - d.begin());
            p.table_class[i * n + j] = c;
            long& s = slot[c * n + j];
            if (s < 0) {
                s = static_cast<long>(p.cls.size());
                p.cls.push_back(c);
                p.src.push_back(j);
            }
            p.of[i * n + j] = static_cast<std::size_t>(s);
        }
    return p;
}

void check_table(const KernelTable& table, const CouplingModel& model, const PhysicalParams& params,
                 const TimeGrid& grid)
{
    if (!(table.model == model))
        throw DomainError("kernel table was built for a different coupling model");
    if (std::abs(table.cutoff - params.cutoff) > 1e-12 * params.cutoff)
        throw DomainError("kernel table cutoff differs from the scenario cutoff");
    if (std::abs(table.dt - grid.dt) > 1e-12 * grid.dt)
        throw DomainError("kernel table step differs from the time grid step");
    if (table.n_max < grid.n_steps)
        throw DomainError("kernel table covers " + std::to_string(table.n_max) + " lags, grid needs " +
                          std::to_string(grid.n_steps));
}

/*
 * History-times-kernel sums for the trapezoid rule. Kernel rows are stored
 * reversed and split into real and imaginary parts, so for step n the sum
 * over m = 1..n-1 of K[n - m] h[m] is a unit-stride dot product.
 */
class Convolver {
public:
    Convolver(const KernelTable& table, const PairPlan& plan, std::size_t n_atoms, std::size_t points,
              bool want_a, bool want_b)
        : plan_(plan), n_atoms_(n_atoms), n_max_(table.n_max), stride_(table.stride()), want_a_(want_a),
          want_b_(want_b)
    {
        const std::size_t nc = table.n_classes();
        if (want_a_) {
            ar_.resize(nc * stride_);
            ai_.resize(nc * stride_);
        }
        if (want_b_) {
            br_.resize(nc * stride_);
            bi_.resize(nc * stride_);
        }
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t k = 0; k < stride_; ++k) {
                const std::size_t lag = n_max_ - k;
                if (want_a_) {
                    ar_[c * stride_ + k] = table.A(c, lag).real();
                    ai_[c * stride_ + k] = table.A(c, lag).imag();
                }
                if (want_b_) {
                    // conjugated photon weight
                    const cplx w = table.photon_weights[c * stride_ + lag];
                    br_[c * stride_ + k] = w.real();
                    bi_[c * stride_ + k] = -w.imag();
                }
            }
        hr_.assign(n_atoms * points, 0.0);
        hi_.assign(n_atoms * points, 0.0);
        points_ = points;
        sa_.resize(plan.cls.size());
        sb_.resize(plan.cls.size());
        acc_.resize(4 * plan.cls.size());
        for (std::size_t c = 0; c < nc; ++c) {
            Group g{c, 0, {}};
            for (std::size_t p = 0; p < plan.cls.size(); ++p) {
                if (plan.cls[p] != c)
                    continue;
                g.pair[g.count++] = p;
                if (g.count == kWidth) {
                    groups_.push_back(g);
                    g.count = 0;
                }
            }
            if (g.count > 0)
                groups_.push_back(g);
        }
    }

    void push(std::size_t m, std::span<const cplx> row)
    {
        for (std::size_t j = 0; j < n_atoms_; ++j) {
            hr_[j * points_ + m] = row[j].real();
            hi_[j * points_ + m] = row[j].imag();
        }
    }

    // Fills sums_a / sums_b with dt * (sum_{m=1}^{n-1} K[n-m] h[m] + K[n] h[0] / 2)
    // for every (class, source) pair. Sources sharing a class go through the
    // kernel row together, in lag blocks that stay cache resident.
    void sums(std::size_t n, double dt)
    {
        std::fill(acc_.begin(), acc_.end(), 0.0);
        for (std::size_t b0 = 1; b0 < n; b0 += kBlock) {
            const std::size_t b1 = std::min(n, b0 + kBlock);
            for (std::size_t g = 0; g < groups_.size(); ++g) {
                if (want_a_ && want_b_)
                    group<true, true>(g, n, b0, b1);
                else if (want_a_)
                    group<true, false>(g, n, b0, b1);
                else
                    group<false, true>(g, n, b0, b1);
            }
        }
        const std::size_t off = n_max_ - n;
        for (std::size_t p = 0; p < plan_.cls.size(); ++p) {
            const std::size_t c = plan_.cls[p];
            const std::size_t at = plan_.src[p] * points_;
            const double xr = hr_[at], xi = hi_[at];
            double* a = acc_.data() + 4 * p;
            if (want_a_) {
                const double kr = ar_[c * stride_ + off], ki = ai_[c * stride_ + off];
                a[0] += 0.5 * (kr * xr - ki * xi);
                a[1] += 0.5 * (kr * xi + ki * xr);
            }
            if (want_b_) {
                const double kr = br_[c * stride_ + off], ki = bi_[c * stride_ + off];
                a[2] += 0.5 * (kr * xr - ki * xi);
                a[3] += 0.5 * (kr * xi + ki * xr);
            }
            sa_[p] = dt * cplx(a[0], a[1]);
            sb_[p] = dt * cplx(a[2], a[3]);
        }
    }

    const cplx& sum_a(std::size_t i, std::size_t j) const { return sa_[plan_.of[i * n_atoms_ + j]]; }
    const cplx& sum_b(std::size_t i, std::size_t j) const { return sb_[plan_.of[i * n_atoms_ + j]]; }

private:
    const PairPlan& plan_;
    std::size_t n_atoms_;
    std::size_t n_max_;
    std::size_t stride_;
    std::size_t points_ = 0;
    bool want_a_;
    bool want_b_;
    std::vector<double> ar_, ai_, br_, bi_;
    std::vector<double> hr_, hi_;
    std::vector<cplx> sa_, sb_;
    std::vector<double> acc_; // 4 per pair: a_re, a_im, b_re, b_im

    static constexpr std::size_t kBlock = 1024;
    static constexpr std::size_t kWidth = 4;
    struct Group {
        std::size_t cls;
        std::size_t count;
        std::size_t pair[kWidth];
    };
    std::vector<Group> groups_;

    template <bool A, bool B>
    void group(std::size_t g, std::size_t n, std::size_t b0, std::size_t b1)
    {
        const Group& gr = groups_[g];
        const std::size_t off = gr.cls * stride_ + n_max_ - n;
        const double* kr = A ? ar_.data() + off : nullptr;
        const double* ki = A ? ai_.data() + off : nullptr;
        const double* wr = B ? br_.data() + off : nullptr;
        const double* wi = B ? bi_.data() + off : nullptr;
        const double* xr[kWidth];
        const double* xi[kWidth];
        for (std::size_t q = 0; q < kWidth; ++q) {
            const std::size_t j = plan_.src[gr.pair[std::min(q, gr.count - 1)]];
            xr[q] = hr_.data() + j * points_;
            xi[q] = hi_.data() + j * points_;
        }
        double s00 = 0, s01 = 0, s02 = 0, s03 = 0, s10 = 0, s11 = 0, s12 = 0, s13 = 0;
        double s20 = 0, s21 = 0, s22 = 0, s23 = 0, s30 = 0, s31 = 0, s32 = 0, s33 = 0;
#pragma omp simd reduction(+ : s00, s01, s02, s03, s10, s11, s12, s13, s20, s21, s22, s23, s30, s31, s32, s33)
        for (std::size_t m = b0; m < b1; ++m) {
            const double x0r = xr[0][m], x0i = xi[0][m], x1r = xr[1][m], x1i = xi[1][m];
            const double x2r = xr[2][m], x2i = xi[2][m], x3r = xr[3][m], x3i = xi[3][m];
            if constexpr (A) {
                const double a = kr[m], b = ki[m];
                s00 += a * x0r - b * x0i;
                s01 += a * x0i + b * x0r;
                s10 += a * x1r - b * x1i;
                s11 += a * x1i + b * x1r;
                s20 += a * x2r - b * x2i;
                s21 += a * x2i + b * x2r;
                s30 += a * x3r - b * x3i;
                s31 += a * x3i + b * x3r;
            }
            if constexpr (B) {
                const double a = wr[m], b = wi[m];
                s02 += a * x0r - b * x0i;
                s03 += a * x0i + b * x0r;
                s12 += a * x1r - b * x1i;
                s13 += a * x1i + b * x1r;
                s22 += a * x2r - b * x2i;
                s23 += a * x2i + b * x2r;
                s32 += a * x3r - b * x3i;
                s33 += a * x3i + b * x3r;
            }
        }
        const double sums[kWidth][4] = {{s00, s01, s02, s03}, {s10, s11, s12, s13}, {s20, s21, s22, s23},
                                        {s30, s31, s32, s33}};
        for (std::size_t q = 0; q < gr.count; ++q)
            for (int k = 0; k < 4; ++k)
                acc_[4 * gr.pair[q] + static_cast<std::size_t>(k)] += sums[q][k];
    }
};

/*
 * Incremental trapezoid evaluation of the photon quadratic form. With
 * v_0 = dt/2, v_m = dt and Q(n, m) = sum_ij conj(a_i(n)) W_ij(n - m) a_j(m):
 *
 *   T(n) = sum_{m, m' <= n} v_m v_m' Q(m, m')
 *   N(n) = T(n) - (dt/2) sum_m' v_m' (Q(n, m') + Q(m', n)) + (dt/2)^2 Q(n, n)
 *
 * T grows by 2 dt Re R_n + dt^2 Q(n, n), R_n = sum_{m < n} v_m Q(n, m).
 */
class PhotonCounter {
public:
    PhotonCounter(const KernelTable& table, const PairPlan& plan, std::size_t n_atoms, double dt, double gamma)
        : n_atoms_(n_atoms), dt_(dt), gamma_(gamma)
    {
        w0_.resize(n_atoms * n_atoms);
        for (std::size_t k = 0; k < n_atoms * n_atoms; ++k)
            w0_[k] = table.photon_weights[plan.table_class[k] * table.stride()].real();
    }

    double first(std::span<const cplx> a0)
    {
        t_ = 0.25 * dt_ * dt_ * diag(a0);
        return 0.0;
    }

    double next(std::span<const cplx> an, const Convolver& conv)
    {
        cplx r = 0.0;
        for (std::size_t i = 0; i < n_atoms_; ++i) {
            cplx s = 0.0;
            for (std::size_t j = 0; j < n_atoms_; ++j)
                s += conv.sum_b(i, j);
            r += std::conj(an[i]) * s;
        }
        const double q = diag(an);
        const double h = 0.5 * dt_;
        t_ += 2.0 * dt_ * r.real() + dt_ * dt_ * q;
        return gamma_ * (t_ - h * (2.0 * r.real() + 2.0 * dt_ * q) + h * h * q);
    }

private:
    double diag(std::span<const cplx> a) const
    {
        cplx q = 0.0;
        for (std::size_t i = 0; i < n_atoms_; ++i)
            for (std::size_t j = 0; j < n_atoms_; ++j)
                q += std::conj(a[i]) * w0_[i * n_atoms_ + j] * a[j];
        return q.real();
    }

    std::size_t n_atoms_;
    double dt_;
    double gamma_;
    std::vector<double> w0_;
    double t_ = 0.0;
};

double norm2(std::span<const cplx> row)
{
    double s = 0.0;
    for (const cplx& a : row)
        s += std::norm(a);
    return s;
}

} // namespace

Trajectory solve_volterra(const PhysicalParams& params, const ChainGeometry& geometry, const CouplingModel& model,
                          std::span<const cplx> init, const TimeGrid& grid, const KernelTable& table,
                          const VolterraOptions& opts)
{
    params.validate();
    check_init(init, geometry);
    check_table(table, model, params, grid);
    const std::size_t n_atoms = geometry.size();
    const PairPlan plan = plan_pairs(geometry, table);

    Trajectory traj = start("volterra-" + std::string(to_string(model.kind)), n_atoms, grid, init);
    Convolver conv(table, plan, n_atoms, grid.points(), true, opts.photon_number);
    conv.push(0, init);
    PhotonCounter photons(table, plan, n_atoms, grid.dt, params.gamma);
    if (opts.photon_number) {
        traj.photon_number.reserve(grid.points());
        traj.norm_residual.reserve(grid.points());
        traj.photon_number.push_back(photons.first(init));
        traj.norm_residual.push_back(std::abs(norm2(init) - 1.0));
    }

    const cplx coef = opts.sign * I * (2.0 * params.gamma / pi);
    std::vector<cplx> row(n_atoms);
    for (std::size_t n = 1; n <= grid.n_steps; ++n) {
        conv.sums(n, grid.dt);
        for (std::size_t i = 0; i < n_atoms; ++i) {
            cplx s = 0.0;
            for (std::size_t j = 0; j < n_atoms; ++j)
                s += conv.sum_a(i, j);
            row[i] = init[i] + coef * s;
        }
        if (auto why = guard(row); !why.empty()) {
            abort_run(traj, n - 1, why + " at step " + std::to_string(n));
            return traj;
        }
        traj.amplitudes.insert(traj.amplitudes.end(), row.begin(), row.end());
        conv.push(n, row);
        if (opts.photon_number) {
            const double nb = photons.next(row, conv);
            if (!(nb >= kNegativePhotonLimit)) {
                traj.photon_number.push_back(nb);
                abort_run(traj, n - 1, "negative photon number " + std::to_string(nb) + " at step " + std::to_string(n));
                return traj;
            }
            traj.photon_number.push_back(nb);
            traj.norm_residual.push_back(std::abs(norm2(row) + nb - 1.0));
        }
    }
    traj.last_valid_step = grid.n_steps;
    return traj;
}

std::vector<double> photon_number(const Trajectory& traj, const PhysicalParams& params, const KernelTable& table)
{
    const std::size_t steps = traj.steps();
    if (steps == 0)
        return {};
    if (std::abs(table.dt - traj.grid.dt) > 1e-12 * traj.grid.dt || table.n_max + 1 < steps)
        throw DomainError("kernel table does not cover the trajectory grid");
    if (table.classes.n_atoms != traj.n_atoms)
        throw DomainError("kernel table was built for a different chain");
    PairPlan plan;
    const std::size_t n_atoms = traj.n_atoms;
    {
        // The table's own classification is the geometry of record here.
        std::vector<long> slot(table.n_classes() * n_atoms, -1);
        plan.of.assign(n_atoms * n_atoms, 0);
        plan.table_class.assign(n_atoms * n_atoms, 0);
        for (std::size_t i = 0; i < n_atoms; ++i)
            for (std::size_t j = 0; j < n_atoms; ++j) {
                const std::size_t c = table.classes.of(i, j);
                plan.table_class[i * n_atoms + j] = c;
                long& s = slot[c * n_atoms + j];
                if (s < 0) {
                    s = static_cast<long>(plan.cls.size());
                    plan.cls.push_back(c);
                    plan.src.push_back(j);
                }
                plan.of[i * n_atoms + j] = static_cast<std::size_t>(s);
            }
    }
    Convolver conv(table, plan, n_atoms, steps, false, true);
    PhotonCounter photons(table, plan, n_atoms, traj.grid.dt, params.gamma);
    std::vector<double> out;
    out.reserve(steps);
    conv.push(0, traj.at(0));
    out.push_back(photons.first(traj.at(0)));
    for (std::size_t n = 1; n < steps; ++n) {
        conv.sums(n, traj.grid.dt);
        const double nb = photons.next(traj.at(n), conv);
        if (!(nb >= kNegativePhotonLimit))
            throw NumericAbort("negative photon number " + std::to_string(nb) + " at step " + std::to_string(n),
                               static_cast<long>(n) - 1);
        out.push_back(nb);
        conv.push(n, traj.at(n));
    }
    return out;
}

Trajectory solve_dde(const PhysicalParams& params, const ChainGeometry& geometry, std::span<const cplx> init,
                     const TimeGrid& grid, const DdeOptions& opts)
{
    params.validate();
    check_init(init, geometry);
    const std::size_t n_atoms = geometry.size();
    const double dt = grid.dt;
    const double half_gamma = 0.5 * params.gamma;

    std::vector<double> delay(n_atoms * n_atoms);
    std::vector<cplx> phase(n_atoms * n_atoms);
    bool need_predictor = false;
    for (std::size_t i = 0; i < n_atoms; ++i)
        for (std::size_t j = 0; j < n_atoms; ++j) {
            const double r = geometry.distance(i, j);
            delay[i * n_atoms + j] = opts.zero_delays ? 0.0 : r;
            phase[i * n_atoms + j] = std::polar(1.0, r);
            if (i != j && delay[i * n_atoms + j] < dt)
                need_predictor = true;
        }

    Trajectory traj = start(opts.zero_delays ? "dde-zero-delay" : "dde", n_atoms, grid, init);
    // One spare row holds the predicted next step.
    std::vector<cplx> hist(init.begin(), init.end());
    hist.reserve((grid.points() + 1) * n_atoms);
    // Off-grid samples at switch-on times, where the derivative jumps.
    std::vector<std::vector<std::pair<double, cplx>>> kinks(n_atoms);

    auto kink_between = [&](std::size_t j, double lo, double hi) {
        for (const auto& kv : kinks[j])
            if (kv.first > lo && kv.first < hi)
                return true;
        return false;
    };
    // alpha_j(s) from rows 0..top: quadratic through three rows on smooth
    // stretches, piecewise linear through the kink samples otherwise.
    auto history = [&](std::size_t j, double s, std::size_t top) -> cplx {
        const double u = s / dt;
        auto k = static_cast<std::size_t>(std::max(0.0, std::floor(u)));
        if (k >= top)
            return hist[top * n_atoms + j];
        double ta = static_cast<double>(k) * dt;
        double tb = static_cast<double>(k + 1) * dt;
        auto at = [&](std::size_t q) { return hist[q * n_atoms + j]; };
        std::size_t base = k + 1; // stencil base-1 .. base+1
        bool smooth = false;
        if (k >= 1 && !kink_between(j, ta - dt, tb)) {
            base = k;
            smooth = true;
        } else if (k + 2 <= top && !kink_between(j, ta, tb + dt)) {
            base = k + 1;
            smooth = true;
        }
        if (smooth) {
            const double x = u - static_cast<double>(base);
            return 0.5 * x * (x - 1.0) * at(base - 1) + (1.0 - x * x) * at(base) + 0.5 * x * (x + 1.0) * at(base + 1);
        }
        cplx va = at(k);
        cplx vb = at(k + 1);
        for (const auto& [tk, vk] : kinks[j]) {
            if (!(tk > ta && tk < tb))
                continue;
            if (s < tk) {
                tb = tk;
                vb = vk;
            } else {
                ta = tk;
                va = vk;
            }
        }
        const double f = (s - ta) / (tb - ta);
        return (1.0 - f) * va + f * vb;
    };

    // Sub-steps end where an integrand jumps (switch-on, r_ij) or kinks (a
    // source's own switch-on seen through the delay, r_ij + r_jk).
    std::vector<std::vector<double>> breaks(n_atoms);
    for (std::size_t i = 0; i < n_atoms; ++i) {
        for (std::size_t j = 0; j < n_atoms; ++j) {
            if (j == i)
                continue;
            const double r = delay[i * n_atoms + j];
            if (r > 0.0)
                breaks[i].push_back(r);
            for (std::size_t k = 0; k < n_atoms; ++k)
                if (k != j && delay[j * n_atoms + k] > 0.0)
                    breaks[i].push_back(r + delay[j * n_atoms + k]);
        }
        std::sort(breaks[i].begin(), breaks[i].end());
        breaks[i].erase(std::unique(breaks[i].begin(), breaks[i].end()), breaks[i].end());
    }
    std::vector<std::size_t> cursor(n_atoms, 0);

    std::vector<cplx> row(n_atoms);
    std::vector<double> cuts;
    std::vector<std::pair<std::size_t, std::pair<double, cplx>>> new_kinks;
    for (std::size_t n = 0; n < grid.n_steps; ++n) {
        const double t0 = grid.time(n);
        const double t1 = grid.time(n + 1);
        std::size_t top = n;
        if (need_predictor) {
            // exponential Euler
            const double decay = std::exp(-half_gamma * dt);
            for (std::size_t i = 0; i < n_atoms; ++i) {
                cplx f = 0.0;
                for (std::size_t j = 0; j < n_atoms; ++j) {
                    const double r = delay[i * n_atoms + j];
                    if (j != i && t0 >= r)
                        f += phase[i * n_atoms + j] * history(j, t0 - r, n);
                }
                row[i] = decay * hist[n * n_atoms + i] - (1.0 - decay) * f;
            }
            hist.insert(hist.end(), row.begin(), row.end());
            top = n + 1;
        }
        new_kinks.clear();
        for (std::size_t i = 0; i < n_atoms; ++i) {
            cuts.assign(1, t0);
            auto& next = cursor[i];
            while (next < breaks[i].size() && breaks[i][next] <= t0)
                ++next;
            for (std::size_t c = next; c < breaks[i].size() && breaks[i][c] < t1; ++c)
                cuts.push_back(breaks[i][c]);
            cuts.push_back(t1);
            cplx value = hist[n * n_atoms + i];
            for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
                const double a = cuts[c];
                const double b = cuts[c + 1];
                const double len = b - a;
                if (!(len > 0.0))
                    continue;
                const double decay = std::exp(-half_gamma * len);
                cplx acc = 0.0;
                for (std::size_t j = 0; j < n_atoms; ++j) {
                    const double r = delay[i * n_atoms + j];
                    if (j == i || b <= r)
                        continue;
                    const cplx fa = history(j, a - r, top);
                    const cplx fb = history(j, b - r, top);
                    acc += phase[i * n_atoms + j] * (0.5 * len) * (decay * fa + fb);
                }
                value = decay * value - half_gamma * acc;
                if (b < t1)
                    new_kinks.push_back({i, {b, value}});
            }
            row[i] = value;
        }
        for (const auto& [i, k] : new_kinks)
            kinks[i].push_back(k);
        if (auto why = guard(row); !why.empty()) {
            abort_run(traj, n, why + " at step " + std::to_string(n + 1));
            return traj;
        }
        if (need_predictor)
            std::copy(row.begin(), row.end(), hist.end() - static_cast<long>(n_atoms));
        else
            hist.insert(hist.end(), row.begin(), row.end());
        traj.amplitudes.insert(traj.amplitudes.end(), row.begin(), row.end());
    }
    traj.last_valid_step = grid.n_steps;
    return traj;
}

Trajectory solve_markov(const PhysicalParams& params, const ChainGeometry& geometry, std::span<const cplx> init,
                        const TimeGrid& grid)
{
    params.validate();
    check_init(init, geometry);
    const auto n_atoms = static_cast<Eigen::Index>(geometry.size());
    Eigen::MatrixXcd m(n_atoms, n_atoms);
    for (Eigen::Index i = 0; i < n_atoms; ++i)
        for (Eigen::Index j = 0; j < n_atoms; ++j)
            m(i, j) = -0.5 * params.gamma *
                      std::polar(1.0, geometry.distance(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
    const Eigen::MatrixXcd u = (m * grid.dt).exp();

    Trajectory traj = start("markov", geometry.size(), grid, init);
    Eigen::VectorXcd a(n_atoms);
    for (Eigen::Index i = 0; i < n_atoms; ++i)
        a(i) = init[static_cast<std::size_t>(i)];
    for (std::size_t n = 1; n <= grid.n_steps; ++n) {
        a = u * a;
        traj.amplitudes.insert(traj.amplitudes.end(), a.data(), a.data() + n_atoms);
        if (auto why = guard(traj.at(n)); !why.empty()) {
            abort_run(traj, n - 1, why + " at step " + std::to_string(n));
            return traj;
        }
    }
    traj.last_valid_step = grid.n_steps;
    return traj;
}

double oracle_revival_time(const ChainGeometry& geometry, double cutoff, std::size_t n_modes)
{
    // The discretized field lives on a ring of circumference 2 pi / dk.
    const double ring = pi * static_cast<double>(n_modes) / cutoff;
    const double span = geometry.positions().back() - geometry.positions().front();
    return ring - span;
}

Trajectory solve_mode_oracle(const PhysicalParams& params, const ChainGeometry& geometry, const CouplingModel& model,
                             std::span<const cplx> init, const TimeGrid& grid, const OracleOptions& opts)
{
    if (!(params.gamma >= 0.0) || !(params.cutoff > 1.0))
        throw DomainError("oracle needs gamma >= 0 and cutoff > 1");
    check_init(init, geometry);
    if (opts.n_modes < 2)
        throw DomainError("oracle needs at least two modes");
    const double revival = oracle_revival_time(geometry, params.cutoff, opts.n_modes);
    if (!(grid.t_max() <= 0.5 * revival))
        throw DomainError("oracle window t_max = " + std::to_string(grid.t_max()) +
                          " reaches field revivals; need t_max <= " + std::to_string(0.5 * revival) +
                          " (raise n_modes)");

    const std::size_t n_atoms = geometry.size();
    const std::size_t nm = opts.n_modes;
    const double lam = params.cutoff;
    const double dk = 2.0 * lam / static_cast<double>(nm);
    std::vector<double> omega(nm), coupling(nm);
    std::vector<double> er(n_atoms * nm), ei(n_atoms * nm);
    for (std::size_t m = 0; m < nm; ++m) {
        const double k = -lam + (static_cast<double>(m) + 0.5) * dk;
        omega[m] = std::abs(k) - 1.0;
        coupling[m] = std::sqrt(2.0 * params.gamma * model.spectral_weight(std::abs(k)) * dk / (2.0 * pi));
        for (std::size_t i = 0; i < n_atoms; ++i) {
            er[i * nm + m] = coupling[m] * std::cos(k * geometry.positions()[i]);
            ei[i * nm + m] = coupling[m] * std::sin(k * geometry.positions()[i]);
        }
    }

    const auto sub = static_cast<std::size_t>(
        std::max(1.0, std::ceil(grid.dt * lam / opts.max_step_times_cutoff - 1e-9)));
    const double h = grid.dt / static_cast<double>(sub);

    // state: atoms then modes, split re/im
    const std::size_t dim = n_atoms + nm;
    std::vector<double> yr(dim, 0.0), yi(dim, 0.0);
    for (std::size_t i = 0; i < n_atoms; ++i) {
        yr[i] = init[i].real();
        yi[i] = init[i].imag();
    }
    auto deriv = [&](const std::vector<double>& xr, const std::vector<double>& xi, std::vector<double>& dr,
                     std::vector<double>& di) {
        const double* br = xr.data() + n_atoms;
        const double* bi = xi.data() + n_atoms;
        for (std::size_t i = 0; i < n_atoms; ++i) {
            const double* gr = er.data() + i * nm;
            const double* gi = ei.data() + i * nm;
            double sr = 0.0, si = 0.0;
#pragma omp simd reduction(+ : sr, si)
            for (std::size_t m = 0; m < nm; ++m) {
                sr += gr[m] * br[m] - gi[m] * bi[m];
                si += gr[m] * bi[m] + gi[m] * br[m];
            }
            dr[i] = -sr;
            di[i] = -si;
        }
        double* mr = dr.data() + n_atoms;
        double* mi = di.data() + n_atoms;
#pragma omp simd
        for (std::size_t m = 0; m < nm; ++m) {
            mr[m] = omega[m] * bi[m];
            mi[m] = -omega[m] * br[m];
        }
        for (std::size_t i = 0; i < n_atoms; ++i) {
            const double ar = xr[i], ai = xi[i];
            const double* gr = er.data() + i * nm;
            const double* gi = ei.data() + i * nm;
#pragma omp simd
            for (std::size_t m = 0; m < nm; ++m) {
                // conj(G e^{ikx}) alpha
                mr[m] += gr[m] * ar + gi[m] * ai;
                mi[m] += gr[m] * ai - gi[m] * ar;
            }
        }
    };

    Trajectory traj = start("oracle-" + std::string(to_string(model.kind)), n_atoms, grid, init);
    traj.photon_number.reserve(grid.points());
    traj.norm_residual.reserve(grid.points());
    traj.photon_number.push_back(0.0);
    traj.norm_residual.push_back(std::abs(norm2(init) - 1.0));

    std::vector<double> k1r(dim), k1i(dim), k2r(dim), k2i(dim), k3r(dim), k3i(dim), k4r(dim), k4i(dim);
    std::vector<double> tr(dim), ti(dim);
    std::vector<cplx> row(n_atoms);
    for (std::size_t n = 1; n <= grid.n_steps; ++n) {
        for (std::size_t s = 0; s < sub; ++s) {
            deriv(yr, yi, k1r, k1i);
            for (std::size_t q = 0; q < dim; ++q) {
                tr[q] = yr[q] + 0.5 * h * k1r[q];
                ti[q] = yi[q] + 0.5 * h * k1i[q];
            }
            deriv(tr, ti, k2r, k2i);
            for (std::size_t q = 0; q < dim; ++q) {
                tr[q] = yr[q] + 0.5 * h * k2r[q];
                ti[q] = yi[q] + 0.5 * h * k2i[q];
            }
            deriv(tr, ti, k3r, k3i);
            for (std::size_t q = 0; q < dim; ++q) {
                tr[q] = yr[q] + h * k3r[q];
                ti[q] = yi[q] + h * k3i[q];
            }
            deriv(tr, ti, k4r, k4i);
            for (std::size_t q = 0; q < dim; ++q) {
                yr[q] += h / 6.0 * (k1r[q] + 2.0 * k2r[q] + 2.0 * k3r[q] + k4r[q]);
                yi[q] += h / 6.0 * (k1i[q] + 2.0 * k2i[q] + 2.0 * k3i[q] + k4i[q]);
            }
        }
        double field = 0.0;
        for (std::size_t m = 0; m < nm; ++m)
            field += yr[n_atoms + m] * yr[n_atoms + m] + yi[n_atoms + m] * yi[n_atoms + m];
        for (std::size_t i = 0; i < n_atoms; ++i)
            row[i] = {yr[i], yi[i]};
        if (auto why = guard(row); !why.empty()) {
            abort_run(traj, n - 1, why + " at step " + std::to_string(n));
            return traj;
        }
        traj.amplitudes.insert(traj.amplitudes.end(), row.begin(), row.end());
        traj.photon_number.push_back(field);
        traj.norm_residual.push_back(std::abs(norm2(row) + field - 1.0));
    }
    traj.last_valid_step = grid.n_steps;
    return traj;
}

} // namespace wqed
