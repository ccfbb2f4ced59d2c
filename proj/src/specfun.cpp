#include "wqed/specfun.hpp"

#include "wqed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace wqed {

namespace detail {

SinCosIntegrals sin_cos_integrals_series(double x)
{
    const double x2 = x * x;
    // Si(x) = sum (-1)^k x^{2k+1} / ((2k+1)(2k+1)!)
    double p = x;
    double si_sum = x;
    // Ci(x) - gamma - ln x = sum_{k>=1} (-1)^k x^{2k} / (2k (2k)!)
    double q = 1.0;
    double ci_sum = 0.0;
    for (int k = 1; k < 200; ++k) {
        const double tk = 2.0 * k;
        p *= -x2 / (tk * (tk + 1.0));
        q *= -x2 / ((tk - 1.0) * tk);
        const double ds = p / (tk + 1.0);
        const double dc = q / tk;
        si_sum += ds;
        ci_sum += dc;
        if (std::abs(ds) <= 1e-18 * std::abs(si_sum) && std::abs(dc) <= 1e-18 * (1.0 + std::abs(ci_sum)))
            break;
    }
    return {std::numbers::egamma + std::log(x) + ci_sum, si_sum - std::numbers::pi / 2.0};
}

SinCosIntegrals sin_cos_integrals_continued_fraction(double x)
{
    // E1(-ix) by modified Lentz on the even contraction of its continued fraction;
    // csi(x) = -E1(-ix).
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-17;
    cplx b(1.0, x);
    cplx c = 1.0 / tiny;
    cplx d = 1.0 / b;
    cplx h = d;
    for (int i = 1; i < 100000; ++i) {
        const double a = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        const cplx del = c * d;
        h *= del;
        if (std::abs(del.real() - 1.0) + std::abs(del.imag()) < eps)
            break;
    }
    h *= cplx(std::cos(x), -std::sin(x));
    return {-h.real(), h.imag()};
}

} // namespace detail

SinCosIntegrals sin_cos_integrals(double x)
{
    if (!std::isfinite(x) || x <= 0.0)
        throw DomainError("sin_cos_integrals: x must be finite and > 0, got " + std::to_string(x));
    if (x <= detail::kSeriesSwitch)
        return detail::sin_cos_integrals_series(x);
    return detail::sin_cos_integrals_continued_fraction(x);
}

cplx csi(double x)
{
    if (!std::isfinite(x) || x == 0.0)
        throw DomainError("csi: x must be finite and nonzero, got " + std::to_string(x));
    const auto [ci, si] = sin_cos_integrals(std::abs(x));
    if (x > 0.0)
        return {ci, si};
    return {ci, -si - std::numbers::pi};
}

// --- adaptive quadrature ---------------------------------------------------

namespace {

// QUADPACK 7/15 Gauss-Kronrod abscissae and weights.
constexpr double xgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                           0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                           0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
                           0.207784955007898467600689403773245, 0.0};
constexpr double wgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                           0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                           0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                           0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                          0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a;
    double b;
    cplx value;
    double error;
    bool at_roundoff_floor = false;
    bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const Integrand& f, double a, double b)
{
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    cplx fv[15];
    fv[7] = f(centre);
    cplx resk = fv[7] * wgk[7];
    cplx resg = fv[7] * wg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * xgk[j];
        fv[j] = f(centre - dx);
        fv[14 - j] = f(centre + dx);
        const cplx fsum = fv[j] + fv[14 - j];
        resk += wgk[j] * fsum;
        if (j % 2 == 1)
            resg += wg[j / 2] * fsum;
    }
    // QUADPACK error heuristic on the scale of |f - mean|.
    const cplx mean = 0.5 * resk;
    double resabs = wgk[7] * std::abs(fv[7]);
    double resasc = wgk[7] * std::abs(fv[7] - mean);
    for (int j = 0; j < 7; ++j) {
        resabs += wgk[j] * (std::abs(fv[j]) + std::abs(fv[14 - j]));
        resasc += wgk[j] * (std::abs(fv[j] - mean) + std::abs(fv[14 - j] - mean));
    }
    resk *= half;
    resg *= half;
    resabs *= std::abs(half);
    resasc *= std::abs(half);
    double err = std::abs(resk - resg);
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    bool floor = false;
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps) && 50.0 * eps * resabs >= err) {
        err = 50.0 * eps * resabs;
        floor = true;
    }
    return {a, b, resk, err, floor};
}

} // namespace

QuadResult adaptive_quad(const Integrand& f, double a, double b, const QuadOptions& opts)
{
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
        throw DomainError("adaptive_quad: need finite a < b");
    if (!(opts.abs_tol > 0.0) && !(opts.rel_tol > 0.0))
        throw DomainError("adaptive_quad: tolerance must be positive");

    std::vector<double> pts{a};
    for (double p : opts.breaks)
        if (p > a && p < b)
            pts.push_back(p);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    std::priority_queue<Segment> heap;
    cplx total = 0.0;
    double err = 0.0;
    long evals = 0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        Segment s = gk15(f, pts[k], pts[k + 1]);
        evals += 15;
        total += s.value;
        err += s.error;
        heap.push(s);
    }

    // Segments whose error sits at the rounding floor are retired: bisecting
    // them cannot lower the estimate.
    std::vector<Segment> retired;
    auto target = [&] { return std::max(opts.abs_tol, opts.rel_tol * std::abs(total)); };
    double active = err;
    while (!heap.empty() && active > target()) {
        Segment s = heap.top();
        heap.pop();
        const double mid = 0.5 * (s.a + s.b);
        if (s.at_roundoff_floor || !(mid > s.a && mid < s.b)) {
            active -= s.error;
            retired.push_back(s);
            continue;
        }
        if (evals + 30 > opts.max_evaluations)
            throw QuadratureError("adaptive_quad: evaluation budget exhausted", {total, err, evals});
        Segment l = gk15(f, s.a, mid);
        Segment r = gk15(f, mid, s.b);
        evals += 30;
        total += l.value + r.value - s.value;
        err += l.error + r.error - s.error;
        active += l.error + r.error - s.error;
        heap.push(l);
        heap.push(r);
    }

    // Re-sum to shed drift accumulated by the incremental updates.
    cplx sum = 0.0;
    double esum = 0.0;
    for (const auto& s : retired) {
        sum += s.value;
        esum += s.error;
    }
    while (!heap.empty()) {
        sum += heap.top().value;
        esum += heap.top().error;
        heap.pop();
    }
    return {sum, esum, evals};
}

QuadResult adaptive_quad(const Integrand& f, double a, double b, double tol)
{
    QuadOptions o;
    o.abs_tol = tol;
    return adaptive_quad(f, a, b, o);
}

std::vector<double> uniform_breaks(double a, double b, double width)
{
    std::vector<double> out;
    if (!(width > 0.0) || !(b > a))
        return out;
    const auto n = static_cast<long>(std::ceil((b - a) / width));
    const double h = (b - a) / static_cast<double>(n);
    for (long k = 1; k < n; ++k)
        out.push_back(a + h * static_cast<double>(k));
    return out;
}

} // namespace wqed
