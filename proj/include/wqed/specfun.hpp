#ifndef WQED_SPECFUN_HPP
#define WQED_SPECFUN_HPP

#include <complex>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wqed {

using cplx = std::complex<double>;

/*
 * Sine and cosine integrals in tail form.
 *
 *   ci(x) = -int_x^inf cos(t)/t dt           (the standard Ci)
 *   si(x) = -int_x^inf sin(t)/t dt = Si(x) - pi/2
 *
 * NOTE: si here is the SHIFTED sine integral. Most libraries expose Si(x);
 * convert with Si(x) = si(x) + pi/2.
 *
 *   csi(x) = ci(x) + i si(x) = -int_x^inf e^{it}/t dt
 *
 * For x < 0 csi is the principal-value continuation,
 *   csi(-x) = conj(csi(x)) - i pi,   x > 0.
 */
struct SinCosIntegrals {
    double ci;
    double si;
};

SinCosIntegrals sin_cos_integrals(double x);
cplx csi(double x);

namespace detail {
// Exposed for the series/continued-fraction overlap test.
SinCosIntegrals sin_cos_integrals_series(double x);
SinCosIntegrals sin_cos_integrals_continued_fraction(double x);
inline constexpr double kSeriesSwitch = 4.0;
} // namespace detail

struct QuadResult {
    cplx value;
    double abs_error_estimate = 0.0;
    long evaluations = 0;
};

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 0.0;
    long max_evaluations = 20'000'000;
    // Interior points where the integrand is only removably defined or
    // changes character. The integrator never samples exactly at a break.
    std::vector<double> breaks;
};

// Thrown when the evaluation budget runs out; carries the best estimate.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, QuadResult best)
        : std::runtime_error(what), best_(best) {}
    const QuadResult& best() const noexcept { return best_; }

private:
    QuadResult best_;
};

using Integrand = std::function<cplx(double)>;

// Globally adaptive 7/15-point Gauss-Kronrod quadrature of a complex
// integrand over [a, b]. Converged when the summed error estimate is below
// max(abs_tol, rel_tol * |value|).
QuadResult adaptive_quad(const Integrand& f, double a, double b, const QuadOptions& opts = {});

// Convenience overload matching the (f, a, b, tol) form.
QuadResult adaptive_quad(const Integrand& f, double a, double b, double tol);

// Uniformly spaced break points strictly inside (a, b), at most one per `width`.
std::vector<double> uniform_breaks(double a, double b, double width);

} // namespace wqed

#endif
