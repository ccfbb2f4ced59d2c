#include "wqed/kernels.hpp"

#include "wqed/errors.hpp"
#include "wqed/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace wqed {

namespace {

constexpr double pi = std::numbers::pi;
constexpr cplx I{0.0, 1.0};

cplx expi(double a) { return {std::cos(a), std::sin(a)}; }

// ci and si extended to negative arguments as antiderivatives of cos(y)/y
// (principal value, even) and sin(y)/y (continuous through 0).
double ci_pv(double y) { return sin_cos_integrals(std::abs(y)).ci; }
double si_ext(double y)
{
    if (y > 0.0)
        return sin_cos_integrals(y).si;
    return -sin_cos_integrals(-y).si - pi;
}

void check_args(double r, double phi, double cutoff, bool allow_negative_phi)
{
    if (!std::isfinite(cutoff) || cutoff <= 1.0)
        throw DomainError("kernel: cutoff must exceed 1, got " + std::to_string(cutoff));
    if (!std::isfinite(r) || r < 0.0)
        throw DomainError("kernel: distance must be finite and >= 0, got " + std::to_string(r));
    if (!std::isfinite(phi) || (!allow_negative_phi && phi < 0.0))
        throw DomainError("kernel: invalid lag " + std::to_string(phi));
}

// (1 - e^{i(1-x)phi}) / (x - 1) without cancellation near x = 1; the limit there is i phi.
cplx removable_factor(double x, double phi)
{
    const double u = x - 1.0;
    if (u == 0.0)
        return I * phi;
    const double y = -u * phi;
    const double s = std::sin(0.5 * y);
    return cplx(2.0 * s * s, -std::sin(y)) / u;
}

} // namespace

double CouplingModel::g2_over_gamma(double k) const
{
    return kind == CouplingKind::Constant ? 0.5 : 0.5 * std::abs(k);
}

double CouplingModel::spectral_weight(double x) const
{
    const double d = (1.0 + x) * (1.0 + x);
    return kind == CouplingKind::Constant ? 1.0 / d : x / d;
}

std::string_view to_string(CouplingKind kind)
{
    return kind == CouplingKind::Constant ? "constant" : "linear";
}

CouplingKind coupling_kind_from_string(std::string_view name)
{
    if (name == "constant")
        return CouplingKind::Constant;
    if (name == "linear")
        return CouplingKind::Linear;
    throw ConfigError("model must be \"constant\" or \"linear\", got \"" + std::string(name) + "\"");
}

KernelPieces kernel_pieces(double r, double phi, double cutoff)
{
    check_args(r, phi, cutoff, false);
    const double L = cutoff;
    if (phi == 0.0)
        return {0.0, 0.0, 0.0};

    if (r == 0.0) {
        // Self-kernel: the cos(x r) factor is 1 and every piece reduces to csi
        // of phi-scaled bounds.
        const cplx e2 = expi(2.0 * phi);
        const cplx csi_lo = std::conj(csi(phi));
        const cplx csi_hi = std::conj(csi((L + 1.0) * phi));
        const cplx i1 = std::log(L - 1.0) - std::conj(csi((L - 1.0) * phi)) + (csi(phi) + I * pi);
        const cplx i2 = std::log(L + 1.0) - e2 * (csi_hi - csi_lo);
        const cplx i3 = (expi(-(L - 1.0) * phi) - 1.0) / (L + 1.0) + 1.0 - expi(phi) + I * phi * e2 * (csi_hi - csi_lo);
        return {i1, i2, i3};
    }

    const double rm = r - phi;
    const double rp = r + phi;
    const double cr = std::cos(r);
    const double sr = std::sin(r);
    const cplx eir = expi(r);
    const cplx em = expi(2.0 * phi - r);
    const cplx ep = expi(2.0 * phi + r);

    // On the light-cone line r = phi the csi(u r-) terms degenerate to ln|u|
    // (and r- csi(u r-) to zero).
    auto csi_minus = [&](double u) -> cplx { return rm == 0.0 ? cplx(std::log(std::abs(u))) : csi(u * rm); };

    auto F1 = [&](double u) {
        return cr * ci_pv(u * r) - sr * si_ext(u * r) - 0.5 * eir * csi_minus(u) - 0.5 * std::conj(eir) * std::conj(csi(u * rp));
    };
    auto F2 = [&](double u) {
        return cr * ci_pv(u * r) + sr * si_ext(u * r) - 0.5 * em * csi_minus(u) - 0.5 * ep * std::conj(csi(u * rp));
    };
    auto G3 = [&](double u) {
        const cplx minus_term = rm == 0.0 ? cplx(0.0) : 0.5 * I * rm * em * csi(u * rm);
        return r * (cr * si_ext(u * r) - sr * ci_pv(u * r)) + minus_term - 0.5 * I * rp * ep * std::conj(csi(u * rp));
    };

    const cplx i1 = F1(L - 1.0) - F1(-1.0);
    const cplx i2 = F2(L + 1.0) - F2(1.0);
    const cplx i3 = std::cos(L * r) / (L + 1.0) * (expi(-(L - 1.0) * phi) - 1.0) + 1.0 - expi(phi) - (G3(L + 1.0) - G3(1.0));
    return {i1, i2, i3};
}

KernelEval kernel_A_eval(const CouplingModel& model, double r, double phi, double cutoff)
{
    check_args(r, phi, cutoff, false);
    if (phi == 0.0)
        return {0.0, false};
    const auto [i1, i2, i3] = kernel_pieces(r, phi, cutoff);
    const double sign = model.kind == CouplingKind::Constant ? -2.0 : 2.0;
    const bool special = r == 0.0 || r == phi;
    return {0.25 * (i1 - i2 + sign * i3), special};
}

cplx kernel_A(const CouplingModel& model, double r, double phi, double cutoff)
{
    return kernel_A_eval(model, r, phi, cutoff).value;
}

KernelEval kernel_B_eval(const CouplingModel& model, double r, double phi, double cutoff)
{
    check_args(r, phi, cutoff, true);
    if (phi < 0.0) {
        auto e = kernel_B_eval(model, r, -phi, cutoff);
        e.value = std::conj(e.value);
        return e;
    }
    const double L = cutoff;
    const double shifts[2] = {phi + r, phi - r};
    bool special = false;

    // Constant weight: (1/pi) int_0^L 2 cos(xr) e^{i(x-1)phi} / (1+x)^2.
    cplx sum_const = 2.0 - 2.0 * std::cos(L * r) * expi(L * phi) / (1.0 + L);
    cplx sum_log = 0.0;
    for (double s : shifts) {
        if (s == 0.0) {
            special = true;
            sum_log += std::log(L + 1.0);
            continue;
        }
        const cplx diff = csi((L + 1.0) * s) - csi(s);
        const cplx es = expi(-s);
        sum_const += I * s * es * diff;
        sum_log += es * diff;
    }
    const cplx ephi = expi(-phi);
    const cplx b_const = ephi * sum_const / pi;
    if (model.kind == CouplingKind::Constant)
        return {b_const, special};
    return {ephi * sum_log / pi - b_const, special};
}

cplx kernel_B(const CouplingModel& model, double r, double phi, double cutoff)
{
    return kernel_B_eval(model, r, phi, cutoff).value;
}

QuadResult kernel_A_quadrature(const CouplingModel& model, double r, double phi, double cutoff, double abs_tol)
{
    check_args(r, phi, cutoff, false);
    auto f = [&](double x) -> cplx {
        return model.spectral_weight(x) * std::cos(x * r) * removable_factor(x, phi);
    };
    QuadOptions o;
    o.abs_tol = abs_tol;
    o.rel_tol = 1e-12;
    o.breaks = uniform_breaks(0.0, cutoff, std::min(1.0, pi / (r + phi + 1.0)));
    o.breaks.push_back(1.0);
    return adaptive_quad(f, 0.0, cutoff, o);
}

QuadResult kernel_B_quadrature(const CouplingModel& model, double r, double phi, double cutoff, double abs_tol)
{
    check_args(r, phi, cutoff, true);
    auto f = [&](double x) -> cplx {
        return model.spectral_weight(x) * 2.0 * std::cos(x * r) * expi((x - 1.0) * phi) / pi;
    };
    QuadOptions o;
    o.abs_tol = abs_tol;
    o.rel_tol = 1e-12;
    o.breaks = uniform_breaks(0.0, cutoff, std::min(1.0, pi / (r + std::abs(phi) + 1.0)));
    return adaptive_quad(f, 0.0, cutoff, o);
}

DistanceClasses classify_distances(std::span<const double> positions, double tol)
{
    DistanceClasses out;
    const std::size_t n = positions.size();
    out.n_atoms = n;
    out.pair_class.assign(n * n, 0);
    double scale = 0.0;
    for (double x : positions) {
        if (!std::isfinite(x))
            throw DomainError("classify_distances: non-finite position");
        scale = std::max(scale, std::abs(x));
    }
    const double abs_tol = tol * std::max(1.0, scale);

    std::vector<double> all{0.0};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            all.push_back(std::abs(positions[i] - positions[j]));
    std::sort(all.begin(), all.end());
    for (double d : all)
        if (out.distances.empty() || d - out.distances.back() > abs_tol)
            out.distances.push_back(d);

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            const double d = std::abs(positions[i] - positions[j]);
            auto it = std::lower_bound(out.distances.begin(), out.distances.end(), d - abs_tol);
            out.pair_class[i * n + j] = static_cast<std::size_t>(it - out.distances.begin());
        }
    return out;
}

KernelTable build_kernel_table(const CouplingModel& model, std::span<const double> positions, double dt,
                               std::size_t n_max, double cutoff)
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw DomainError("build_kernel_table: dt must be positive");
    KernelTable t;
    t.model = model;
    t.cutoff = cutoff;
    t.dt = dt;
    t.n_max = n_max;
    t.classes = classify_distances(positions);
    const std::size_t nc = t.classes.size();
    const std::size_t s = t.stride();
    t.values_A.resize(nc * s);
    t.values_B.resize(nc * s);
    t.photon_weights.resize(nc * s);

    for (std::size_t c = 0; c < nc; ++c) {
        const double r = t.classes.distances[c];
        for (std::size_t n = 0; n <= n_max; ++n) {
            const double phi = static_cast<double>(n) * dt;
            try {
                t.values_A[c * s + n] = kernel_A_eval(model, r, phi, cutoff).value;
                t.values_B[c * s + n] = kernel_B_eval(model, r, phi, cutoff).value;
            } catch (const std::exception& e) {
                throw DomainError(std::string(e.what()) + " at (r=" + std::to_string(r) + ", phi=" + std::to_string(phi) + ")");
            }
            ++t.evaluations_A;
            ++t.evaluations_B;
        }
        // Cell-averaged photon kernel from the antiderivative C = (2i/pi) conj(A).
        auto C = [&](std::size_t n) { return 2.0 * I * std::conj(t.values_A[c * s + n]) / pi; };
        for (std::size_t n = 0; n <= n_max; ++n) {
            cplx w;
            if (n == n_max)
                w = t.values_B[c * s + n];
            else if (n == 0)
                w = C(1).real() / dt;
            else
                w = (C(n + 1) - C(n - 1)) / (2.0 * dt);
            t.photon_weights[c * s + n] = w;
        }
    }
    return t;
}

// --- cache -----------------------------------------------------------------

std::string kernel_cache_key(const CouplingModel& model, std::span<const double> positions, double dt,
                             std::size_t n_max, double cutoff)
{
    Fnv1a h;
    h.text(to_string(model.kind)).number(dt).integer(n_max).number(cutoff).text(kCodeVersion);
    for (double x : positions)
        h.number(x);
    return h.hex();
}

namespace {

nlohmann::json pack(const std::vector<cplx>& v)
{
    std::vector<double> flat;
    flat.reserve(2 * v.size());
    for (const auto& z : v) {
        flat.push_back(z.real());
        flat.push_back(z.imag());
    }
    return flat;
}

std::vector<cplx> unpack(const nlohmann::json& j)
{
    const auto flat = j.get<std::vector<double>>();
    std::vector<cplx> v(flat.size() / 2);
    for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = {flat[2 * k], flat[2 * k + 1]};
    return v;
}

} // namespace

void save_kernel_table(const KernelTable& t, const std::filesystem::path& path)
{
    nlohmann::json j;
    j["code_version"] = kCodeVersion;
    j["model"] = to_string(t.model.kind);
    j["cutoff"] = t.cutoff;
    j["dt"] = t.dt;
    j["n_max"] = t.n_max;
    j["distances"] = t.classes.distances;
    j["n_atoms"] = t.classes.n_atoms;
    j["pair_class"] = t.classes.pair_class;
    j["A"] = pack(t.values_A);
    j["B"] = pack(t.values_B);
    j["photon_weights"] = pack(t.photon_weights);
    j["evaluations_A"] = t.evaluations_A;
    j["evaluations_B"] = t.evaluations_B;
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write kernel cache " + path.string());
    out << j.dump();
}

KernelTable load_kernel_table(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read kernel cache " + path.string());
    const auto j = nlohmann::json::parse(in);
    if (j.at("code_version").get<std::string>() != kCodeVersion)
        throw IoError("kernel cache " + path.string() + " was written by another code version");
    KernelTable t;
    t.model.kind = coupling_kind_from_string(j.at("model").get<std::string>());
    t.cutoff = j.at("cutoff");
    t.dt = j.at("dt");
    t.n_max = j.at("n_max");
    t.classes.distances = j.at("distances").get<std::vector<double>>();
    t.classes.n_atoms = j.at("n_atoms");
    t.classes.pair_class = j.at("pair_class").get<std::vector<std::size_t>>();
    t.values_A = unpack(j.at("A"));
    t.values_B = unpack(j.at("B"));
    t.photon_weights = unpack(j.at("photon_weights"));
    t.evaluations_A = j.at("evaluations_A");
    t.evaluations_B = j.at("evaluations_B");
    return t;
}

KernelTable cached_kernel_table(const std::filesystem::path& dir, const CouplingModel& model,
                                std::span<const double> positions, double dt, std::size_t n_max, double cutoff)
{
    const auto file = dir / ("kernel-" + kernel_cache_key(model, positions, dt, n_max, cutoff) + ".json");
    if (std::filesystem::exists(file))
        return load_kernel_table(file);
    auto t = build_kernel_table(model, positions, dt, n_max, cutoff);
    std::filesystem::create_directories(dir);
    save_kernel_table(t, file);
    return t;
}

} // namespace wqed
