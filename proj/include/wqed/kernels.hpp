#ifndef WQED_KERNELS_HPP
#define WQED_KERNELS_HPP

#include "wqed/specfun.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wqed {

// Units throughout: omega0 = v_g = k0 = 1. Distances are k0*|x_i - x_j|,
// lags are phi = omega0*(t - tau), rates are in units of omega0.

enum class CouplingKind { Constant, Linear };

struct CouplingModel {
    CouplingKind kind = CouplingKind::Constant;

    // g_k^2 in units of Gamma0 (constant: 1/2, linear: |k|/2).
    double g2_over_gamma(double k) const;
    // |g_k^JC|^2 / (2 Gamma0) = w(|k|), with g^JC = 2 g omega0 / (omega_k + omega0).
    double spectral_weight(double x) const;

    friend bool operator==(const CouplingModel&, const CouplingModel&) = default;
};

std::string_view to_string(CouplingKind kind);
CouplingKind coupling_kind_from_string(std::string_view name);

struct KernelEval {
    cplx value;
    // Set when a dedicated limit formula replaced the generic closed form
    // (self-kernel r = 0, light-cone line r = phi).
    bool special_point = false;
};

/*
 * Amplitude memory kernel
 *
 *   A(phi) = int_0^L dx w(x) cos(x r) (1 - e^{i(1-x)phi}) / (x - 1)
 *
 * with w = 1/(1+x)^2 (constant) or x/(1+x)^2 (linear); it enters the
 * amplitude equation as
 *
 *   alpha_i(t) - alpha_i(0) = i (2 gamma / pi) sum_j int_0^t A_ij(t - tau) alpha_j(tau) dtau.
 *
 * Evaluated from partial fractions into I1, I2, I3, each in closed form via
 * ci, si and csi.
 */
KernelEval kernel_A_eval(const CouplingModel& model, double r, double phi, double cutoff);
cplx kernel_A(const CouplingModel& model, double r, double phi, double cutoff);

/*
 * Photon-population kernel in units of Gamma0 (omega0 = 1):
 *
 *   B(phi) = (1/pi) int_0^L dx w(x) 2 cos(x r) e^{i(x-1)phi},   B(-phi) = conj(B(phi)).
 */
KernelEval kernel_B_eval(const CouplingModel& model, double r, double phi, double cutoff);
cplx kernel_B(const CouplingModel& model, double r, double phi, double cutoff);

// The partial-fraction pieces, exposed for testing.
struct KernelPieces {
    cplx i1, i2, i3;
};
KernelPieces kernel_pieces(double r, double phi, double cutoff);

// Quadrature evaluation of the defining x-integrals (independent oracle path).
QuadResult kernel_A_quadrature(const CouplingModel& model, double r, double phi, double cutoff,
                               double abs_tol = 1e-14);
QuadResult kernel_B_quadrature(const CouplingModel& model, double r, double phi, double cutoff,
                               double abs_tol = 1e-14);

// Deduplicated pair distances of a set of positions. Distances closer than
// `tol` (relative to the largest) share a class. Class 0 is always r = 0.
struct DistanceClasses {
    std::vector<double> distances;
    std::size_t n_atoms = 0;
    std::vector<std::size_t> pair_class; // n_atoms * n_atoms, row-major

    std::size_t of(std::size_t i, std::size_t j) const { return pair_class[i * n_atoms + j]; }
    std::size_t size() const { return distances.size(); }
};

DistanceClasses classify_distances(std::span<const double> positions, double tol = 1e-9);

/*
 * Kernels tabulated on a uniform lag grid phi_n = n dt, n = 0..n_max, one row
 * per distance class. Immutable once built; shareable across solver runs.
 *
 * values_A and values_B are direct kernel samples. photon_weights holds the
 * cell-averaged photon kernel used by the population quadrature:
 *   Bbar(n) = (C(phi_{n+1}) - C(phi_{n-1})) / (2 dt),  C(phi) = int_0^phi B,
 * where C = (2i/pi) conj(A). This follows from the A samples and suppresses
 * the aliasing of the far-detuned part of B onto resonance.
 */
struct KernelTable {
    CouplingModel model;
    double cutoff = 1e4;
    double dt = 0.0;
    std::size_t n_max = 0;
    DistanceClasses classes;
    std::vector<cplx> values_A;       // [class][lag]
    std::vector<cplx> values_B;       // [class][lag]
    std::vector<cplx> photon_weights; // [class][lag]
    long evaluations_A = 0;
    long evaluations_B = 0;

    std::size_t stride() const { return n_max + 1; }
    std::size_t n_classes() const { return classes.size(); }
    const cplx& A(std::size_t cls, std::size_t lag) const { return values_A[cls * stride() + lag]; }
    const cplx& B(std::size_t cls, std::size_t lag) const { return values_B[cls * stride() + lag]; }
    std::span<const cplx> row_A(std::size_t cls) const { return {values_A.data() + cls * stride(), stride()}; }
    std::span<const cplx> row_photon(std::size_t cls) const
    {
        return {photon_weights.data() + cls * stride(), stride()};
    }
};

KernelTable build_kernel_table(const CouplingModel& model, std::span<const double> positions, double dt,
                               std::size_t n_max, double cutoff);

// Cache persistence. The key folds every input that determines the table.
std::string kernel_cache_key(const CouplingModel& model, std::span<const double> positions, double dt,
                             std::size_t n_max, double cutoff);
void save_kernel_table(const KernelTable& table, const std::filesystem::path& path);
KernelTable load_kernel_table(const std::filesystem::path& path);

// Loads from `dir` when a matching cache file exists, otherwise builds and stores.
KernelTable cached_kernel_table(const std::filesystem::path& dir, const CouplingModel& model,
                                std::span<const double> positions, double dt, std::size_t n_max,
                                double cutoff);

inline constexpr std::string_view kCodeVersion = "wqed-1.0.0";

} // namespace wqed

#endif
