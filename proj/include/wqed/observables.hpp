#ifndef WQED_OBSERVABLES_HPP
#define WQED_OBSERVABLES_HPP

#include "wqed/dynamics.hpp"
#include "wqed/kernels.hpp"
#include "wqed/model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wqed {

enum class StateKind { SingleAtom, TimedDicke, Subradiant, Custom };

std::string_view to_string(StateKind kind);

struct InitialState {
    std::vector<cplx> amplitudes;
    StateKind kind = StateKind::Custom;
    std::size_t atom_index = 0; // SingleAtom, 0-based
    double k_over_k0 = 0.0;     // TimedDicke
    // Norm of the literal superposition before renormalization (Subradiant).
    double pre_normalization_norm = 1.0;

    std::string label() const;
};

InitialState single_atom(const ChainGeometry& geometry, std::size_t index);

// amplitudes_j = e^{i k x_j} / sqrt(N)
InitialState timed_dicke(const ChainGeometry& geometry, double k_over_k0);

// Where the standing wave sin(k x) has its node.
enum class PhaseOrigin {
    // One spacing before the first atom: sin(k j d), j = 1..N, the
    // zero-delay dark mode of the open chain.
    VirtualSite,
    // At the first atom: sin(k (j-1) d).
    FirstAtom,
};

// (|Psi_k> - |Psi_-k>) / sqrt(2) with k d = pi N / (N + 1), renormalized.
// Throws ConfigError for non-uniform chains or N < 2.
InitialState subradiant_state(const ChainGeometry& geometry, PhaseOrigin origin = PhaseOrigin::VirtualSite);

// Throws DomainError unless sum |a|^2 = 1 within 1e-12.
InitialState custom_state(std::vector<cplx> amplitudes);

struct GammaInst {
    std::vector<double> rate;             // -d/dt ln P, units of omega0
    std::vector<std::size_t> negative_at; // indices with rate < 0 (reabsorption)
};

/*
 * -d/dt ln P on a uniform grid. window = 1 is the plain central difference;
 * odd window > 1 uses the least-squares quadratic slope over the window,
 * shrinking symmetrically near the ends. The two end points use one-sided
 * second-order differences. Throws DomainError for P <= 0 or an even window.
 */
GammaInst gamma_inst(std::span<const double> p, double dt, std::size_t window = 1);

struct ObservableSeries {
    std::size_t n_atoms = 0;
    double gamma = 1.0; // Gamma0 / omega0 used for the scaled series
    std::vector<double> times;
    std::vector<double> pe;             // [step][atom]
    std::vector<double> pe_total;
    std::vector<double> delta_pe;       // [step][atom], (P(t) - P(0)) / gamma
    std::vector<double> delta_pe_total; // (P(t) - P(0)) / gamma
    std::vector<double> gamma_total;    // Gamma_inst / Gamma0
    // Per-atom Gamma_inst / Gamma0; empty for atoms whose population touches 0.
    std::vector<std::vector<double>> gamma_atom;
    std::vector<std::size_t> negative_total_at;

    double pe_at(std::size_t n, std::size_t i) const { return pe[n * n_atoms + i]; }
    double delta_pe_at(std::size_t n, std::size_t i) const { return delta_pe[n * n_atoms + i]; }
};

// P_e parts only.
ObservableSeries population(const Trajectory& traj, double gamma);

// P_e, Delta P_e and Gamma_inst (total and per atom).
ObservableSeries observables(const Trajectory& traj, double gamma, std::size_t smoothing_window = 1);

/*
 * Zeno time from the leading short-time expansion:
 *   tau_Z^-2 = 2 gamma / pi                 (constant)
 *   tau_Z^-2 = 2 gamma ln(cutoff) / pi      (linear)
 * Throws ConfigError for gamma <= 0, or cutoff <= 1 with the linear model.
 */
double zeno_closed_form(const CouplingModel& model, const PhysicalParams& params);

// tau_Z^-2 = gamma B(r = 0, phi = 0): the exact curvature of P_e at t = 0.
double zeno_kernel_prediction(const CouplingModel& model, const PhysicalParams& params);

struct ZenoFit {
    double tau = 0.0;
    double residual = 0.0; // rms misfit relative to max(1 - P)
    std::size_t points = 0;
    bool quadratic_regime_violated = false;
};

inline constexpr double kZenoResidualLimit = 0.05;

// Least-squares fit of P = 1 - (t/tau)^2 over t <= horizon.
ZenoFit fit_zeno(std::span<const double> times, std::span<const double> p, double horizon = 0.2);

} // namespace wqed

#endif
