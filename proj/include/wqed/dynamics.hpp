#ifndef WQED_DYNAMICS_HPP
#define WQED_DYNAMICS_HPP

#include "wqed/kernels.hpp"
#include "wqed/model.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wqed {

enum class RunStatus { Completed, Aborted };

struct Trajectory {
    std::string solver;        // e.g. "volterra-constant", "dde", "markov", "oracle-linear"
    std::string scenario_hash; // filled by the scenario layer
    TimeGrid grid;
    std::size_t n_atoms = 0;
    std::vector<cplx> amplitudes;       // [step][atom], steps 0..last_valid_step
    std::vector<double> photon_number;  // empty when not computed
    std::vector<double> norm_residual;  // same length as photon_number
    RunStatus status = RunStatus::Completed;
    std::size_t last_valid_step = 0;
    std::string abort_reason;

    std::size_t steps() const { return n_atoms == 0 ? 0 : amplitudes.size() / n_atoms; }
    double time(std::size_t n) const { return grid.time(n); }
    const cplx& alpha(std::size_t n, std::size_t i) const { return amplitudes[n * n_atoms + i]; }
    std::span<const cplx> at(std::size_t n) const { return {amplitudes.data() + n * n_atoms, n_atoms}; }
    bool has_photon_number() const { return !photon_number.empty(); }
};

// Blow-up guard threshold on |alpha_i|.
inline constexpr double kBlowUpLimit = 1.0 + 1e-3;
// Photon numbers below this are rejected as a kernel or pairing defect.
inline constexpr double kNegativePhotonLimit = -1e-6;

struct VolterraOptions {
    bool photon_number = true;
    // Multiplies the memory term. +1 is the physical convention; -1 is only
    // useful to exercise the blow-up guard.
    double sign = 1.0;
};

/*
 * Explicit trapezoidal product integration of
 *
 *   alpha_i(t) = alpha_i(0) + i (2 gamma/pi) sum_j int_0^t A_ij(t - tau) alpha_j(tau) dtau.
 *
 * A(0) = 0 so step n only needs entries < n. Convolutions are accumulated per
 * (distance class, source atom) pair. With photon_number set, N_b and the
 * norm residual are updated incrementally from the same sums.
 *
 * Throws DomainError when init is not normalized or the table does not cover
 * the grid and geometry. A blow-up or negative photon number ends the run
 * with status Aborted and the partial trajectory.
 */
Trajectory solve_volterra(const PhysicalParams& params, const ChainGeometry& geometry, const CouplingModel& model,
                          std::span<const cplx> init, const TimeGrid& grid, const KernelTable& table,
                          const VolterraOptions& opts = {});

/*
 * N_b(t_n) = gamma sum_ij int int conj(B_ij(tau - tau')) conj(alpha_i(tau)) alpha_j(tau') dtau dtau'
 * for every grid point of the trajectory, with cell-averaged photon weights.
 * Throws NumericAbort on a result below kNegativePhotonLimit.
 */
std::vector<double> photon_number(const Trajectory& traj, const PhysicalParams& params, const KernelTable& table);

struct DdeOptions {
    // Drop the retardation (all delays 0) while keeping the e^{i r} phases.
    bool zero_delays = false;
};

/*
 * dalpha_i/dt = -(gamma/2) [alpha_i(t) + sum_{j != i} e^{i r_ij} alpha_j(t - r_ij) Theta(t - r_ij)]
 *
 * Exponential trapezoid: the diagonal decay is integrated exactly, delayed
 * terms by the trapezoid rule on interpolated history (quadratic on smooth
 * stretches, linear across kinks). Steps that
 * straddle a switch-on time are split there.
 */
Trajectory solve_dde(const PhysicalParams& params, const ChainGeometry& geometry, std::span<const cplx> init,
                     const TimeGrid& grid, const DdeOptions& opts = {});

// dalpha/dt = M alpha, M_ij = -(gamma/2) e^{i r_ij}, stepped with exp(M dt).
Trajectory solve_markov(const PhysicalParams& params, const ChainGeometry& geometry, std::span<const cplx> init,
                        const TimeGrid& grid);

struct OracleOptions {
    std::size_t n_modes = 8000;
    // Largest internal RK4 step, in units of 1/cutoff.
    double max_step_times_cutoff = 0.1;
};

/*
 * Single-excitation Schroedinger equation with the field discretized into
 * n_modes points k_m on [-cutoff, cutoff]:
 *
 *   dalpha_i/dt = -sum_m G_m e^{i k_m x_i} b_m
 *   db_m/dt     = -i(|k_m| - 1) b_m + G_m sum_i e^{-i k_m x_i} alpha_i,
 *
 * G_m^2 = 2 gamma w(|k_m|) dk / (2 pi). Reports N_b = sum |b_m|^2 exactly.
 * Throws DomainError when the field would revive inside the window.
 */
Trajectory solve_mode_oracle(const PhysicalParams& params, const ChainGeometry& geometry, const CouplingModel& model,
                             std::span<const cplx> init, const TimeGrid& grid, const OracleOptions& opts = {});

// Latest time the discretized field stays free of revivals.
double oracle_revival_time(const ChainGeometry& geometry, double cutoff, std::size_t n_modes);

} // namespace wqed

#endif
