#ifndef WQED_VALIDATION_HPP
#define WQED_VALIDATION_HPP

#include "wqed/dynamics.hpp"
#include "wqed/kernels.hpp"

#include <string>
#include <vector>

namespace wqed {

// One measured quantity against its threshold.
struct Check {
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    std::string relation = "<"; // how measured must relate to threshold
    bool pass = false;
    std::string detail;
};

std::string format_check(const Check& c);

struct KernelGridResult {
    double max_rel_error = 0.0;         // generic points
    double max_rel_error_special = 0.0; // r = 0 and the light-cone line r = phi
    std::size_t points = 0;
};

// Closed-form A and B against adaptive quadrature on a fixed 32-point
// (r, phi) grid, both models.
KernelGridResult kernel_grid_errors(double cutoff);

// Volterra against the mode oracle: cutoff 50, gamma 1e-2, t <= 30, atom 1
// excited, spacing 0.1 pi. Returns max_t |alpha_volterra - alpha_oracle|, or
// +inf with `detail` set when a run aborts.
double oracle_deviation(std::size_t n_atoms, CouplingKind kind, const VolterraOptions& opts, std::string* detail);

// dt-halving ratios |x_dt - x_dt/2| / |x_dt/2 - x_dt/4| on the two-atom
// benchmark (gamma 1e-2, t = 5, spacing 0.1 pi, atom 1 excited), dt = 0.01 -> 0.0025.
double volterra_convergence_ratio(CouplingKind kind, const VolterraOptions& opts = {});
double dde_convergence_ratio();

// max |alpha_dde(zero delays) - alpha_markov| for a ten-atom timed-Dicke chain.
double reduction_chain_deviation();

// Checks shared by `validate` and the test suites.
std::vector<Check> quick_checks(const VolterraOptions& opts = {});
std::vector<Check> full_checks(const VolterraOptions& opts = {});

} // namespace wqed

#endif
