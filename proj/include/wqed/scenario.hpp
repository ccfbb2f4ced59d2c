#ifndef WQED_SCENARIO_HPP
#define WQED_SCENARIO_HPP

#include "wqed/dynamics.hpp"
#include "wqed/kernels.hpp"
#include "wqed/model.hpp"
#include "wqed/observables.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wqed {

enum class SolverKind { Volterra, Dde, Markov, Oracle };

struct SolverRequest {
    SolverKind kind = SolverKind::Volterra;
    // Volterra and Oracle only; unset means the scenario's model.
    std::optional<CouplingKind> model;

    // "volterra", "volterra-constant", "dde", "markov", "oracle-linear", ...
    std::string name() const;
    static SolverRequest parse(std::string_view name);

    friend bool operator==(const SolverRequest&, const SolverRequest&) = default;
};

struct InitialSpec {
    StateKind type = StateKind::SingleAtom;
    double k_over_k0 = 1.0;     // timed_dicke
    std::size_t atom_index = 1; // single_atom, 1-based
    PhaseOrigin phase_origin = PhaseOrigin::VirtualSite; // subradiant

    friend bool operator==(const InitialSpec&, const InitialSpec&) = default;
};

/*
 * One simulation setup. gamma_ratio may list several values: every solver then
 * runs once per value. Companions are further setups reported with this one
 * (e.g. single-atom references next to a chain).
 */
struct Scenario {
    std::string name = "custom";
    CouplingModel model;
    std::vector<double> gamma_ratios{1e-4};
    double cutoff = 1e4;
    std::size_t n_atoms = 1;
    std::optional<double> spacing_over_pi;
    std::vector<double> positions; // explicit; empty means uniform from spacing
    InitialSpec initial;
    double dt = 0.005;
    double t_max = 10.0;
    std::vector<SolverRequest> solvers{SolverRequest{}};
    std::size_t smoothing_window = 1;
    std::string out_dir;
    std::optional<std::pair<double, double>> plot_window;
    std::vector<Scenario> companions;

    ChainGeometry geometry() const;
    TimeGrid grid() const { return TimeGrid::covering(t_max, dt); }

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline constexpr std::string_view kUnitNote = "omega0 = v_g = k0 = 1";
inline constexpr std::string_view kSignConvention =
    "alpha_i(t) - alpha_i(0) = +i(2 gamma/pi) sum_j int A_ij(t - tau) alpha_j(tau) dtau; "
    "N_b pairs conj(B_ij(tau - tau')) with conj(alpha_i(tau)) alpha_j(tau')";

// Parses a JSON scenario document. A "preset" key expands first; the other
// keys override it. Throws ConfigError naming the field (or the line and
// column of a syntax error).
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

// Canonical JSON text; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const Scenario& s);

// Hex digest of the canonical text and the code version.
std::string scenario_hash(const Scenario& s);

// Throws ConfigError on out-of-range fields.
void validate(const Scenario& s);

// fig1bc, fig2ab, fig2cd, fig2e, fig3, spfig. Panel aliases such as fig2a
// map onto their preset. Throws ConfigError for unknown names.
Scenario preset(std::string_view name);
const std::vector<std::string>& preset_names();
std::string canonical_preset_name(std::string_view name);

// A single (setup, gamma, solver) run.
struct RunSpec {
    std::string label; // setup label, e.g. "N20_g0.0001"
    std::size_t setup = 0; // 0: the scenario itself, k: companion k
    CouplingModel model;
    PhysicalParams params;
    ChainGeometry geometry;
    InitialState initial;
    TimeGrid grid;
    SolverRequest solver;
    std::size_t smoothing_window = 1;

    std::string solver_tag() const;      // solver with the model resolved
    std::string file_stem() const { return label + "__" + solver_tag(); }
};

std::vector<RunSpec> expand_runs(const Scenario& s);

} // namespace wqed

#endif
