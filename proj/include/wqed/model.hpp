#ifndef WQED_MODEL_HPP
#define WQED_MODEL_HPP

#include "wqed/kernels.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace wqed {

// Atom coordinates k0*x_i, strictly increasing.
class ChainGeometry {
public:
    ChainGeometry() = default;
    explicit ChainGeometry(std::vector<double> positions);

    // positions (i-1)*spacing, i = 1..n
    static ChainGeometry uniform(std::size_t n, double spacing);

    std::size_t size() const { return positions_.size(); }
    const std::vector<double>& positions() const { return positions_; }
    double distance(std::size_t i, std::size_t j) const;
    // Set for chains built by uniform() or detected as equally spaced.
    std::optional<double> uniform_spacing() const { return spacing_; }

    friend bool operator==(const ChainGeometry&, const ChainGeometry&) = default;

private:
    std::vector<double> positions_;
    std::optional<double> spacing_;
};

struct PhysicalParams {
    double gamma = 1e-4;  // Gamma0 / omega0
    double cutoff = 1e4;  // Lambda / k0

    // Throws ConfigError on gamma <= 0 or cutoff <= 1.
    void validate() const;
    // Outside the weak-coupling regime gamma <= 0.1.
    bool strong_coupling_warning() const { return gamma > 0.1; }

    friend bool operator==(const PhysicalParams&, const PhysicalParams&) = default;
};

struct TimeGrid {
    double dt = 0.005;
    std::size_t n_steps = 0;

    double time(std::size_t n) const { return static_cast<double>(n) * dt; }
    double t_max() const { return time(n_steps); }
    std::size_t points() const { return n_steps + 1; }

    // n_steps = round(t_max / dt)
    static TimeGrid covering(double t_max, double dt);

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

} // namespace wqed

#endif
