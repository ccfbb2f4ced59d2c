#include "wqed/model.hpp"

#include "wqed/errors.hpp"

#include <cmath>

namespace wqed {

ChainGeometry::ChainGeometry(std::vector<double> positions) : positions_(std::move(positions))
{
    if (positions_.empty())
        throw ConfigError("chain geometry needs at least one atom");
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        if (!std::isfinite(positions_[i]))
            throw ConfigError("atom positions must be finite");
        if (i > 0 && !(positions_[i] > positions_[i - 1]))
            throw ConfigError("atom positions must be strictly increasing");
    }
    if (positions_.size() >= 2) {
        const double d = positions_[1] - positions_[0];
        bool equal = true;
        for (std::size_t i = 1; i < positions_.size(); ++i)
            equal = equal && std::abs(positions_[i] - positions_[0] - static_cast<double>(i) * d) <= 1e-12 * std::max(1.0, std::abs(positions_[i]));
        if (equal)
            spacing_ = d;
    }
}

ChainGeometry ChainGeometry::uniform(std::size_t n, double spacing)
{
    if (n == 0)
        throw ConfigError("chain geometry needs at least one atom");
    if (n > 1 && !(spacing > 0.0 && std::isfinite(spacing)))
        throw ConfigError("spacing must be positive and finite");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = static_cast<double>(i) * spacing;
    ChainGeometry g(std::move(x));
    if (n > 1)
        g.spacing_ = spacing;
    return g;
}

double ChainGeometry::distance(std::size_t i, std::size_t j) const
{
    return std::abs(positions_.at(i) - positions_.at(j));
}

void PhysicalParams::validate() const
{
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ConfigError("gamma_ratio must be > 0");
    if (!(cutoff > 1.0) || !std::isfinite(cutoff))
        throw ConfigError("cutoff must be > 1");
}

TimeGrid TimeGrid::covering(double t_max, double dt)
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw ConfigError("dt must be > 0");
    if (!(t_max > 0.0) || !std::isfinite(t_max))
        throw ConfigError("t_max must be > 0");
    return {dt, static_cast<std::size_t>(std::llround(t_max / dt))};
}

} // namespace wqed
