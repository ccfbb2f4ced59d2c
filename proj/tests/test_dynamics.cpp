#include "wqed/dynamics.hpp"
#include "wqed/errors.hpp"
#include "wqed/observables.hpp"
#include "wqed/validation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace wqed;

namespace {

constexpr double pi = std::numbers::pi;
const CouplingModel kConst{CouplingKind::Constant};
const CouplingModel kLin{CouplingKind::Linear};

Trajectory volterra(const CouplingModel& m, const PhysicalParams& p, const ChainGeometry& g,
                    const std::vector<cplx>& init, const TimeGrid& grid, const VolterraOptions& o = {})
{
    const KernelTable t = build_kernel_table(m, g.positions(), grid.dt, grid.n_steps, p.cutoff);
    return solve_volterra(p, g, m, init, grid, t, o);
}

} // namespace

TEST(Dde, SingleAtomIsExactExponential)
{
    const PhysicalParams p{1e-2, 1e4};
    const auto g = ChainGeometry::uniform(1, 0.0);
    const Trajectory t = solve_dde(p, g, std::vector<cplx>{1.0}, TimeGrid::covering(50.0, 0.01));
    for (std::size_t n = 0; n < t.steps(); n += 97)
        EXPECT_NEAR(std::norm(t.alpha(n, 0)), std::exp(-p.gamma * t.time(n)), 1e-12);
    EXPECT_EQ(t.solver, "dde");
}

TEST(Markov, SingleAtomIsExactExponential)
{
    const PhysicalParams p{1e-2, 1e4};
    const auto g = ChainGeometry::uniform(1, 0.0);
    const Trajectory t = solve_markov(p, g, std::vector<cplx>{1.0}, TimeGrid::covering(50.0, 0.01));
    EXPECT_NEAR(std::norm(t.alpha(t.steps() - 1, 0)), std::exp(-0.5), 1e-12);
}

TEST(Markov, TwoAtomsAtFullWavelength)
{
    // k0 d = 2 pi: the symmetric state decays at 2 Gamma0, the antisymmetric one is dark.
    const PhysicalParams p{1e-2, 1e4};
    const auto g = ChainGeometry::uniform(2, 2.0 * pi);
    const double s = 1.0 / std::sqrt(2.0);
    const auto grid = TimeGrid::covering(40.0, 0.01);
    const Trajectory sym = solve_markov(p, g, std::vector<cplx>{s, s}, grid);
    const Trajectory anti = solve_markov(p, g, std::vector<cplx>{s, -s}, grid);
    for (std::size_t n = 0; n < grid.points(); n += 101) {
        const double ps = std::norm(sym.alpha(n, 0)) + std::norm(sym.alpha(n, 1));
        const double pa = std::norm(anti.alpha(n, 0)) + std::norm(anti.alpha(n, 1));
        EXPECT_NEAR(ps, std::exp(-2.0 * p.gamma * grid.time(n)), 1e-11);
        EXPECT_NEAR(pa, 1.0, 1e-11);
    }
}

TEST(Dde, ZeroDelaysReduceToMarkov) { EXPECT_LT(reduction_chain_deviation(), 1e-8); }

TEST(Dde, SecondOrderConvergence)
{
    const double r = dde_convergence_ratio();
    EXPECT_GE(r, 3.4);
    EXPECT_LE(r, 4.6);
}

TEST(Dde, NoCouplingBeforeLightArrives)
{
    // Atom 2 sits 3 units away and is untouched until t = 3.
    const PhysicalParams p{1e-2, 1e4};
    const auto g = ChainGeometry(std::vector<double>{0.0, 3.0});
    const Trajectory t = solve_dde(p, g, std::vector<cplx>{1.0, 0.0}, TimeGrid::covering(6.0, 0.01));
    EXPECT_EQ(t.alpha(299, 1), cplx(0.0));
    EXPECT_GT(std::abs(t.alpha(350, 1)), 1e-4);
}

TEST(Volterra, SingleAtomStartsFlatAndDecays)
{
    const PhysicalParams p{1e-2, 1e4};
    const auto g = ChainGeometry::uniform(1, 0.0);
    const Trajectory t = volterra(kConst, p, g, {1.0}, TimeGrid::covering(5.0, 0.005));
    double prev = 1.0;
    for (std::size_t n = 1; n < t.steps(); ++n) {
        const double pe = std::norm(t.alpha(n, 0));
        EXPECT_LE(pe, prev + 1e-15) << n;
        prev = pe;
    }
    EXPECT_LT(prev, 1.0);
    EXPECT_EQ(t.solver, "volterra-constant");
}

TEST(Volterra, ConservesProbability)
{
    const PhysicalParams p{1e-2, 1e4};
    const auto g = ChainGeometry::uniform(4, 0.1 * pi);
    const auto s = timed_dicke(g, 1.0);
    for (const auto& m : {kConst, kLin}) {
        const Trajectory t = volterra(m, p, g, s.amplitudes, TimeGrid::covering(10.0, 0.005));
        ASSERT_TRUE(t.has_photon_number());
        double worst = 0.0;
        for (double r : t.norm_residual)
            worst = std::max(worst, std::abs(r));
        EXPECT_LT(worst, 1e-6);
    }
}

TEST(Volterra, PhotonNumberRecomputationAgrees)
{
    const PhysicalParams p{1e-2, 50.0};
    const auto g = ChainGeometry::uniform(2, 0.1 * pi);
    const auto grid = TimeGrid::covering(5.0, 0.005);
    const KernelTable table = build_kernel_table(kLin, g.positions(), grid.dt, grid.n_steps, p.cutoff);
    const Trajectory t = solve_volterra(p, g, kLin, std::vector<cplx>{1.0, 0.0}, grid, table);
    const std::vector<double> nb = photon_number(t, p, table);
    ASSERT_EQ(nb.size(), t.photon_number.size());
    for (std::size_t n = 0; n < nb.size(); ++n)
        EXPECT_NEAR(nb[n], t.photon_number[n], 1e-10);
}

TEST(Volterra, SecondOrderConvergence)
{
    const double c = volterra_convergence_ratio(CouplingKind::Constant);
    EXPECT_GE(c, 3.4);
    EXPECT_LE(c, 4.6);
}

TEST(Volterra, MatchesModeOracleSingleAtom)
{
    std::string detail;
    EXPECT_LT(oracle_deviation(1, CouplingKind::Constant, {}, &detail), 1e-3) << detail;
}

TEST(Volterra, ChainReversalMirrorsAmplitudes)
{
    const PhysicalParams p{1e-2, 1e4};
    const std::vector<double> x{0.0, 0.4, 1.1};
    std::vector<double> mirrored;
    for (auto it = x.rbegin(); it != x.rend(); ++it)
        mirrored.push_back(x.back() - *it);
    const std::vector<cplx> a{0.6, cplx(0.0, 0.8), 0.0};
    const std::vector<cplx> b{0.0, cplx(0.0, 0.8), 0.6};
    const auto grid = TimeGrid::covering(8.0, 0.01);
    const Trajectory ta = volterra(kLin, p, ChainGeometry(x), a, grid);
    const Trajectory tb = volterra(kLin, p, ChainGeometry(mirrored), b, grid);
    for (std::size_t n = 0; n < grid.points(); n += 50)
        for (std::size_t i = 0; i < 3; ++i)
            EXPECT_NEAR(std::abs(ta.alpha(n, i) - tb.alpha(n, 2 - i)), 0.0, 1e-12);
}

TEST(Volterra, FlippedSignTripsBlowUpGuard)
{
    const PhysicalParams p{1e-2, 1e4};
    const auto g = ChainGeometry::uniform(1, 0.0);
    VolterraOptions o;
    o.sign = -1.0;
    const auto grid = TimeGrid::covering(20.0, 0.005);
    const Trajectory t = volterra(kConst, p, g, {1.0}, grid, o);
    EXPECT_EQ(t.status, RunStatus::Aborted);
    EXPECT_EQ(t.abort_reason.rfind("blow-up guard", 0), 0u) << t.abort_reason;
    EXPECT_LT(t.last_valid_step, grid.n_steps);
    EXPECT_EQ(t.steps(), t.last_valid_step + 1);
    for (std::size_t n = 0; n < t.steps(); ++n)
        EXPECT_LE(std::abs(t.alpha(n, 0)), kBlowUpLimit);
}

TEST(Volterra, RejectsBadInputs)
{
    const PhysicalParams p{1e-2, 1e4};
    const auto g = ChainGeometry::uniform(2, 0.3);
    const auto grid = TimeGrid::covering(1.0, 0.01);
    const KernelTable t = build_kernel_table(kConst, g.positions(), grid.dt, grid.n_steps, p.cutoff);
    EXPECT_THROW(solve_volterra(p, g, kConst, std::vector<cplx>{1.0, 0.1}, grid, t), DomainError);
    EXPECT_THROW(solve_volterra(p, g, kConst, std::vector<cplx>{1.0}, grid, t), DomainError);
    EXPECT_THROW(solve_volterra(p, g, kLin, std::vector<cplx>{1.0, 0.0}, grid, t), DomainError);
    EXPECT_THROW(solve_volterra(p, g, kConst, std::vector<cplx>{1.0, 0.0}, TimeGrid::covering(2.0, 0.01), t),
                 DomainError);
    EXPECT_THROW(solve_volterra({1e-2, 50.0}, g, kConst, std::vector<cplx>{1.0, 0.0}, grid, t), DomainError);
}

TEST(Oracle, RevivalGuard)
{
    const PhysicalParams p{1e-2, 50.0};
    const auto g = ChainGeometry::uniform(1, 0.0);
    EXPECT_GT(oracle_revival_time(g, 50.0, 8000), 30.0);
    OracleOptions o;
    o.n_modes = 200;
    EXPECT_THROW(solve_mode_oracle(p, g, kConst, std::vector<cplx>{1.0}, TimeGrid::covering(30.0, 0.01), o),
                 DomainError);
}

TEST(Oracle, ConservesProbability)
{
    const PhysicalParams p{1e-2, 20.0};
    const auto g = ChainGeometry::uniform(2, 0.5);
    OracleOptions o;
    o.n_modes = 2000;
    const Trajectory t = solve_mode_oracle(p, g, kConst, std::vector<cplx>{1.0, 0.0}, TimeGrid::covering(5.0, 0.01), o);
    for (double r : t.norm_residual)
        EXPECT_LT(std::abs(r), 1e-10);
}
