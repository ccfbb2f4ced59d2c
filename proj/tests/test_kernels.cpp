#include "wqed/errors.hpp"
#include "wqed/kernels.hpp"
#include "wqed/model.hpp"
#include "wqed/validation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace wqed;

namespace {

constexpr double pi = std::numbers::pi;
const CouplingModel kConst{CouplingKind::Constant};
const CouplingModel kLin{CouplingKind::Linear};

// A and B at cutoff 50 from mpmath quadrature of the defining integrals (30 digits).
struct Ref {
    int linear;
    double r, phi;
    double a_re, a_im, b_re, b_im;
};
const Ref kRefs[] = {
    {0, 0.0, 0.7, 0.034647513508884006, 0.52172012198041226, 0.37550094917616097, -0.026747161581693536},
    {0, 0.1 * pi, 2.5, -0.46728603276809631, 1.0360565335145024, 0.018937534231522102, -0.1944740300852472},
    {0, 1.5, 1.5, -0.37481580055483869, 0.2988395090769363, 0.1003010564428295, -0.34531981240613772},
    {0, 2.0, 7.0, -0.7061198701587429, -0.42105113087298844, 0.076715036036791981, 0.048748608283067403},
    {1, 0.0, 0.7, 0.4252041586977183, 0.47970577881569847, 0.17671860700649174, 0.20315263215895673},
    {1, 0.1 * pi, 2.5, 0.18589240449562881, 0.73057744139959591, 0.055867431469389933, -0.025265651811139659},
    {1, 1.5, 1.5, -0.26235488517475954, -0.24358758382012759, 0.081166146985682605, -0.92027334796785726},
    {1, 2.0, 7.0, -0.62476607529506328, -0.34447699604558289, -0.004858699670252592, 0.014235257473018715},
};

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

} // namespace

TEST(Kernels, MatchReferenceValues)
{
    for (const Ref& r : kRefs) {
        const CouplingModel& m = r.linear ? kLin : kConst;
        EXPECT_LT(rel(kernel_A(m, r.r, r.phi, 50.0), {r.a_re, r.a_im}), 1e-11) << r.linear << " " << r.r << " " << r.phi;
        EXPECT_LT(rel(kernel_B(m, r.r, r.phi, 50.0), {r.b_re, r.b_im}), 1e-10) << r.linear << " " << r.r << " " << r.phi;
    }
}

TEST(Kernels, SpecialPointsAreFlagged)
{
    EXPECT_TRUE(kernel_A_eval(kConst, 0.0, 1.0, 50.0).special_point);
    EXPECT_TRUE(kernel_A_eval(kLin, 1.5, 1.5, 50.0).special_point);
    EXPECT_FALSE(kernel_A_eval(kLin, 1.5, 1.6, 50.0).special_point);
    EXPECT_TRUE(kernel_B_eval(kConst, 2.0, 2.0, 50.0).special_point);
}

TEST(Kernels, ClosedFormMatchesQuadratureOnGrid)
{
    const KernelGridResult g = kernel_grid_errors(50.0);
    EXPECT_EQ(g.points, 32u);
    EXPECT_LT(g.max_rel_error, 1e-9);
    EXPECT_LT(g.max_rel_error_special, 1e-6);
}

TEST(Kernels, NearLightConeStaysContinuous)
{
    // The generic formula close to r = phi must meet the limit formula.
    for (const auto& m : {kConst, kLin}) {
        const cplx on = kernel_A(m, 2.0, 2.0, 1e4);
        const cplx off = kernel_A(m, 2.0, 2.0 + 1e-9, 1e4);
        EXPECT_LT(std::abs(on - off), 1e-6);
    }
}

TEST(Kernels, AVanishesAtZeroLag)
{
    EXPECT_EQ(kernel_A(kConst, 0.3, 0.0, 1e4), cplx(0.0));
    EXPECT_EQ(kernel_A(kLin, 0.0, 0.0, 1e4), cplx(0.0));
}

TEST(Kernels, BAtOriginClosedForms)
{
    // (2/pi) int_0^L w
    for (double L : {50.0, 1e4}) {
        const double c = 2.0 / pi * (1.0 - 1.0 / (1.0 + L));
        const double l = 2.0 / pi * (std::log(1.0 + L) + 1.0 / (1.0 + L) - 1.0);
        EXPECT_NEAR(kernel_B(kConst, 0.0, 0.0, L).real(), c, 1e-14);
        EXPECT_NEAR(kernel_B(kLin, 0.0, 0.0, L).real(), l, 1e-13);
        EXPECT_NEAR(kernel_B(kLin, 0.0, 0.0, L).imag(), 0.0, 1e-13);
    }
}

TEST(Kernels, BIsHermitianInLag)
{
    for (const auto& m : {kConst, kLin})
        for (double phi : {0.3, 4.0}) {
            const cplx p = kernel_B(m, 0.7, phi, 1e4);
            const cplx n = kernel_B(m, 0.7, -phi, 1e4);
            EXPECT_NEAR(std::abs(n - std::conj(p)), 0.0, 1e-15);
        }
}

TEST(Kernels, BIsLagDerivativeOfA)
{
    // int_0^phi B = (2i/pi) conj(A(phi))
    for (const auto& m : {kConst, kLin}) {
        const double phi = 2.3, h = 1e-5, r = 0.4;
        auto C = [&](double p) { return cplx(0.0, 2.0 / pi) * std::conj(kernel_A(m, r, p, 50.0)); };
        const cplx d = (C(phi + h) - C(phi - h)) / (2.0 * h);
        EXPECT_LT(rel(d, kernel_B(m, r, phi, 50.0)), 1e-7);
    }
}

TEST(Kernels, LargeCutoffStaysFinite)
{
    for (const auto& m : {kConst, kLin}) {
        const cplx a = kernel_A(m, 0.3, 5.0, 1e6);
        const cplx b = kernel_B(m, 0.3, 5.0, 1e6);
        EXPECT_TRUE(std::isfinite(a.real()) && std::isfinite(a.imag()));
        EXPECT_TRUE(std::isfinite(b.real()) && std::isfinite(b.imag()));
    }
    // The constant model converges in the cutoff.
    EXPECT_LT(std::abs(kernel_A(kConst, 0.3, 5.0, 1e6) - kernel_A(kConst, 0.3, 5.0, 1e5)), 1e-4);
}

TEST(Kernels, RejectsBadArguments)
{
    EXPECT_THROW(kernel_A(kConst, 0.1, 1.0, 1.0), DomainError);
    EXPECT_THROW(kernel_A(kConst, -0.1, 1.0, 50.0), DomainError);
    EXPECT_THROW(kernel_A(kConst, 0.1, -1.0, 50.0), DomainError);
    EXPECT_THROW(kernel_B(kLin, 0.1, std::nan(""), 50.0), DomainError);
    EXPECT_THROW(coupling_kind_from_string("quadratic"), ConfigError);
}

TEST(Kernels, ModelNames)
{
    EXPECT_EQ(coupling_kind_from_string("constant"), CouplingKind::Constant);
    EXPECT_EQ(coupling_kind_from_string("linear"), CouplingKind::Linear);
    EXPECT_EQ(to_string(CouplingKind::Linear), "linear");
    EXPECT_DOUBLE_EQ(kLin.spectral_weight(1.0), 0.25);
    EXPECT_DOUBLE_EQ(kConst.spectral_weight(1.0), 0.25);
}

TEST(DistanceClasses, UniformChainHasOneClassPerSeparation)
{
    const auto g = ChainGeometry::uniform(20, 0.1 * pi);
    const DistanceClasses c = classify_distances(g.positions());
    EXPECT_EQ(c.size(), 20u);
    EXPECT_EQ(c.distances[0], 0.0);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j) {
            EXPECT_EQ(c.of(i, j), c.of(j, i));
            EXPECT_NEAR(c.distances[c.of(i, j)], g.distance(i, j), 1e-12);
        }
}

TEST(DistanceClasses, IrregularChain)
{
    const std::vector<double> x{0.0, 1.0, 3.0, 4.0}; // separations 1, 2, 3, 4 with 1 and 3 repeated
    const DistanceClasses c = classify_distances(x);
    EXPECT_EQ(c.size(), 5u);
    EXPECT_EQ(c.of(0, 1), c.of(2, 3));
}

TEST(KernelTable, SamplesAndEvaluationBudget)
{
    const auto g = ChainGeometry::uniform(5, 0.1 * pi);
    const KernelTable t = build_kernel_table(kLin, g.positions(), 0.01, 200, 1e4);
    EXPECT_EQ(t.n_classes(), 5u);
    EXPECT_LE(t.evaluations_A, static_cast<long>(t.n_classes() * (t.n_max + 1)));
    EXPECT_LE(t.evaluations_B, static_cast<long>(t.n_classes() * (t.n_max + 1)));
    for (std::size_t c = 0; c < t.n_classes(); ++c) {
        EXPECT_EQ(t.A(c, 0), cplx(0.0));
        const double r = t.classes.distances[c];
        EXPECT_EQ(t.A(c, 37), kernel_A(kLin, r, 37 * 0.01, 1e4));
        EXPECT_EQ(t.B(c, 150), kernel_B(kLin, r, 150 * 0.01, 1e4));
    }
}

TEST(KernelTable, CacheRoundTrip)
{
    const auto dir = std::filesystem::temp_directory_path() / "wqed_kernel_cache_test";
    std::filesystem::remove_all(dir);
    const auto g = ChainGeometry::uniform(3, 0.5);
    const KernelTable built = cached_kernel_table(dir, kConst, g.positions(), 0.01, 50, 50.0);
    ASSERT_FALSE(std::filesystem::is_empty(dir));
    const KernelTable again = cached_kernel_table(dir, kConst, g.positions(), 0.01, 50, 50.0);
    EXPECT_EQ(again.values_A, built.values_A);
    EXPECT_EQ(again.values_B, built.values_B);
    EXPECT_EQ(again.photon_weights, built.photon_weights);
    EXPECT_EQ(again.classes.pair_class, built.classes.pair_class);

    EXPECT_NE(kernel_cache_key(kConst, g.positions(), 0.01, 50, 50.0),
              kernel_cache_key(kConst, g.positions(), 0.005, 50, 50.0));
    EXPECT_NE(kernel_cache_key(kConst, g.positions(), 0.01, 50, 50.0),
              kernel_cache_key(kLin, g.positions(), 0.01, 50, 50.0));
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_kernel_table(dir / "missing.json"), IoError);
}
