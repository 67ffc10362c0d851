#include "coex/quadrature.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace coex;

namespace
{

constexpr double kNW = 0.9455754564928424;
constexpr double kNL = 0.09455754564928436;

struct Fixture
{
    CoexParams p;
    Propagation prop{p};
    QuadratureSpec spec;
    double sWW = p.gamma_cs / p.p_w;
    double sWL = p.gamma_ed / p.p_l;
};

} // namespace

TEST(NFunc, GaussianClosedForm)
{
    Fixture f;
    double nw = NFuncRatio(0.0, 0.0, f.sWW, f.p.lambda_w, f.prop, f.spec);
    double nl = NFuncRatio(0.0, 0.0, f.sWL, f.p.lambda_l, f.prop, f.spec);
    EXPECT_NEAR(nw, kNW, 1e-5 * kNW);
    EXPECT_NEAR(nl, kNL, 1e-5 * kNL);
    EXPECT_NEAR(NFunc({0.0, 0.0}, 0.0, f.p.gamma_cs, f.p.lambda_w, f.p.p_w, f.p, f.spec), nw, 1e-12);
}

TEST(NFunc, TranslationInvariantWithoutExclusion)
{
    Fixture f;
    double at0 = NFuncRatio(0.0, 0.0, f.sWW, f.p.lambda_w, f.prop, f.spec);
    for (double y : {3.0, 40.0, 500.0})
    {
        EXPECT_NEAR(NFuncRatio(y, 0.0, f.sWW, f.p.lambda_w, f.prop, f.spec), at0, 1e-6 * at0);
    }
}

TEST(NFunc, ExclusionShrinksMass)
{
    Fixture f;
    double prev = NFuncRatio(20.0, 0.0, f.sWW, f.p.lambda_w, f.prop, f.spec);
    for (double r : {5.0, 15.0, 20.0, 30.0, 60.0, 200.0})
    {
        double v = NFuncRatio(20.0, r, f.sWW, f.p.lambda_w, f.prop, f.spec);
        EXPECT_LE(v, prev + 1e-9);
        EXPECT_GE(v, 0.0);
        prev = v;
    }
    EXPECT_LT(prev, 1e-8);
}

TEST(NFunc, ScalesLinearlyInDensity)
{
    Fixture f;
    double a = NFuncRatio(15.0, 15.0, f.sWW, 1e-4, f.prop, f.spec);
    double b = NFuncRatio(15.0, 15.0, f.sWW, 7e-4, f.prop, f.spec);
    EXPECT_NEAR(b, 7.0 * a, 1e-9 * b);
}

TEST(NFunc, Runtime)
{
    Fixture f;
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 100; ++i)
    {
        NFuncRatio(0.0, 0.0, f.sWW, f.p.lambda_w, f.prop, f.spec);
    }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(dt, 1.0);
}

TEST(CFunc, CoincidentCentresDoubleTheRatio)
{
    Fixture f;
    // Both factors at the origin: the integrand is the sensing kernel at 2s, and N scales as s^{-1/2}.
    double c = CFuncRatio({0.0, 0.0}, f.sWW, {0.0, 0.0}, f.sWW, 0.0, f.p.lambda_w, f.prop, f.spec);
    EXPECT_NEAR(c, 0.668622817409654, 1e-5 * 0.668622817409654);
}

TEST(CFunc, SymmetricAndBounded)
{
    Fixture f;
    const double lw = f.p.lambda_w;
    for (double d : {0.0, 5.0, 25.0, 60.0, 150.0})
    {
        double ab = CFuncRatio({0.0, 0.0}, f.sWW, {d, 0.0}, f.sWL, 0.0, lw, f.prop, f.spec);
        double ba = CFuncRatio({0.0, 0.0}, f.sWL, {d, 0.0}, f.sWW, 0.0, lw, f.prop, f.spec);
        EXPECT_NEAR(ab, ba, 1e-5 * std::max(ab, 1e-12));
        double na = NFuncRatio(0.0, 0.0, f.sWW, lw, f.prop, f.spec);
        double nb = NFuncRatio(0.0, 0.0, f.sWL, lw, f.prop, f.spec);
        EXPECT_LE(ab, std::min(na, nb) * (1.0 + 1e-6));
        EXPECT_GE(ab, 0.0);
    }
    double far = CFuncRatio({0.0, 0.0}, f.sWW, {400.0, 0.0}, f.sWW, 0.0, lw, f.prop, f.spec);
    EXPECT_LT(far, 1e-8);
}

TEST(CFunc, ExclusionFrameConvention)
{
    Fixture f;
    const Point2 y1{30.0, 10.0};
    const Point2 y2{-12.0, 20.0};
    double framed = CFunc(y1, f.p.gamma_cs, y2, f.p.gamma_cs, f.p.lambda_w, f.p.p_w, f.p, f.spec);
    double ratio = CFuncRatio(y1, f.sWW, y2, f.sWW, y2.Norm(), f.p.lambda_w, f.prop, f.spec);
    EXPECT_NEAR(framed, ratio, 1e-12);
    double open = CFuncRatio(y1, f.sWW, y2, f.sWW, 0.0, f.p.lambda_w, f.prop, f.spec);
    EXPECT_LE(ratio, open);
}

TEST(CFunc, FixedPanelsAgreeWithAdaptive)
{
    Fixture f;
    QuadratureSpec adaptive = f.spec;
    adaptive.pair_points = 0;
    const Point2 y1{40.0, 0.0};
    const Point2 y2{15.0, 0.0};
    double fixed = CFuncRatio(y1, f.sWW, y2, f.sWL, 15.0, f.p.lambda_w, f.prop, f.spec);
    double ref = CFuncRatio(y1, f.sWW, y2, f.sWL, 15.0, f.p.lambda_w, f.prop, adaptive);
    EXPECT_NEAR(fixed, ref, 1e-4 * ref);
}

TEST(FuncM, FrozenValueAndSeriesContinuity)
{
    EXPECT_NEAR(FuncM(1.0, 1.0, 0.0), 0.19978820044686402, 1e-14);
    // Across the series switch the divided difference must stay smooth.
    for (double n1 : {0.1, 0.9, 2.5})
    {
        double below = FuncM(n1, 0.5 + 0.999e-3, 0.5);
        double above = FuncM(n1, 0.5 + 1.001e-3, 0.5);
        EXPECT_NEAR(below, above, 1e-6);
        double exact0 = MomentExp(1, n1);
        EXPECT_NEAR(FuncM(n1, 0.5, 0.5), exact0, 1e-14);
    }
}

TEST(FuncM, MatchesDefinitionAwayFromDegeneracy)
{
    for (double n1 : {0.2, 1.3})
    {
        for (double d : {0.01, 0.4, 2.0})
        {
            double direct = (PhiMap(n1) - PhiMap(n1 + d)) / d;
            EXPECT_NEAR(FuncM(n1, 1.0 + d, 1.0), direct, 1e-14);
        }
    }
}

TEST(Scalars, PhiAndMoments)
{
    EXPECT_DOUBLE_EQ(PhiMap(0.0), 1.0);
    EXPECT_NEAR(PhiMap(2.0), (1.0 - std::exp(-2.0)) / 2.0, 1e-15);
    EXPECT_NEAR(MomentExp(0, 3.0), PhiMap(3.0), 1e-14);
    // J_1(x) = (1 - (1 + x) e^{-x}) / x^2.
    for (double x : {0.5, 10.0, 50.0})
    {
        double exact = (1.0 - (1.0 + x) * std::exp(-x)) / (x * x);
        EXPECT_NEAR(MomentExp(1, x), exact, 1e-13 * std::max(1.0, exact));
    }
}

TEST(Scalars, UandVAreProbabilitiesOfSilence)
{
    Fixture f;
    // U at a far distance reduces to phi(N); close-by it tends to phi(N) - J_1(N).
    double n = 0.8;
    EXPECT_NEAR(FuncU(1e4, f.sWW, n, f.prop), PhiMap(n), 1e-12);
    EXPECT_NEAR(FuncU(0.5, f.sWW, n, f.prop), PhiMap(n) - MomentExp(1, n), 1e-5);
    for (double d : {0.5, 10.0, 30.0, 100.0})
    {
        double v = FuncV(d, f.sWW, f.sWW, 0.9, 0.9, 0.3, f.prop);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Gauss, ExactForPolynomials)
{
    for (int n = 1; n <= 20; ++n)
    {
        const GaussRule& g = GaussLegendre(n);
        ASSERT_EQ(static_cast<int>(g.nodes.size()), n);
        int deg = 2 * n - 1;
        double sum = 0.0;
        for (size_t i = 0; i < g.nodes.size(); ++i)
        {
            sum += g.weights[i] * std::pow(g.nodes[i], deg - 1);
        }
        double exact = ((deg - 1) % 2 == 0) ? 2.0 / deg : 0.0;
        EXPECT_NEAR(sum, exact, 1e-13) << "n = " << n;
    }
    EXPECT_THROW(GaussLegendre(0), std::invalid_argument);
    EXPECT_THROW(GaussLegendre(21), std::invalid_argument);
}

TEST(Integrate, ConvergesAndReportsFailure)
{
    QuadratureSpec spec;
    double v = Integrate([](double x) { return std::exp(-x * x); }, 0.0, std::numeric_limits<double>::infinity(),
                         spec);
    EXPECT_NEAR(v, std::sqrt(kPi) / 2.0, 1e-9);
    EXPECT_THROW(Integrate([](double x) { return 1.0 / x; }, 0.0, 1.0, spec), QuadratureError);
    try
    {
        Integrate([](double x) { return 1.0 / x; }, 0.0, 1.0, spec);
    }
    catch (const QuadratureError& e)
    {
        EXPECT_GT(e.ErrorBound(), 0.0);
    }
}

TEST(Integrate, SpecValidation)
{
    QuadratureSpec spec;
    EXPECT_NO_THROW(spec.Validate());
    spec.rel_tol = 0.0;
    EXPECT_THROW(spec.Validate(), std::invalid_argument);
    QuadratureSpec pts;
    pts.radial_points = 0;
    EXPECT_THROW(pts.Validate(), std::invalid_argument);
}

TEST(Interference, RadialKernelClosedForms)
{
    Fixture f;
    const double r0 = 20.0;
    const double l0 = f.prop.Loss(r0);
    for (double T : {0.1, 1.0, 10.0})
    {
        double st = std::sqrt(T);
        double open = RadialKernelIntegral(T, l0, 1.0, 0.0, f.prop, f.spec);
        EXPECT_NEAR(open, kPi * kPi / 2.0 * st * r0 * r0, 1e-6 * open);
        double excl = RadialKernelIntegral(T, l0, 1.0, r0, f.prop, f.spec);
        double exact = kPi * st * r0 * r0 * (kPi / 2.0 - std::atan(1.0 / st));
        EXPECT_NEAR(excl, exact, 1e-6 * exact);
    }
    EXPECT_EQ(RadialKernelIntegral(0.0, l0, 1.0, 0.0, f.prop, f.spec), 0.0);
}

TEST(Interference, ConstantRetentionIsThinning)
{
    Fixture f;
    InterferenceKernel k;
    k.T = 1.0;
    k.l_serving = f.prop.Loss(20.0);
    k.lambda = 4e-4;
    k.h = [](const Point2&) { return 0.4; };
    k.h_far = 0.4;
    k.h_support = 100.0;
    double v = LaplaceInterferenceIntegral(k, 20.0, f.p, f.spec);
    double ref = 0.4 * 4e-4 * RadialKernelIntegral(1.0, k.l_serving, 1.0, 20.0, f.prop, f.spec);
    EXPECT_NEAR(v, ref, 1e-6 * ref);
    k.T = -1.0;
    EXPECT_THROW(LaplaceInterferenceIntegral(k, 20.0, f.p, f.spec), std::invalid_argument);
}
