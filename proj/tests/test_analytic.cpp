#include "coex/analytic.hpp"

#include <gtest/gtest.h>

using namespace coex;

namespace
{

const std::vector<HKind> kAllKinds{HKind::H1,  HKind::H1W, HKind::H2W, HKind::H2L, HKind::H3W,
                                   HKind::H3L, HKind::H4W, HKind::H4L, HKind::H5W, HKind::H5L};

CoexParams
ParamsFor(HKind k)
{
    CoexParams p;
    switch (AccessOf(k))
    {
    case Access::Continuous:
        return p;
    case Access::LbtSame:
        return Scenario::LbtSame(-82.0).Apply(p);
    case Access::LbtLower:
        return Scenario::LbtLower(-77.0).Apply(p);
    }
    return p;
}

Side
ProbeSide(HKind k)
{
    return ProbeIsEnb(k) ? Side::Lte : Side::WiFi;
}

} // namespace

TEST(Map, FrozenTypicalValues)
{
    CoexParams p;
    AnalyticModel m(p, {});
    EXPECT_NEAR(m.NW(), 0.9455754564928424, 1e-5 * 0.9455754564928424);
    EXPECT_NEAR(m.NL(), 0.09455754564928436, 1e-5 * 0.09455754564928436);
    EXPECT_NEAR(m.TypicalMap(Access::Continuous, Side::WiFi), 0.5883905941396521, 1e-6);
    EXPECT_DOUBLE_EQ(m.TypicalMap(Access::Continuous, Side::Lte), 1.0);
    CoexParams solo = p;
    solo.lambda_l = 0.0;
    AnalyticModel ms(solo, {});
    EXPECT_NEAR(ms.TypicalMap(Access::Continuous, Side::WiFi), 0.6467427096784799, 1e-6);
}

TEST(Map, TaggedAtLeastTypical)
{
    for (Access a : {Access::Continuous, Access::LbtSame, Access::LbtLower})
    {
        CoexParams p = a == Access::LbtLower ? Scenario::LbtLower(-77.0).Apply(CoexParams{})
                                             : Scenario::LbtSame(-82.0).Apply(CoexParams{});
        AnalyticModel m(p, {});
        for (Side s : {Side::WiFi, Side::Lte})
        {
            double typ = m.TypicalMap(a, s);
            double tag = m.TaggedMap(a, s);
            EXPECT_GE(tag, typ - 1e-12);
            EXPECT_LE(tag, 1.0);
            EXPECT_GT(typ, 0.0);
        }
    }
}

TEST(Map, ContinuousMonotoneInLteDensity)
{
    double prev = 1.0;
    for (double ll : {0.0, 1e-4, 4e-4, 8e-4, 2e-3})
    {
        CoexParams p;
        p.lambda_l = ll;
        AnalyticModel m(p, {});
        double v = m.TypicalMap(Access::Continuous, Side::WiFi);
        EXPECT_LE(v, prev + 1e-12);
        prev = v;
    }
}

TEST(Map, LbtSameBracket)
{
    AnalyticModel m(Scenario::LbtSame(-72.0).Apply(CoexParams{}), {});
    double n = m.NW() + m.NL();
    double v = m.TypicalMap(Access::LbtSame, Side::WiFi);
    EXPECT_GE(v, 1.0 / (1.0 + n));
    EXPECT_LE(v, 1.0 / n);
}

TEST(Map, LbtLowerWifiIgnoresLte)
{
    CoexParams p = Scenario::LbtLower(-77.0).Apply(CoexParams{});
    CoexParams solo = p;
    solo.lambda_l = 0.0;
    AnalyticModel m(p, {});
    AnalyticModel ms(solo, {});
    EXPECT_NEAR(m.TypicalMap(Access::LbtLower, Side::WiFi), ms.TypicalMap(Access::Continuous, Side::WiFi), 1e-12);
    EXPECT_NEAR(m.TaggedMap(Access::LbtLower, Side::WiFi), ms.TaggedMap(Access::Continuous, Side::WiFi), 1e-12);
}

TEST(Map, SymmetricBaseline)
{
    AnalyticModel m(Scenario::Baseline().Apply(CoexParams{}), {});
    EXPECT_NEAR(m.TypicalMap(Access::LbtSame, Side::WiFi), m.TypicalMap(Access::LbtSame, Side::Lte), 1e-12);
    EXPECT_NEAR(m.TaggedMap(Access::LbtSame, Side::WiFi), m.TaggedMap(Access::LbtSame, Side::Lte), 1e-9);
}

TEST(CondMap, ProbabilitiesAndPlateau)
{
    for (HKind k : kAllKinds)
    {
        CoexParams p = ParamsFor(k);
        AnalyticModel m(p, {});
        const double typical = m.TypicalMap(AccessOf(k), ProbeSide(k));
        EXPECT_NEAR(m.HFar(k), typical, 1e-12) << HKindName(k);
        // 10x the half-sensing radius at the most sensitive ratio is about 266 m.
        for (double th : {0.0, 1.0, 2.5, kPi})
        {
            Point2 x{300.0 * std::cos(th), 300.0 * std::sin(th)};
            EXPECT_LT(std::abs(m.H(k, 15.0, x) - typical), 0.01) << HKindName(k);
        }
        for (double r : {16.0, 25.0, 40.0, 80.0})
        {
            for (double th : {0.0, 0.7, 2.0, kPi})
            {
                double h = m.H(k, 15.0, {r * std::cos(th), r * std::sin(th)});
                EXPECT_GE(h, 0.0) << HKindName(k);
                EXPECT_LE(h, 1.0) << HKindName(k);
            }
        }
    }
}

TEST(CondMap, NearFieldSuppression)
{
    for (HKind k : kAllKinds)
    {
        if (k == HKind::H5W)
        {
            // A Wi-Fi probe never defers to a lower-priority eNB.
            continue;
        }
        AnalyticModel m(ParamsFor(k), {});
        EXPECT_LT(m.H(k, 15.0, {15.5, 0.0}), 1e-3) << HKindName(k);
    }
}

TEST(CondMap, LowerPriorityDensityThinsApsNearTaggedEnb)
{
    AnalyticModel m(Scenario::LbtLower(-82.0).Apply(CoexParams{}), {});
    HEvaluator ev(m, HKind::H5W, 15.0);
    ev.SetRing(15.5);
    EXPECT_GT(ev.At(0.0), 0.3);
    EXPECT_LT(ev.DensityAt(0.0), 1e-3);
    ev.SetRing(300.0);
    EXPECT_NEAR(ev.DensityAt(1.0), ev.At(1.0), 1e-9);
    HEvaluator same(m, HKind::H5L, 15.0);
    same.SetRing(40.0);
    EXPECT_EQ(same.DensityAt(0.5), same.At(0.5));
}

TEST(CondMap, H4WisH1WithoutLte)
{
    CoexParams p = Scenario::LbtLower(-77.0).Apply(CoexParams{});
    AnalyticModel lower(p, {});
    CoexParams solo = p;
    solo.lambda_l = 0.0;
    AnalyticModel cont(solo, {});
    for (Point2 x : {Point2{20.0, 0.0}, Point2{-30.0, 12.0}, Point2{0.0, 70.0}})
    {
        EXPECT_NEAR(lower.H(HKind::H4W, 15.0, x), cont.H(HKind::H1, 15.0, x), 1e-9);
    }
}

TEST(CondMap, ErrorsInsideExclusionBall)
{
    AnalyticModel m(CoexParams{}, {});
    EXPECT_THROW(m.H(HKind::H1, 15.0, {5.0, 0.0}), std::domain_error);
    EXPECT_NO_THROW(m.H(HKind::H1W, 15.0, {5.0, 0.0}));
    EXPECT_THROW(m.H(HKind::H1, -1.0, {20.0, 0.0}), std::invalid_argument);
}

TEST(Coverage, LteClosedFormWithoutWifi)
{
    for (double ll : {1e-4, 4e-4, 1.6e-3})
    {
        CoexParams p;
        p.lambda_w = 0.0;
        p.lambda_l = ll;
        AnalyticModel m(p, {});
        EXPECT_NEAR(m.Coverage(Access::Continuous, Side::Lte, 1.0), 0.5600991535115574, 1e-3);
    }
}

TEST(Coverage, MonotoneAndBounded)
{
    AnalyticModel m(CoexParams{}, {});
    for (Side s : {Side::WiFi, Side::Lte})
    {
        EXPECT_DOUBLE_EQ(m.Coverage(Access::Continuous, s, 0.0), 1.0);
        double prev = 1.0;
        for (double db = -10.0; db <= 20.0; db += 5.0)
        {
            double v = m.Coverage(Access::Continuous, s, DbToLinear(db));
            EXPECT_LE(v, prev + 1e-9);
            EXPECT_GE(v, 0.0);
            prev = v;
        }
    }
    EXPECT_THROW(m.Coverage(Access::Continuous, Side::WiFi, -1.0), std::invalid_argument);
}

TEST(Coverage, NoiseOnlyReducesCoverage)
{
    CoexParams quiet;
    CoexParams noisy;
    noisy.sigma_n2 = DbmToMw(-90.0);
    AnalyticModel a(quiet, {});
    AnalyticModel b(noisy, {});
    for (Side s : {Side::WiFi, Side::Lte})
    {
        EXPECT_LT(b.Coverage(Access::Continuous, s, 1.0), a.Coverage(Access::Continuous, s, 1.0));
    }
}

TEST(Coverage, SensitiveThresholdHelpsBothSides)
{
    AnalyticModel sensitive(Scenario::LbtSame(-82.0).Apply(CoexParams{}), {});
    AnalyticModel deaf(Scenario::LbtSame(-62.0).Apply(CoexParams{}), {});
    for (Side s : {Side::WiFi, Side::Lte})
    {
        EXPECT_GT(sensitive.Coverage(Access::LbtSame, s, 1.0), deaf.Coverage(Access::LbtSame, s, 1.0));
    }
}
