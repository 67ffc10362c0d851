#include "coex/analytic.hpp"
#include "coex/montecarlo.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace coex;

namespace
{

SimConfig
SmallSim()
{
    SimConfig s;
    s.side = 400.0;
    s.guard = 300.0;
    s.n_ap_realizations = 3;
    s.n_enb_realizations = 3;
    s.n_probes = 20;
    return s;
}

Realization
Planted(const std::vector<Point2>& aps, const std::vector<Point2>& enbs)
{
    Realization r;
    uint64_t id = 1;
    for (const Point2& p : aps)
    {
        r.aps.Add(p.x, p.y, id);
        r.ap_timer.push_back(0.1 * static_cast<double>(id++));
    }
    for (const Point2& p : enbs)
    {
        r.enbs.Add(p.x, p.y, id);
        r.enb_timer.push_back(0.1 * static_cast<double>(id++));
        r.enb_active.push_back(1);
    }
    r.mac_key = 99;
    return r;
}

int
Count(const std::vector<char>& v)
{
    return static_cast<int>(std::count(v.begin(), v.end(), 1));
}

} // namespace

TEST(Ppp, EmptyAtZeroDensity)
{
    EXPECT_EQ(SamplePpp(0.0, 500.0, 100.0, 1).Size(), 0u);
}

TEST(Ppp, CountMeanAndWindow)
{
    const double lambda = 4e-4;
    const double E = 50.0;
    const int draws = 4000;
    double total = 0.0;
    std::set<uint64_t> ids;
    for (int i = 0; i < draws; ++i)
    {
        NodeSet s = SamplePpp(lambda, E, 100.0, HashKey({5, static_cast<uint64_t>(i)}));
        total += static_cast<double>(s.Size());
        for (size_t k = 0; k < s.Size(); ++k)
        {
            ASSERT_LE(std::abs(s.x[k]), E);
            ASSERT_LE(std::abs(s.y[k]), E);
            ids.insert(s.id[k]);
        }
    }
    const double mean = lambda * 4.0 * E * E;
    EXPECT_NEAR(total / draws, mean, 3.0 * std::sqrt(mean / draws));
    EXPECT_EQ(ids.size(), static_cast<size_t>(total));
}

TEST(Ppp, LargerWindowKeepsPoints)
{
    NodeSet small = SamplePpp(4e-4, 200.0, 100.0, 42);
    NodeSet large = SamplePpp(4e-4, 400.0, 100.0, 42);
    std::set<uint64_t> big(large.id.begin(), large.id.end());
    for (uint64_t id : small.id)
    {
        EXPECT_TRUE(big.count(id));
    }
}

TEST(CellIndex, CoversEveryNeighbour)
{
    NodeSet s = SamplePpp(1e-3, 300.0, 100.0, 8);
    CellIndex idx(s, 40.0, 300.0);
    for (Point2 q : {Point2{0.0, 0.0}, Point2{-290.0, 150.0}, Point2{299.0, -299.0}})
    {
        std::set<int> found;
        idx.ForEachCandidate(q.x, q.y, 55.0, [&](int j) {
            found.insert(j);
            return true;
        });
        for (size_t j = 0; j < s.Size(); ++j)
        {
            if (std::hypot(s.x[j] - q.x, s.y[j] - q.y) <= 55.0)
            {
                EXPECT_TRUE(found.count(static_cast<int>(j)));
            }
        }
    }
}

TEST(Mac, IsolatedApTransmits)
{
    CoexParams p;
    Realization r = Planted({{0.0, 0.0}}, {});
    ApplyMac(r, p, MacRule::Lbt, SmallSim());
    EXPECT_EQ(Count(r.e_w), 1);
}

TEST(Mac, ColocatedPairSharesTheMedium)
{
    CoexParams p;
    for (MacRule rule : {MacRule::Continuous, MacRule::Lbt})
    {
        Realization r = Planted({{0.0, 0.0}, {1.0, 0.0}}, {});
        ApplyMac(r, p, rule, SmallSim());
        EXPECT_EQ(Count(r.e_w), 1);
        EXPECT_EQ(r.e_w[0], 1);
    }
}

TEST(Mac, ContinuousLteSilencesNearbyAp)
{
    CoexParams p;
    Realization r = Planted({{0.0, 0.0}}, {{2.0, 0.0}});
    ApplyMac(r, p, MacRule::Continuous, SmallSim());
    EXPECT_EQ(r.e_w[0], 0);
    EXPECT_EQ(r.e_l[0], 1);
    ApplyMac(r, p, MacRule::Continuous, SmallSim(), false);
    EXPECT_EQ(r.e_w[0], 1);
    EXPECT_EQ(r.e_l[0], 0);
}

TEST(Mac, LbtWithoutLteIsContinuous)
{
    const Scenario s = Scenario::WifiOnly();
    const CoexParams p = s.Apply(CoexParams{});
    const SimConfig sim = SmallSim();
    for (int i = 0; i < 3; ++i)
    {
        Realization a = SampleRealization(s, p, sim, i, 0);
        Realization b = a;
        ApplyMac(a, p, MacRule::Continuous, sim);
        ApplyMac(b, p, MacRule::Lbt, sim);
        EXPECT_EQ(a.e_w, b.e_w);
        EXPECT_GT(Count(a.e_w), 0);
    }
}

TEST(Mac, LowerPriorityMatchesReducedForm)
{
    const Scenario s = Scenario::LbtLower(-77.0);
    const CoexParams p = s.Apply(CoexParams{});
    const SimConfig sim = SmallSim();
    for (int i = 0; i < 3; ++i)
    {
        Realization a = SampleRealization(s, p, sim, i, i + 1);
        Realization b = a;
        ApplyMac(a, p, MacRule::Lbt, sim);
        ApplyMacLbtLowerReduced(b, p);
        EXPECT_EQ(a.e_w, b.e_w);
        EXPECT_EQ(a.e_l, b.e_l);
    }
}

TEST(Mac, NoTwoContendersTransmit)
{
    const SimConfig sim = SmallSim();
    for (const Scenario& s : {Scenario::LbtSame(-82.0), Scenario::LbtSame(-62.0), Scenario::LbtLower(-77.0),
                              Scenario::Baseline()})
    {
        const CoexParams p = s.Apply(CoexParams{});
        for (int i = 0; i < 2; ++i)
        {
            Realization r = SampleRealization(s, p, sim, i, i);
            ApplyMac(r, p, MacRuleOf(s), sim);
            EXPECT_EQ(CountContentionViolations(r, p), 0u) << s.Label();
        }
    }
}

TEST(Duty, AsyncActiveFractionIsBinomial)
{
    const Scenario s = Scenario::DutyAsync(0.3);
    const CoexParams p = s.Apply(CoexParams{});
    const SimConfig sim = SmallSim();
    double on = 0.0;
    double n = 0.0;
    for (int k = 0; k < 20; ++k)
    {
        Realization r = SampleRealization(s, p, sim, 0, k);
        on += static_cast<double>(Count(r.enb_active));
        n += static_cast<double>(r.enbs.Size());
    }
    EXPECT_NEAR(on / n, 0.3, 4.0 * std::sqrt(0.21 / n));
}

TEST(Duty, FullAsyncIsContinuous)
{
    const SimConfig sim = SmallSim();
    SimResult a = RunSimulation(Scenario::DutyAsync(1.0), CoexParams{}, sim);
    SimResult c = RunSimulation(Scenario::Continuous(), CoexParams{}, sim);
    EXPECT_EQ(a.wifi_on.sinr, c.wifi_on.sinr);
    EXPECT_EQ(a.lte.sinr, c.lte.sinr);
    EXPECT_EQ(a.wifi_on.nodes_on, c.wifi_on.nodes_on);
}

TEST(Run, DeterministicAcrossThreadCounts)
{
    SimConfig one = SmallSim();
    SimConfig three = one;
    three.jobs = 3;
    for (const Scenario& s : {Scenario::LbtSame(-72.0), Scenario::DutySync(0.5)})
    {
        SimResult a = RunSimulation(s, CoexParams{}, one);
        SimResult b = RunSimulation(s, CoexParams{}, three);
        SimResult c = RunSimulation(s, CoexParams{}, one);
        EXPECT_EQ(a.wifi_on.sinr, b.wifi_on.sinr);
        EXPECT_EQ(a.wifi_off.sinr, b.wifi_off.sinr);
        EXPECT_EQ(a.lte.sinr, b.lte.sinr);
        EXPECT_EQ(a.lte.nodes_on, b.lte.nodes_on);
        EXPECT_EQ(a.wifi_on.sinr, c.wifi_on.sinr);
    }
    SimConfig other = one;
    other.seed = 2;
    EXPECT_NE(RunSimulation(Scenario::Continuous(), CoexParams{}, one).wifi_on.sinr,
              RunSimulation(Scenario::Continuous(), CoexParams{}, other).wifi_on.sinr);
}

TEST(Run, RejectsBadConfig)
{
    SimConfig s = SmallSim();
    s.n_probes = 0;
    EXPECT_THROW(RunSimulation(Scenario::Continuous(), CoexParams{}, s), std::invalid_argument);
}

TEST(Metrics, TypicalMapMatchesAnalyticAcrossSeeds)
{
    // The AP layout is shared within a run, so the spread is taken over independent seeds.
    SimConfig sim;
    sim.side = 600.0;
    sim.guard = 300.0;
    sim.n_ap_realizations = 4;
    sim.n_enb_realizations = 2;
    sim.n_probes = 1;
    for (const Scenario& s : {Scenario::WifiOnly(), Scenario::Continuous()})
    {
        AnalyticModel m(s.Apply(CoexParams{}), {});
        const double expected = m.TypicalMap(Access::Continuous, Side::WiFi);
        std::vector<double> reps;
        for (uint64_t seed = 1; seed <= 24; ++seed)
        {
            sim.seed = seed;
            reps.push_back(EmpiricalMetrics(RunSimulation(s, CoexParams{}, sim)).TypicalMap(Side::WiFi).value);
        }
        double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / reps.size();
        double var = 0.0;
        for (double v : reps)
        {
            var += (v - mean) * (v - mean);
        }
        double se = std::sqrt(var / (reps.size() - 1) / reps.size());
        EXPECT_NEAR(mean, expected, 4.0 * se) << s.Label();
    }
}

TEST(Metrics, SyncLteMapIsScaledByDuty)
{
    EmpiricalMetrics m(RunSimulation(Scenario::DutySync(0.4), CoexParams{}, SmallSim()));
    EXPECT_NEAR(m.TypicalMap(Side::Lte).value, 0.4, 1e-12);
    EXPECT_EQ(m.TaggedMap(Side::Lte).value, 0.4);
    Estimate cov = m.Coverage(Side::WiFi, 1.0);
    EXPECT_GE(cov.value, 0.0);
    EXPECT_LE(cov.value, 1.0);
}

TEST(Interference, TotalDominatesStrongest)
{
    CoexParams p;
    p.lambda_l = PerKm2ToPerM2(600.0);
    InterferenceCdfResult r = InterferenceCdfCheck(p, SmallSim(), 500);
    ASSERT_EQ(r.total.size(), r.strongest.size());
    for (size_t i = 0; i < r.total.size(); ++i)
    {
        EXPECT_GE(r.total[i], r.strongest[i]);
    }
    EXPECT_LE(r.cdf_total_at_ed, r.cdf_max_at_ed);
}

TEST(Oracle, WilsonInterval)
{
    auto [lo0, hi0] = WilsonInterval(0, 100, 1.96);
    EXPECT_EQ(lo0, 0.0);
    EXPECT_GT(hi0, 0.0);
    auto [lo, hi] = WilsonInterval(30, 100, 1.96);
    EXPECT_LT(lo, 0.3);
    EXPECT_GT(hi, 0.3);
    EXPECT_NEAR(lo, 0.2189, 1e-3);
    EXPECT_NEAR(hi, 0.3958, 1e-3);
    auto [le, he] = WilsonInterval(0, 0, 1.96);
    EXPECT_EQ(le, 0.0);
    EXPECT_EQ(he, 1.0);
}
