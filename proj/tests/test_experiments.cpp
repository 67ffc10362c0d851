#include "coex/experiments.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace coex;

namespace
{

MetricCurve
Curve(const std::string& scenario, const std::string& side, const std::string& m, std::vector<double> t,
      const std::function<double(double)>& f, const std::string& engine = "analytic")
{
    MetricCurve c{scenario, engine, side, m, {}};
    for (double x : t)
    {
        c.points.push_back({x, f(x), 0.0});
    }
    return c;
}

std::vector<double>
Range(double a, double b, double step)
{
    std::vector<double> v;
    for (double x = a; x <= b + 1e-9; x += step)
    {
        v.push_back(x);
    }
    return v;
}

std::string
FieldOf(const Json& j)
{
    try
    {
        ParseConfig(j);
    }
    catch (const ConfigError& e)
    {
        return e.Field();
    }
    return "";
}

} // namespace

TEST(Csv, RoundTripKeepsNaNAndOrder)
{
    std::vector<MetricCurve> in{
        {"lbt-lower:gl=-77", "analytic", "lte", "sinr_coverage", {{-10.0, 0.7385, 0.0}, {0.0, std::nan(""), 0.0}}},
        {"continuous", "monte-carlo", "wifi", "dst_per_km2", {{2.0, 1.0 / 3.0, 0.0123456789012345}}},
    };
    std::stringstream ss;
    WriteCsv(ss, in);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kCsvHeader);
    auto back = ReadCsv(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], in[0]);
    EXPECT_EQ(back[1], in[1]);
}

TEST(Csv, RejectsMalformedInput)
{
    std::istringstream bad_header("a,b,c\n");
    EXPECT_THROW(ReadCsv(bad_header), std::runtime_error);
    std::istringstream short_row(std::string(kCsvHeader) + "\nx,analytic,wifi,m,1\n");
    EXPECT_THROW(ReadCsv(short_row), std::runtime_error);
    std::istringstream bad_num(std::string(kCsvHeader) + "\nx,analytic,wifi,m,1,abc,0\n");
    EXPECT_THROW(ReadCsv(bad_num), std::runtime_error);
    std::ostringstream os;
    EXPECT_THROW(WriteCsv(os, {{"a,b", "analytic", "wifi", "m", {}}}), std::invalid_argument);
}

TEST(Config, DefaultExpands)
{
    ExperimentConfig cfg = ParseConfig(DefaultConfigJson());
    EXPECT_EQ(cfg.scenarios.size(), 11u);
    EXPECT_EQ(cfg.sweep.sinr_db.size(), 16u);
    EXPECT_EQ(cfg.sweep.rate_mbps.size(), 80u);
    EXPECT_NEAR(cfg.params.lambda_w, 4e-4, 1e-15);
    EXPECT_EQ(cfg.params.sigma_n2, 0.0);
    std::vector<std::string> labels;
    for (const Scenario& s : cfg.scenarios)
    {
        labels.push_back(s.Label());
    }
    EXPECT_NE(std::find(labels.begin(), labels.end(), "lbt-lower:gl=-77"), labels.end());
    EXPECT_NE(std::find(labels.begin(), labels.end(), "duty-async:eta=0.5"), labels.end());
}

TEST(Config, ErrorsNameTheField)
{
    Json j = DefaultConfigJson();
    j["scenarios"] = Json::array();
    EXPECT_EQ(FieldOf(j), "scenarios");

    j = DefaultConfigJson();
    j["params"]["lamda_w_per_km2"] = 10;
    EXPECT_EQ(FieldOf(j), "params.lamda_w_per_km2");

    j = DefaultConfigJson();
    j["sweep"]["sinr_db"] = {{"start", 5}, {"stop", 0}, {"step", 1}};
    EXPECT_EQ(FieldOf(j), "sweep.sinr_db");

    j = DefaultConfigJson();
    j["sweep"].erase("eta");
    EXPECT_EQ(FieldOf(j), "scenarios[3]");

    j = DefaultConfigJson();
    j["scenarios"] = {"continuous", "lte-u"};
    EXPECT_EQ(FieldOf(j), "scenarios[1]");

    j = DefaultConfigJson();
    j["engine"] = "quantum";
    EXPECT_FALSE(FieldOf(j).empty());

    j = DefaultConfigJson();
    j["sim"]["probes"] = 0;
    EXPECT_FALSE(FieldOf(j).empty());
}

TEST(Config, EngineNames)
{
    EXPECT_EQ(ParseEngine("mc"), Engine::MonteCarlo);
    EXPECT_EQ(ParseEngine("both"), Engine::Both);
    EXPECT_STREQ(EngineName(Engine::Analytic), "analytic");
}

TEST(Compare, RateLossOfHalvedCurve)
{
    auto grid = Range(0.5, 40.0, 0.5);
    MetricCurve ref = Curve("continuous", "lte", metric::kRate, grid, [](double r) { return 1.0 - r / 40.0; });
    MetricCurve half =
        Curve("x", "lte", metric::kRate, grid, [](double r) { return std::max(0.0, 1.0 - r / 20.0); });
    auto loss = RateLossVs(ref, half, 5.0, 30.0);
    ASSERT_TRUE(loss);
    EXPECT_NEAR(loss->min, 0.5, 1e-9);
    EXPECT_NEAR(loss->max, 0.5, 1e-9);
    EXPECT_EQ(loss->points, 51u);
}

TEST(Compare, OrderingOnSyntheticCurves)
{
    auto t = Range(-10.0, 20.0, 2.0);
    auto dst = [&](const std::string& s, const std::string& side, double scale) {
        return Curve(s, side, metric::kDst, t, [=](double x) { return scale * 200.0 / (1.0 + std::exp(x / 5.0)); });
    };
    std::vector<MetricCurve> curves{
        dst("continuous", "wifi", 1.0),          dst("wifi-wifi", "wifi", 0.95),
        dst("lbt-same:gl=-62", "wifi", 1.1),     dst("lbt-lower:gl=-62", "wifi", 1.3),
        dst("duty-sync:eta=0.5", "wifi", 1.5),   dst("duty-async:eta=0.5", "wifi", 1.4),
        dst("duty-sync:eta=0.5", "lte", 1.0),    dst("duty-async:eta=0.5", "lte", 1.1),
    };
    auto checks = CompareCurves(curves, 400.0);
    ASSERT_EQ(checks.size(), 7u);
    EXPECT_TRUE(checks[0].applicable);
    EXPECT_TRUE(checks[0].pass);
    EXPECT_NE(checks[0].detail.find("note: wifi-wifi"), std::string::npos);
    EXPECT_TRUE(checks[1].pass);
    EXPECT_TRUE(checks[2].pass);
    EXPECT_FALSE(checks[3].pass);
    for (size_t i = 4; i < 7; ++i)
    {
        EXPECT_FALSE(checks[i].applicable);
    }

    curves.push_back(dst("lbt-same:gl=-82", "wifi", 0.9));
    checks = CompareCurves(curves, 400.0);
    EXPECT_FALSE(checks[0].pass);
}

TEST(Gaps, ToleranceIsMaxOfFloorAndThreeSigma)
{
    auto t = std::vector<double>{0.0, 10.0};
    MetricCurve a = Curve("continuous", "wifi", metric::kCoverage, t, [](double) { return 0.5; });
    MetricCurve m = Curve("continuous", "wifi", metric::kCoverage, t, [](double) { return 0.56; }, "monte-carlo");
    m.points[0].stderr_ = 0.01;
    m.points[1].stderr_ = 0.03;
    auto g = GapStatistics({a, m}, CoexParams{});
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0].points, 2u);
    EXPECT_EQ(g[0].violations, 1u);
    EXPECT_NEAR(g[0].max_gap, 0.06, 1e-12);

    // DST is compared per unit intensity: 20 per km2 at 400 per km2 is 0.05.
    MetricCurve da = Curve("continuous", "wifi", metric::kDst, t, [](double) { return 100.0; });
    MetricCurve dm = Curve("continuous", "wifi", metric::kDst, t, [](double) { return 119.0; }, "monte-carlo");
    auto gd = GapStatistics({da, dm}, CoexParams{});
    ASSERT_EQ(gd.size(), 1u);
    EXPECT_TRUE(gd[0].Pass());
    EXPECT_NEAR(gd[0].max_gap, 19.0 / 400.0, 1e-12);
}

TEST(Run, SimulatedSweepWritesLoadableCsv)
{
    Json j = DefaultConfigJson();
    j["scenarios"] = {"wifi-only", "duty-sync:eta=0.5"};
    j["engine"] = "monte-carlo";
    j["sim"] = {{"side_m", 300}, {"guard_m", 200}, {"ap_realizations", 2}, {"enb_realizations", 2}, {"probes", 10}};
    ExperimentConfig cfg = ParseConfig(j);
    RunOutput out = coex::Run(cfg);
    EXPECT_TRUE(out.errors.empty());
    EXPECT_FALSE(out.HasQuadratureFailure());
    // wifi-only: 5 wifi metrics; duty-sync: 5 per side.
    EXPECT_EQ(out.curves.size(), 15u);

    auto dir = std::filesystem::temp_directory_path() / "coex_test_experiments";
    std::filesystem::remove_all(dir);
    auto paths = WriteOutputs(dir.string(), cfg, out);
    EXPECT_EQ(paths.size(), 11u);
    auto back = LoadCurves({dir.string()});
    ASSERT_EQ(back.size(), out.curves.size());
    for (const MetricCurve& c : out.curves)
    {
        EXPECT_NE(std::find(back.begin(), back.end(), c), back.end()) << c.scenario << " " << c.metric;
    }
    std::filesystem::remove_all(dir);
}
