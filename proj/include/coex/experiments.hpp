#pragma once

#include "coex/analytic.hpp"
#include "coex/core.hpp"
#include "coex/metric_curve.hpp"
#include "coex/montecarlo.hpp"
#include "coex/quadrature.hpp"
#include "coex/scenarios.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace coex
{

using Json = nlohmann::json;

class ConfigError : public std::invalid_argument
{
  public:
    ConfigError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what),
          m_field(field)
    {
    }

    const std::string& Field() const
    {
        return m_field;
    }

  private:
    std::string m_field;
};

enum class Engine
{
    Analytic,
    MonteCarlo,
    Both,
};

inline const char*
EngineName(Engine e)
{
    switch (e)
    {
    case Engine::Analytic:
        return "analytic";
    case Engine::MonteCarlo:
        return "monte-carlo";
    case Engine::Both:
        return "both";
    }
    return "?";
}

inline Engine
ParseEngine(const std::string& s)
{
    if (s == "analytic")
    {
        return Engine::Analytic;
    }
    if (s == "monte-carlo" || s == "mc")
    {
        return Engine::MonteCarlo;
    }
    if (s == "both")
    {
        return Engine::Both;
    }
    throw ConfigError("engine", "expected analytic, monte-carlo or both, got '" + s + "'");
}

namespace metric
{
inline constexpr const char* kMapTypical = "map_typical";
inline constexpr const char* kMapTagged = "map_tagged";
inline constexpr const char* kCoverage = "sinr_coverage";
inline constexpr const char* kDst = "dst_per_km2";
inline constexpr const char* kRate = "rate_coverage";
} // namespace metric

struct SweepSpec
{
    std::vector<double> sinr_db;
    std::vector<double> rate_mbps;
    std::vector<double> eta;
    std::vector<double> gamma_l_dbm;
};

struct ExperimentConfig
{
    std::vector<Scenario> scenarios;
    CoexParams params;
    SweepSpec sweep;
    Engine engine = Engine::Analytic;
    SimConfig sim;
    QuadratureSpec quadrature;
    std::string out_dir = "results";
    bool identity_checks = true;
    int jobs = 1;
};

namespace detail
{

inline void
RejectUnknown(const Json& j, const std::string& path, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
    {
        throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    }
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
    {
        if (!ok.count(it.key()))
        {
            throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
        }
    }
}

template <class T>
T
Read(const Json& j, const char* key, const std::string& path, T fallback)
{
    if (!j.contains(key))
    {
        return fallback;
    }
    const std::string field = path.empty() ? key : path + "." + key;
    try
    {
        return j.at(key).get<T>();
    }
    catch (const nlohmann::json::exception&)
    {
        throw ConfigError(field, "wrong type");
    }
}

inline double
ReadNumber(const Json& j, const char* key, const std::string& path, double fallback)
{
    double v = Read<double>(j, key, path, fallback);
    if (!std::isfinite(v))
    {
        throw ConfigError(path + "." + key, "must be finite");
    }
    return v;
}

/// An axis is either an explicit list or {start, stop, step} with stop inclusive.
inline std::vector<double>
ReadAxis(const Json& j, const char* key, const std::string& path)
{
    const std::string field = path + "." + key;
    if (!j.contains(key))
    {
        return {};
    }
    const Json& a = j.at(key);
    std::vector<double> out;
    if (a.is_array())
    {
        for (const Json& v : a)
        {
            if (!v.is_number())
            {
                throw ConfigError(field, "list entries must be numbers");
            }
            out.push_back(v.get<double>());
        }
        return out;
    }
    RejectUnknown(a, field, {"start", "stop", "step"});
    if (!a.contains("start") || !a.contains("stop") || !a.contains("step"))
    {
        throw ConfigError(field, "range needs start, stop and step");
    }
    double start = ReadNumber(a, "start", field, 0.0);
    double stop = ReadNumber(a, "stop", field, 0.0);
    double step = ReadNumber(a, "step", field, 0.0);
    if (!(step > 0.0) || stop < start)
    {
        throw ConfigError(field, "range requires step > 0 and stop >= start");
    }
    long n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    if (n > 100000)
    {
        throw ConfigError(field, "range too long");
    }
    for (long i = 0; i <= n; ++i)
    {
        out.push_back(start + static_cast<double>(i) * step);
    }
    return out;
}

inline std::string
FileStem(const std::string& label)
{
    std::string s = label;
    for (char& c : s)
    {
        if (c == ':' || c == '=' || c == '/' || c == ' ')
        {
            c = '_';
        }
    }
    return s;
}

} // namespace detail

/// Expands bare duty-cycle and LBT names over the eta and gamma_l sweep axes.
inline std::vector<Scenario>
ExpandScenarios(const std::vector<std::string>& labels, const SweepSpec& sweep)
{
    std::vector<Scenario> out;
    for (size_t i = 0; i < labels.size(); ++i)
    {
        const std::string& l = labels[i];
        const std::string field = "scenarios[" + std::to_string(i) + "]";
        try
        {
            if (l == "duty-sync" || l == "duty-async")
            {
                if (sweep.eta.empty())
                {
                    throw ConfigError(field, "'" + l + "' needs sweep.eta");
                }
                for (double e : sweep.eta)
                {
                    out.push_back(l == "duty-sync" ? Scenario::DutySync(e) : Scenario::DutyAsync(e));
                    out.back().Validate();
                }
            }
            else if (l == "lbt-same" || l == "lbt-lower")
            {
                if (sweep.gamma_l_dbm.empty())
                {
                    throw ConfigError(field, "'" + l + "' needs sweep.gamma_l_dbm");
                }
                for (double g : sweep.gamma_l_dbm)
                {
                    out.push_back(l == "lbt-same" ? Scenario::LbtSame(g) : Scenario::LbtLower(g));
                }
            }
            else
            {
                out.push_back(Scenario::Parse(l));
            }
        }
        catch (const ConfigError&)
        {
            throw;
        }
        catch (const std::exception& e)
        {
            throw ConfigError(field, e.what());
        }
    }
    return out;
}

inline ExperimentConfig
ParseConfig(const Json& j)
{
    using detail::ReadNumber;
    detail::RejectUnknown(j, "", {"scenarios", "params", "sweep", "engine", "sim", "quadrature", "out",
                                  "identity_checks", "jobs"});
    ExperimentConfig cfg;

    if (j.contains("params"))
    {
        const Json& p = j.at("params");
        const std::string f = "params";
        detail::RejectUnknown(p, f,
                              {"lambda_w_per_km2", "lambda_l_per_km2", "p_w_dbm", "p_l_dbm", "gamma_cs_dbm",
                               "gamma_ed_dbm", "gamma_l_dbm", "carrier_hz", "alpha", "mu", "noise_dbm",
                               "bandwidth_hz"});
        CoexParams& c = cfg.params;
        c.lambda_w = PerKm2ToPerM2(ReadNumber(p, "lambda_w_per_km2", f, PerM2ToPerKm2(c.lambda_w)));
        c.lambda_l = PerKm2ToPerM2(ReadNumber(p, "lambda_l_per_km2", f, PerM2ToPerKm2(c.lambda_l)));
        c.p_w = DbmToMw(ReadNumber(p, "p_w_dbm", f, MwToDbm(c.p_w)));
        c.p_l = DbmToMw(ReadNumber(p, "p_l_dbm", f, MwToDbm(c.p_l)));
        c.gamma_cs = DbmToMw(ReadNumber(p, "gamma_cs_dbm", f, MwToDbm(c.gamma_cs)));
        c.gamma_ed = DbmToMw(ReadNumber(p, "gamma_ed_dbm", f, MwToDbm(c.gamma_ed)));
        c.gamma_l = DbmToMw(ReadNumber(p, "gamma_l_dbm", f, MwToDbm(c.gamma_l)));
        c.f_c = ReadNumber(p, "carrier_hz", f, c.f_c);
        c.alpha = ReadNumber(p, "alpha", f, c.alpha);
        c.mu = ReadNumber(p, "mu", f, c.mu);
        c.bandwidth = ReadNumber(p, "bandwidth_hz", f, c.bandwidth);
        if (p.contains("noise_dbm") && !p.at("noise_dbm").is_null())
        {
            c.sigma_n2 = DbmToMw(ReadNumber(p, "noise_dbm", f, 0.0));
        }
        try
        {
            c.Validate();
        }
        catch (const std::invalid_argument& e)
        {
            throw ConfigError("params", e.what());
        }
    }

    if (j.contains("sweep"))
    {
        const Json& s = j.at("sweep");
        detail::RejectUnknown(s, "sweep", {"sinr_db", "rate_mbps", "eta", "gamma_l_dbm"});
        cfg.sweep.sinr_db = detail::ReadAxis(s, "sinr_db", "sweep");
        cfg.sweep.rate_mbps = detail::ReadAxis(s, "rate_mbps", "sweep");
        cfg.sweep.eta = detail::ReadAxis(s, "eta", "sweep");
        cfg.sweep.gamma_l_dbm = detail::ReadAxis(s, "gamma_l_dbm", "sweep");
        for (double r : cfg.sweep.rate_mbps)
        {
            if (r < 0.0)
            {
                throw ConfigError("sweep.rate_mbps", "rates must be >= 0");
            }
        }
        for (double e : cfg.sweep.eta)
        {
            if (!(e >= 0.0 && e <= 1.0))
            {
                throw ConfigError("sweep.eta", "entries must lie in [0, 1]");
            }
        }
    }
    if (cfg.sweep.sinr_db.empty() && cfg.sweep.rate_mbps.empty())
    {
        throw ConfigError("sweep", "at least one of sinr_db or rate_mbps is required");
    }

    if (!j.contains("scenarios") || !j.at("scenarios").is_array() || j.at("scenarios").empty())
    {
        throw ConfigError("scenarios", "a non-empty list of scenario names is required");
    }
    std::vector<std::string> labels;
    for (const Json& v : j.at("scenarios"))
    {
        if (!v.is_string())
        {
            throw ConfigError("scenarios", "entries must be strings");
        }
        labels.push_back(v.get<std::string>());
    }
    cfg.scenarios = ExpandScenarios(labels, cfg.sweep);

    cfg.engine = ParseEngine(detail::Read<std::string>(j, "engine", "", "analytic"));

    if (j.contains("sim"))
    {
        const Json& s = j.at("sim");
        const std::string f = "sim";
        detail::RejectUnknown(s, f,
                              {"side_m", "guard_m", "ap_realizations", "enb_realizations", "probes", "seed",
                               "tile_m", "contention_eps", "total_energy_detection"});
        SimConfig& c = cfg.sim;
        c.side = ReadNumber(s, "side_m", f, c.side);
        c.guard = ReadNumber(s, "guard_m", f, c.guard);
        c.n_ap_realizations = detail::Read<int>(s, "ap_realizations", f, c.n_ap_realizations);
        c.n_enb_realizations = detail::Read<int>(s, "enb_realizations", f, c.n_enb_realizations);
        c.n_probes = detail::Read<int>(s, "probes", f, c.n_probes);
        c.seed = detail::Read<uint64_t>(s, "seed", f, c.seed);
        c.tile = ReadNumber(s, "tile_m", f, c.tile);
        c.contention_eps = ReadNumber(s, "contention_eps", f, c.contention_eps);
        c.total_energy_detection = detail::Read<bool>(s, "total_energy_detection", f, false);
    }
    try
    {
        cfg.sim.Validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw ConfigError("sim", e.what());
    }

    if (j.contains("quadrature"))
    {
        const Json& q = j.at("quadrature");
        const std::string f = "quadrature";
        detail::RejectUnknown(q, f,
                              {"rel_tol", "abs_tol", "r_max", "radial_panel_m", "angular_panel_m", "radial_points",
                               "angular_points", "serving_points", "serving_tail", "pair_points", "pair_panel_m"});
        QuadratureSpec& c = cfg.quadrature;
        c.rel_tol = ReadNumber(q, "rel_tol", f, c.rel_tol);
        c.abs_tol = ReadNumber(q, "abs_tol", f, c.abs_tol);
        c.r_max = ReadNumber(q, "r_max", f, c.r_max);
        c.radial_panel = ReadNumber(q, "radial_panel_m", f, c.radial_panel);
        c.angular_panel = ReadNumber(q, "angular_panel_m", f, c.angular_panel);
        c.radial_points = detail::Read<int>(q, "radial_points", f, c.radial_points);
        c.angular_points = detail::Read<int>(q, "angular_points", f, c.angular_points);
        c.serving_points = detail::Read<int>(q, "serving_points", f, c.serving_points);
        c.serving_tail = ReadNumber(q, "serving_tail", f, c.serving_tail);
        c.pair_points = detail::Read<int>(q, "pair_points", f, c.pair_points);
        c.pair_panel = ReadNumber(q, "pair_panel_m", f, c.pair_panel);
    }
    try
    {
        cfg.quadrature.Validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw ConfigError("quadrature", e.what());
    }

    cfg.out_dir = detail::Read<std::string>(j, "out", "", cfg.out_dir);
    cfg.identity_checks = detail::Read<bool>(j, "identity_checks", "", cfg.identity_checks);
    cfg.jobs = detail::Read<int>(j, "jobs", "", cfg.jobs);
    if (cfg.jobs < 1)
    {
        throw ConfigError("jobs", "must be >= 1");
    }
    return cfg;
}

/// The shipped default: both operators at 400 per km^2, T from -10 to 20 dB.
inline Json
DefaultConfigJson()
{
    return Json::parse(R"({
  "scenarios": ["wifi-only", "wifi-wifi", "continuous", "duty-sync", "duty-async", "lbt-same", "lbt-lower"],
  "params": {
    "lambda_w_per_km2": 400, "lambda_l_per_km2": 400,
    "p_w_dbm": 23, "p_l_dbm": 23,
    "gamma_cs_dbm": -82, "gamma_ed_dbm": -62, "gamma_l_dbm": -62,
    "carrier_hz": 5e9, "alpha": 4, "mu": 1, "noise_dbm": null, "bandwidth_hz": 20e6
  },
  "sweep": {
    "sinr_db": {"start": -10, "stop": 20, "step": 2},
    "rate_mbps": {"start": 0.5, "stop": 40, "step": 0.5},
    "eta": [0.5],
    "gamma_l_dbm": [-82, -77, -62]
  },
  "engine": "analytic",
  "sim": {"side_m": 1000, "guard_m": 500, "ap_realizations": 50, "enb_realizations": 50, "probes": 50, "seed": 1},
  "out": "results"
})");
}

// ---------------------------------------------------------------------------
// Curve production

struct CellError
{
    std::string scenario;
    std::string side;
    std::string metric;
    double threshold;
    std::string message;
    bool quadrature;
};

namespace detail
{

inline std::vector<Side>
SidesOf(const Scenario& s)
{
    if (s.HasSecondSide())
    {
        return {Side::WiFi, Side::Lte};
    }
    return {Side::WiFi};
}

template <class F>
CurvePoint
Cell(F&& f, double threshold, const std::string& scenario, Side side, const char* metric,
     std::vector<CellError>& errors)
{
    try
    {
        auto [v, se] = f();
        return {threshold, v, se};
    }
    catch (const QuadratureError& e)
    {
        errors.push_back({scenario, SideName(side), metric, threshold, e.what(), true});
    }
    catch (const std::exception& e)
    {
        errors.push_back({scenario, SideName(side), metric, threshold, e.what(), false});
    }
    double nan = std::numeric_limits<double>::quiet_NaN();
    return {threshold, nan, nan};
}

} // namespace detail

/// Analytic curves for one scenario: MAPs, coverage and DST over sinr_db, rate coverage over rate_mbps.
inline std::vector<MetricCurve>
AnalyticCurves(const ScenarioEvaluator& ev, const Scenario& s, const SweepSpec& sweep,
               std::vector<CellError>& errors)
{
    std::vector<MetricCurve> out;
    const std::string label = s.Label();
    for (Side side : detail::SidesOf(s))
    {
        const std::string sn = SideName(side);
        auto curve = [&](const char* m) -> MetricCurve& {
            out.push_back({label, "analytic", sn, m, {}});
            return out.back();
        };
        using P = std::pair<double, double>;
        curve(metric::kMapTypical)
            .points.push_back(detail::Cell([&] { return P{ev.TypicalMap(s, side), 0.0}; }, 0.0, label, side,
                                           metric::kMapTypical, errors));
        curve(metric::kMapTagged)
            .points.push_back(detail::Cell([&] { return P{ev.TaggedMap(s, side), 0.0}; }, 0.0, label, side,
                                           metric::kMapTagged, errors));
        if (!sweep.sinr_db.empty())
        {
            MetricCurve& cov = curve(metric::kCoverage);
            for (double db : sweep.sinr_db)
            {
                cov.points.push_back(detail::Cell([&] { return P{ev.Coverage(s, side, DbToLinear(db)), 0.0}; }, db,
                                                  label, side, metric::kCoverage, errors));
            }
            MetricCurve& dst = curve(metric::kDst);
            for (double db : sweep.sinr_db)
            {
                dst.points.push_back(detail::Cell(
                    [&] { return P{PerM2ToPerKm2(ev.Dst(s, side, DbToLinear(db))), 0.0}; }, db, label, side,
                    metric::kDst, errors));
            }
        }
        if (!sweep.rate_mbps.empty())
        {
            MetricCurve& rate = curve(metric::kRate);
            for (double r : sweep.rate_mbps)
            {
                rate.points.push_back(detail::Cell([&] { return P{ev.RateCoverage(s, side, r * 1e6), 0.0}; }, r,
                                                   label, side, metric::kRate, errors));
            }
        }
    }
    return out;
}

inline std::vector<MetricCurve>
SimulatedCurves(const EmpiricalMetrics& m, const SweepSpec& sweep, std::vector<CellError>& errors)
{
    std::vector<MetricCurve> out;
    const Scenario& s = m.Result().scenario;
    const std::string label = s.Label();
    auto pair = [](Estimate e) { return std::pair<double, double>{e.value, e.stderr_}; };
    for (Side side : detail::SidesOf(s))
    {
        const std::string sn = SideName(side);
        auto curve = [&](const char* name) -> MetricCurve& {
            out.push_back({label, "monte-carlo", sn, name, {}});
            return out.back();
        };
        curve(metric::kMapTypical)
            .points.push_back(detail::Cell([&] { return pair(m.TypicalMap(side)); }, 0.0, label, side,
                                           metric::kMapTypical, errors));
        curve(metric::kMapTagged)
            .points.push_back(detail::Cell([&] { return pair(m.TaggedMap(side)); }, 0.0, label, side,
                                           metric::kMapTagged, errors));
        if (!sweep.sinr_db.empty())
        {
            MetricCurve& cov = curve(metric::kCoverage);
            for (double db : sweep.sinr_db)
            {
                cov.points.push_back(detail::Cell([&] { return pair(m.Coverage(side, DbToLinear(db))); }, db, label,
                                                  side, metric::kCoverage, errors));
            }
            MetricCurve& dst = curve(metric::kDst);
            for (double db : sweep.sinr_db)
            {
                dst.points.push_back(detail::Cell(
                    [&] {
                        Estimate e = m.Dst(side, DbToLinear(db));
                        return std::pair<double, double>{PerM2ToPerKm2(e.value), PerM2ToPerKm2(e.stderr_)};
                    },
                    db, label, side, metric::kDst, errors));
            }
        }
        if (!sweep.rate_mbps.empty())
        {
            MetricCurve& rate = curve(metric::kRate);
            for (double r : sweep.rate_mbps)
            {
                rate.points.push_back(detail::Cell([&] { return pair(m.RateCoverage(side, r * 1e6)); }, r, label,
                                                   side, metric::kRate, errors));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checks

struct IdentityCheck
{
    std::string name;
    double max_abs_diff = 0.0;
    double tolerance = 1e-4;

    bool Pass() const
    {
        return max_abs_diff <= tolerance;
    }
};

/// Scenario-reduction identities evaluated on the given SINR thresholds (dB).
inline std::vector<IdentityCheck>
RunIdentityChecks(const CoexParams& params, const std::shared_ptr<ModelRegistry>& registry,
                  const std::vector<double>& sinr_db)
{
    ScenarioEvaluator ev(params, registry);
    std::vector<IdentityCheck> out;
    auto curves = [&](const Scenario& a, const Scenario& b, Side side, bool with_dst) {
        double d = std::abs(ev.TaggedMap(a, side) - ev.TaggedMap(b, side));
        for (double db : sinr_db)
        {
            double T = DbToLinear(db);
            d = std::max(d, std::abs(ev.Coverage(a, side, T) - ev.Coverage(b, side, T)));
            if (with_dst)
            {
                double la = PerM2ToPerKm2(ev.Lambda(a, side));
                double da = PerM2ToPerKm2(ev.Dst(a, side, T));
                double dbv = PerM2ToPerKm2(ev.Dst(b, side, T));
                d = std::max(d, std::abs(da - dbv) / la);
            }
        }
        return d;
    };
    const Scenario cont = Scenario::Continuous();
    const Scenario solo = Scenario::WifiOnly();
    for (Side side : {Side::WiFi, Side::Lte})
    {
        out.push_back({std::string("duty-sync eta=1 equals continuous, ") + SideName(side),
                       curves(Scenario::DutySync(1.0), cont, side, true)});
        out.push_back({std::string("duty-async eta=1 equals continuous, ") + SideName(side),
                       curves(Scenario::DutyAsync(1.0), cont, side, true)});
    }
    out.push_back({"duty-sync eta=0 equals wifi-only, wifi", curves(Scenario::DutySync(0.0), solo, Side::WiFi, true)});
    out.push_back(
        {"duty-async eta=0 equals wifi-only, wifi", curves(Scenario::DutyAsync(0.0), solo, Side::WiFi, true)});
    {
        double d = 0.0;
        for (double eta : {0.0, 1.0})
        {
            d = std::max(d, PerM2ToPerKm2(ev.Dst(Scenario::DutySync(eta), Side::Lte, 1.0)) *
                                (eta == 0.0 ? 1.0 : 0.0));
        }
        out.push_back({"duty-sync eta=0 gives zero lte dst", d});
    }
    {
        const Scenario lower = Scenario::LbtLower(MwToDbm(params.gamma_l));
        double d = std::max(std::abs(ev.TypicalMap(lower, Side::WiFi) - ev.TypicalMap(solo, Side::WiFi)),
                            std::abs(ev.TaggedMap(lower, Side::WiFi) - ev.TaggedMap(solo, Side::WiFi)));
        out.push_back({"lbt-lower wifi map equals wifi-only map", d});
    }
    {
        CoexParams sub = params;
        sub.gamma_ed = params.gamma_cs;
        sub.gamma_l = params.gamma_cs;
        sub.p_l = params.p_w;
        ScenarioEvaluator ev_sub(sub, registry);
        const Scenario same = Scenario::LbtSame(MwToDbm(params.gamma_cs));
        const Scenario base = Scenario::Baseline();
        double d = 0.0;
        for (Side side : {Side::WiFi, Side::Lte})
        {
            d = std::max(d, std::abs(ev.TypicalMap(base, side) - ev_sub.TypicalMap(same, side)));
            d = std::max(d, std::abs(ev.TaggedMap(base, side) - ev_sub.TaggedMap(same, side)));
            for (double db : sinr_db)
            {
                double T = DbToLinear(db);
                d = std::max(d, std::abs(ev.Coverage(base, side, T) - ev_sub.Coverage(same, side, T)));
            }
        }
        out.push_back({"wifi-wifi equals lbt-same under threshold and power substitution", d});
    }
    return out;
}

struct GapStat
{
    std::string scenario;
    std::string side;
    std::string metric;
    double max_gap = 0.0;
    double at_threshold = 0.0;
    double stderr_at_max = 0.0;
    size_t points = 0;
    /// Points where the gap exceeds max(0.05, 3 stderr).
    size_t violations = 0;

    bool Pass() const
    {
        return violations == 0;
    }
};

/// Analytic vs Monte Carlo gaps per (scenario, side, metric). DST is compared per unit intensity.
inline std::vector<GapStat>
GapStatistics(const std::vector<MetricCurve>& curves, const CoexParams& params)
{
    std::map<std::tuple<std::string, std::string, std::string>, const MetricCurve*> ana;
    for (const MetricCurve& c : curves)
    {
        if (c.engine == "analytic")
        {
            ana[{c.scenario, c.side, c.metric}] = &c;
        }
    }
    std::vector<GapStat> out;
    for (const MetricCurve& mc : curves)
    {
        if (mc.engine != "monte-carlo")
        {
            continue;
        }
        auto it = ana.find({mc.scenario, mc.side, mc.metric});
        if (it == ana.end())
        {
            continue;
        }
        double scale = 1.0;
        if (mc.metric == metric::kDst)
        {
            CoexParams p = Scenario::Parse(mc.scenario).Apply(params);
            scale = 1.0 / PerM2ToPerKm2(mc.side == "wifi" ? p.lambda_w : p.lambda_l);
        }
        GapStat g{mc.scenario, mc.side, mc.metric};
        for (const CurvePoint& q : mc.points)
        {
            for (const CurvePoint& a : it->second->points)
            {
                if (a.threshold != q.threshold || std::isnan(a.value) || std::isnan(q.value))
                {
                    continue;
                }
                double gap = std::abs(a.value - q.value) * scale;
                double se = q.stderr_ * scale;
                ++g.points;
                if (gap > std::max(0.05, 3.0 * se))
                {
                    ++g.violations;
                }
                if (gap >= g.max_gap)
                {
                    g.max_gap = gap;
                    g.at_threshold = q.threshold;
                    g.stderr_at_max = se;
                }
            }
        }
        if (g.points > 0)
        {
            out.push_back(g);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run

struct RunOutput
{
    std::vector<MetricCurve> curves;
    std::vector<CellError> errors;
    std::vector<IdentityCheck> identities;
    std::vector<GapStat> gaps;

    bool HasQuadratureFailure() const
    {
        return std::any_of(errors.begin(), errors.end(), [](const CellError& e) { return e.quadrature; });
    }
};

inline RunOutput
Run(const ExperimentConfig& cfg)
{
    RunOutput out;
    auto registry = std::make_shared<ModelRegistry>(cfg.quadrature);
    ScenarioEvaluator ev(cfg.params, registry);
    const size_t n = cfg.scenarios.size();
    std::vector<std::vector<MetricCurve>> ana(n);
    std::vector<std::vector<MetricCurve>> sim(n);
    std::vector<std::vector<CellError>> errs(n);

    if (cfg.engine != Engine::MonteCarlo)
    {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (size_t i = next++; i < n; i = next++)
            {
                ana[i] = AnalyticCurves(ev, cfg.scenarios[i], cfg.sweep, errs[i]);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 1; w < cfg.jobs; ++w)
        {
            pool.emplace_back(worker);
        }
        worker();
        for (auto& t : pool)
        {
            t.join();
        }
    }
    if (cfg.engine != Engine::Analytic)
    {
        SimConfig sc = cfg.sim;
        sc.jobs = cfg.jobs;
        for (size_t i = 0; i < n; ++i)
        {
            EmpiricalMetrics m(RunSimulation(cfg.scenarios[i], cfg.params, sc));
            sim[i] = SimulatedCurves(m, cfg.sweep, errs[i]);
        }
    }
    for (size_t i = 0; i < n; ++i)
    {
        out.curves.insert(out.curves.end(), ana[i].begin(), ana[i].end());
        out.curves.insert(out.curves.end(), sim[i].begin(), sim[i].end());
        out.errors.insert(out.errors.end(), errs[i].begin(), errs[i].end());
    }
    if (cfg.identity_checks && cfg.engine != Engine::MonteCarlo)
    {
        std::vector<double> grid = cfg.sweep.sinr_db.empty() ? std::vector<double>{0.0} : cfg.sweep.sinr_db;
        try
        {
            out.identities = RunIdentityChecks(cfg.params, registry, grid);
        }
        catch (const QuadratureError& e)
        {
            out.errors.push_back({"identity-checks", "", "", 0.0, e.what(), true});
        }
    }
    if (cfg.engine == Engine::Both)
    {
        out.gaps = GapStatistics(out.curves, cfg.params);
    }
    return out;
}

inline Json
SummaryJson(const ExperimentConfig& cfg, const RunOutput& out)
{
    Json j;
    j["engine"] = EngineName(cfg.engine);
    j["scenarios"] = Json::array();
    for (const Scenario& s : cfg.scenarios)
    {
        j["scenarios"].push_back(s.Label());
    }
    j["identity_checks"] = Json::array();
    for (const IdentityCheck& c : out.identities)
    {
        j["identity_checks"].push_back(
            {{"name", c.name}, {"max_abs_diff", c.max_abs_diff}, {"tolerance", c.tolerance}, {"pass", c.Pass()}});
    }
    j["gaps"] = Json::array();
    bool all = true;
    double worst = 0.0;
    for (const GapStat& g : out.gaps)
    {
        all = all && g.Pass();
        worst = std::max(worst, g.max_gap);
        j["gaps"].push_back({{"scenario", g.scenario},
                             {"side", g.side},
                             {"metric", g.metric},
                             {"max_abs_gap", g.max_gap},
                             {"at_threshold", g.at_threshold},
                             {"stderr_at_max", g.stderr_at_max},
                             {"violations", g.violations},
                             {"pass", g.Pass()}});
    }
    if (!out.gaps.empty())
    {
        j["gap_summary"] = {{"max_abs_gap", worst}, {"pass", all}};
    }
    j["errors"] = Json::array();
    for (const CellError& e : out.errors)
    {
        j["errors"].push_back({{"scenario", e.scenario},
                               {"side", e.side},
                               {"metric", e.metric},
                               {"threshold", e.threshold},
                               {"message", e.message},
                               {"quadrature", e.quadrature}});
    }
    return j;
}

/// Writes one CSV per (scenario, metric, engine) plus summary.json; returns the written paths.
inline std::vector<std::string>
WriteOutputs(const std::string& dir, const ExperimentConfig& cfg, const RunOutput& out)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<MetricCurve>> groups;
    std::vector<std::tuple<std::string, std::string, std::string>> order;
    for (const MetricCurve& c : out.curves)
    {
        auto key = std::make_tuple(c.scenario, c.metric, c.engine);
        if (!groups.count(key))
        {
            order.push_back(key);
        }
        groups[key].push_back(c);
    }
    std::vector<std::string> paths;
    for (const auto& key : order)
    {
        auto [scenario, m, engine] = key;
        fs::path p = fs::path(dir) / (detail::FileStem(scenario) + "__" + m + "__" + engine + ".csv");
        std::ofstream f(p);
        if (!f)
        {
            throw std::runtime_error("cannot write " + p.string());
        }
        WriteCsv(f, groups[key]);
        paths.push_back(p.string());
    }
    fs::path sp = fs::path(dir) / "summary.json";
    std::ofstream sf(sp);
    sf << SummaryJson(cfg, out).dump(2) << '\n';
    paths.push_back(sp.string());
    return paths;
}

// ---------------------------------------------------------------------------
// Compare

struct OrderingCheck
{
    std::string name;
    bool applicable = false;
    bool pass = false;
    std::string detail;
};

namespace detail
{

inline const MetricCurve*
FindCurve(const std::vector<MetricCurve>& curves, const std::string& scenario, const std::string& side,
          const std::string& m, const std::string& engine)
{
    for (const MetricCurve& c : curves)
    {
        if (c.scenario == scenario && c.side == side && c.metric == m && c.engine == engine)
        {
            return &c;
        }
    }
    return nullptr;
}

inline std::optional<double>
ValueAt(const MetricCurve& c, double threshold)
{
    for (const CurvePoint& p : c.points)
    {
        if (std::abs(p.threshold - threshold) < 1e-9 && !std::isnan(p.value))
        {
            return p.value;
        }
    }
    return std::nullopt;
}

/// Smallest rate at which a non-increasing rate-coverage curve drops to the level c.
inline std::optional<double>
InverseRate(const MetricCurve& c, double level)
{
    const auto& p = c.points;
    for (size_t i = 0; i + 1 < p.size(); ++i)
    {
        double a = p[i].value;
        double b = p[i + 1].value;
        if (a >= level && b <= level)
        {
            if (a == b)
            {
                return p[i].threshold;
            }
            double t = (a - level) / (a - b);
            return p[i].threshold + t * (p[i + 1].threshold - p[i].threshold);
        }
    }
    return std::nullopt;
}

} // namespace detail

struct RateLoss
{
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    size_t points = 0;
};

/// Rate loss 1 - rho'/rho where scenario coverage at rho' equals reference coverage at rho.
inline std::optional<RateLoss>
RateLossVs(const MetricCurve& reference, const MetricCurve& scenario, double rho_lo, double rho_hi)
{
    RateLoss r;
    r.min = std::numeric_limits<double>::infinity();
    r.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const CurvePoint& q : reference.points)
    {
        if (q.threshold < rho_lo - 1e-9 || q.threshold > rho_hi + 1e-9 || std::isnan(q.value))
        {
            continue;
        }
        auto rho2 = detail::InverseRate(scenario, q.value);
        if (!rho2)
        {
            continue;
        }
        double loss = 1.0 - *rho2 / q.threshold;
        r.min = std::min(r.min, loss);
        r.max = std::max(r.max, loss);
        sum += loss;
        ++r.points;
    }
    if (r.points == 0)
    {
        return std::nullopt;
    }
    r.mean = sum / static_cast<double>(r.points);
    return r;
}

/// Ordering assertions of the cross-scenario comparison on whichever scenarios are present.
inline std::vector<OrderingCheck>
CompareCurves(const std::vector<MetricCurve>& curves, double lambda_w_per_km2, const std::string& engine = "analytic")
{
    using detail::FindCurve;
    using detail::ValueAt;
    std::vector<OrderingCheck> out;
    std::vector<std::string> scenarios;
    for (const MetricCurve& c : curves)
    {
        if (c.engine == engine && std::find(scenarios.begin(), scenarios.end(), c.scenario) == scenarios.end())
        {
            scenarios.push_back(c.scenario);
        }
    }
    auto fmt = [](double v) { return FormatCompact(v); };

    {
        OrderingCheck c{"wifi dst under continuous lte is the minimum over lte-u and laa for T <= 10 dB", false, false,
                        ""};
        const MetricCurve* ref = FindCurve(curves, "continuous", "wifi", metric::kDst, engine);
        if (ref && scenarios.size() > 1)
        {
            c.applicable = true;
            c.pass = true;
            for (const std::string& s : scenarios)
            {
                const MetricCurve* o = FindCurve(curves, s, "wifi", metric::kDst, engine);
                if (s == "continuous" || s == "wifi-only" || !o)
                {
                    continue;
                }
                // The Wi-Fi/Wi-Fi baseline is reported but not asserted.
                const bool baseline = s == "wifi-wifi";
                for (const CurvePoint& p : ref->points)
                {
                    auto v = ValueAt(*o, p.threshold);
                    if (p.threshold <= 10.0 + 1e-9 && v && p.value > *v)
                    {
                        c.pass = c.pass && baseline;
                        c.detail += (baseline ? "note: " : "") + s + " below at " + fmt(p.threshold) + " dB; ";
                    }
                }
            }
        }
        out.push_back(c);
    }
    {
        OrderingCheck c{"eta=0.5: sync wifi dst >= async for T <= 0 dB, async lte dst >= sync", false, false, ""};
        const MetricCurve* sw = FindCurve(curves, "duty-sync:eta=0.5", "wifi", metric::kDst, engine);
        const MetricCurve* aw = FindCurve(curves, "duty-async:eta=0.5", "wifi", metric::kDst, engine);
        const MetricCurve* sl = FindCurve(curves, "duty-sync:eta=0.5", "lte", metric::kDst, engine);
        const MetricCurve* al = FindCurve(curves, "duty-async:eta=0.5", "lte", metric::kDst, engine);
        if (sw && aw && sl && al)
        {
            c.applicable = true;
            c.pass = true;
            for (const CurvePoint& p : sw->points)
            {
                auto v = ValueAt(*aw, p.threshold);
                if (p.threshold <= 1e-9 && v && p.value < *v)
                {
                    c.pass = false;
                    c.detail += "wifi sync below async at " + fmt(p.threshold) + " dB; ";
                }
            }
            for (const CurvePoint& p : sl->points)
            {
                auto v = ValueAt(*al, p.threshold);
                if (v && *v < p.value)
                {
                    c.pass = false;
                    c.detail += "lte async below sync at " + fmt(p.threshold) + " dB; ";
                }
            }
        }
        out.push_back(c);
    }
    for (const char* laa : {"lbt-same:gl=-62", "lbt-lower:gl=-62"})
    {
        OrderingCheck c{std::string(laa) + ": wifi dst within 0.1 lambda_w of continuous", false, false, ""};
        const MetricCurve* ref = FindCurve(curves, "continuous", "wifi", metric::kDst, engine);
        const MetricCurve* o = FindCurve(curves, laa, "wifi", metric::kDst, engine);
        if (ref && o)
        {
            c.applicable = true;
            double worst = 0.0;
            for (const CurvePoint& p : ref->points)
            {
                if (auto v = ValueAt(*o, p.threshold))
                {
                    worst = std::max(worst, std::abs(*v - p.value));
                }
            }
            c.pass = worst <= 0.1 * lambda_w_per_km2;
            c.detail = "max |diff| = " + fmt(worst) + " per km2";
        }
        out.push_back(c);
    }
    struct LossCase
    {
        const char* scenario;
        double lo;
        double hi;
    };
    for (LossCase lc : {LossCase{"lbt-same:gl=-82", 0.25, 0.5}, LossCase{"lbt-lower:gl=-77", 0.25, 0.5},
                        LossCase{"duty-sync:eta=0.5", 0.45, 1.0}})
    {
        OrderingCheck c{std::string(lc.scenario) + ": lte rate loss vs continuous in [" + fmt(lc.lo) + ", " +
                        fmt(lc.hi) + "] for 5-30 Mbps", false, false, ""};
        const MetricCurve* ref = FindCurve(curves, "continuous", "lte", metric::kRate, engine);
        const MetricCurve* o = FindCurve(curves, lc.scenario, "lte", metric::kRate, engine);
        if (ref && o)
        {
            c.applicable = true;
            auto loss = RateLossVs(*ref, *o, 5.0, 30.0);
            if (loss)
            {
                c.pass = loss->min >= lc.lo && loss->max <= lc.hi;
                c.detail = "loss in [" + fmt(loss->min) + ", " + fmt(loss->max) + "], mean " + fmt(loss->mean);
            }
            else
            {
                c.detail = "rate grid does not cover the inverse rates";
            }
        }
        out.push_back(c);
    }
    return out;
}

inline Json
CompareJson(const std::vector<OrderingCheck>& checks)
{
    Json j = Json::array();
    for (const OrderingCheck& c : checks)
    {
        Json e{{"name", c.name}, {"applicable", c.applicable}, {"detail", c.detail}};
        e["pass"] = c.applicable ? Json(c.pass) : Json(nullptr);
        j.push_back(e);
    }
    return j;
}

/// Loads every CSV named directly or found in a named directory.
inline std::vector<MetricCurve>
LoadCurves(const std::vector<std::string>& paths)
{
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    for (const std::string& p : paths)
    {
        if (fs::is_directory(p))
        {
            std::vector<std::string> found;
            for (const auto& e : fs::directory_iterator(p))
            {
                if (e.path().extension() == ".csv")
                {
                    found.push_back(e.path().string());
                }
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        }
        else
        {
            files.push_back(p);
        }
    }
    std::vector<MetricCurve> out;
    for (const std::string& f : files)
    {
        std::ifstream is(f);
        if (!is)
        {
            throw std::runtime_error("cannot read " + f);
        }
        auto c = ReadCsv(is);
        out.insert(out.end(), c.begin(), c.end());
    }
    return out;
}

} // namespace coex
