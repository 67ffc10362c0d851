#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace coex
{

inline constexpr double kSpeedOfLight = 3.0e8;
inline constexpr double kPi = std::numbers::pi;

inline double
DbmToMw(double dbm)
{
    return std::pow(10.0, dbm / 10.0);
}

inline double
MwToDbm(double mw)
{
    return 10.0 * std::log10(mw);
}

inline double
DbToLinear(double db)
{
    return std::pow(10.0, db / 10.0);
}

inline double
LinearToDb(double x)
{
    return 10.0 * std::log10(x);
}

inline double
PerKm2ToPerM2(double v)
{
    return v * 1e-6;
}

inline double
PerM2ToPerKm2(double v)
{
    return v * 1e6;
}

struct Point2
{
    double x = 0.0;
    double y = 0.0;

    double Norm() const
    {
        return std::hypot(x, y);
    }

    double Norm2() const
    {
        return x * x + y * y;
    }

    Point2 operator+(const Point2& o) const
    {
        return {x + o.x, y + o.y};
    }

    Point2 operator-(const Point2& o) const
    {
        return {x - o.x, y - o.y};
    }

    Point2 operator*(double s) const
    {
        return {x * s, y * s};
    }

    bool operator==(const Point2&) const = default;

    bool IsFinite() const
    {
        return std::isfinite(x) && std::isfinite(y);
    }
};

inline double
Distance(const Point2& a, const Point2& b)
{
    return (a - b).Norm();
}

struct BackoffWindow
{
    double a = 0.0;
    double b = 1.0;

    bool operator==(const BackoffWindow&) const = default;
};

/// Physical and MAC parameters, SI units and linear scale throughout.
struct CoexParams
{
    double lambda_w = 4e-4;
    double lambda_l = 4e-4;
    double p_w = DbmToMw(23.0);
    double p_l = DbmToMw(23.0);
    double gamma_cs = DbmToMw(-82.0);
    double gamma_ed = DbmToMw(-62.0);
    double gamma_l = DbmToMw(-62.0);
    double f_c = 5e9;
    double alpha = 4.0;
    double mu = 1.0;
    double sigma_n2 = 0.0;
    double bandwidth = 20e6;
    double eta = 1.0;
    BackoffWindow backoff_window{0.0, 1.0};

    /// Path-loss constant (4 pi / wavelength)^2.
    double PathLossConstant() const
    {
        double k = 4.0 * kPi * f_c / kSpeedOfLight;
        return k * k;
    }

    void Validate() const
    {
        auto nonneg = [](double v, const char* name) {
            if (!(v >= 0.0) || !std::isfinite(v))
            {
                throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
            }
        };
        nonneg(lambda_w, "lambda_w");
        nonneg(lambda_l, "lambda_l");
        nonneg(p_w, "p_w");
        nonneg(p_l, "p_l");
        nonneg(gamma_cs, "gamma_cs");
        nonneg(gamma_ed, "gamma_ed");
        nonneg(gamma_l, "gamma_l");
        nonneg(sigma_n2, "sigma_n2");
        if (!(f_c > 0.0))
        {
            throw std::invalid_argument("f_c must be > 0");
        }
        if (!(bandwidth > 0.0))
        {
            throw std::invalid_argument("bandwidth must be > 0");
        }
        if (!(mu > 0.0))
        {
            throw std::invalid_argument("mu must be > 0");
        }
        if (!(alpha > 2.0))
        {
            throw std::invalid_argument("alpha must be > 2");
        }
        if (!(eta >= 0.0 && eta <= 1.0))
        {
            throw std::invalid_argument("eta must lie in [0, 1]");
        }
        if (!(backoff_window.a < backoff_window.b))
        {
            throw std::invalid_argument("backoff_window requires a < b");
        }
        if (gamma_cs > gamma_ed)
        {
            throw std::invalid_argument("gamma_cs must not exceed gamma_ed");
        }
    }
};

/// Linear attenuation l(d), clamped at the 1 m reference distance.
inline double
PathLoss(double d, const CoexParams& params)
{
    return params.PathLossConstant() * std::pow(std::max(d, 1.0), params.alpha);
}

/// Precomputed path-loss evaluator for hot loops.
class Propagation
{
  public:
    explicit Propagation(const CoexParams& params)
        : m_k(params.PathLossConstant()),
          m_alpha(params.alpha),
          m_mu(params.mu),
          m_quartic(params.alpha == 4.0)
    {
    }

    double Loss(double d) const
    {
        double c = std::max(d, 1.0);
        if (m_quartic)
        {
            double c2 = c * c;
            return m_k * c2 * c2;
        }
        return m_k * std::pow(c, m_alpha);
    }

    /// l(d) from a squared distance.
    double LossSq(double d2) const
    {
        double c2 = std::max(d2, 1.0);
        if (m_quartic)
        {
            return m_k * c2 * c2;
        }
        return m_k * std::pow(c2, 0.5 * m_alpha);
    }

    /// exp(-mu s l(d)): probability that a node at distance d is not sensed at ratio s.
    double NotSensed(double s, double d) const
    {
        return std::exp(-m_mu * s * Loss(d));
    }

    /// Distance beyond which exp(-mu s l(d)) < eps.
    double SensingRadius(double s, double eps) const
    {
        if (!(s > 0.0))
        {
            return std::numeric_limits<double>::infinity();
        }
        double v = std::log(1.0 / eps) / (m_mu * s * m_k);
        return std::max(1.0, std::pow(v, 1.0 / m_alpha));
    }

    double K() const
    {
        return m_k;
    }

    double Alpha() const
    {
        return m_alpha;
    }

    double Mu() const
    {
        return m_mu;
    }

  private:
    double m_k;
    double m_alpha;
    double m_mu;
    bool m_quartic;
};

/// Rayleigh nearest-neighbour density 2 pi lambda r exp(-lambda pi r^2).
inline double
NearestDistancePdf(double r, double lambda)
{
    if (r < 0.0 || !(lambda > 0.0))
    {
        throw std::invalid_argument("NearestDistancePdf requires r >= 0 and lambda > 0");
    }
    return 2.0 * kPi * lambda * r * std::exp(-lambda * kPi * r * r);
}

class ZeroAirtimeError : public std::domain_error
{
  public:
    ZeroAirtimeError()
        : std::domain_error("zero airtime: rate coverage is 0 for any positive rate")
    {
    }
};

/// SINR threshold 2^{rho/(B m)} - 1 for a rate target rho and airtime fraction m.
inline double
RateToSinrThreshold(double rho, double airtime, double bandwidth)
{
    if (!(bandwidth > 0.0) || rho < 0.0 || airtime > 1.0 || airtime < 0.0)
    {
        throw std::invalid_argument("RateToSinrThreshold: bad arguments");
    }
    if (airtime == 0.0)
    {
        throw ZeroAirtimeError();
    }
    return std::exp2(rho / (bandwidth * airtime)) - 1.0;
}

enum class ScenarioKind
{
    WifiOnly,
    WifiWifiBaseline,
    ContinuousLte,
    DutyCycleSync,
    DutyCycleAsync,
    LbtSamePriority,
    LbtLowerPriority,
};

enum class Side
{
    WiFi,
    Lte,
};

inline const char*
SideName(Side s)
{
    return s == Side::WiFi ? "wifi" : "lte";
}

inline Side
ParseSide(const std::string& s)
{
    if (s == "wifi")
    {
        return Side::WiFi;
    }
    if (s == "lte")
    {
        return Side::Lte;
    }
    throw std::invalid_argument("unknown side '" + s + "'");
}

/// A coexistence mechanism together with the knobs it reads.
struct Scenario
{
    ScenarioKind kind = ScenarioKind::ContinuousLte;
    std::optional<double> eta;
    std::optional<double> gamma_l;
    std::optional<BackoffWindow> window;

    static Scenario WifiOnly()
    {
        return {ScenarioKind::WifiOnly, {}, {}, {}};
    }

    static Scenario Baseline()
    {
        return {ScenarioKind::WifiWifiBaseline, {}, {}, {}};
    }

    static Scenario Continuous()
    {
        return {ScenarioKind::ContinuousLte, {}, {}, {}};
    }

    static Scenario DutySync(double eta)
    {
        return {ScenarioKind::DutyCycleSync, eta, {}, {}};
    }

    static Scenario DutyAsync(double eta)
    {
        return {ScenarioKind::DutyCycleAsync, eta, {}, {}};
    }

    static Scenario LbtSame(double gamma_l_dbm)
    {
        return {ScenarioKind::LbtSamePriority, {}, DbmToMw(gamma_l_dbm), BackoffWindow{0.0, 1.0}};
    }

    static Scenario LbtLower(double gamma_l_dbm)
    {
        return {ScenarioKind::LbtLowerPriority, {}, DbmToMw(gamma_l_dbm), BackoffWindow{1.0, 2.0}};
    }

    bool IsDuty() const
    {
        return kind == ScenarioKind::DutyCycleSync || kind == ScenarioKind::DutyCycleAsync;
    }

    bool IsLbt() const
    {
        return kind == ScenarioKind::LbtSamePriority || kind == ScenarioKind::LbtLowerPriority;
    }

    /// Whether the scenario has an LTE (second operator) side.
    bool HasSecondSide() const
    {
        return kind != ScenarioKind::WifiOnly;
    }

    void Validate() const
    {
        if (IsDuty())
        {
            if (!eta || !(*eta >= 0.0 && *eta <= 1.0))
            {
                throw std::invalid_argument("duty-cycle scenario requires eta in [0, 1]");
            }
        }
        if (IsLbt())
        {
            if (!gamma_l || !(*gamma_l > 0.0))
            {
                throw std::invalid_argument("LBT scenario requires gamma_l > 0");
            }
            if (!window)
            {
                throw std::invalid_argument("LBT scenario requires a backoff window");
            }
            bool same = *window == BackoffWindow{0.0, 1.0};
            bool lower = *window == BackoffWindow{1.0, 2.0};
            if (!same && !lower)
            {
                throw std::invalid_argument("backoff window must be (0,1) or (1,2)");
            }
            if (kind == ScenarioKind::LbtSamePriority && !same)
            {
                throw std::invalid_argument("same-priority LBT requires window (0,1)");
            }
            if (kind == ScenarioKind::LbtLowerPriority && !lower)
            {
                throw std::invalid_argument("lower-priority LBT requires window (1,2)");
            }
        }
    }

    /// Parameters with the scenario's knobs written in.
    CoexParams Apply(CoexParams p) const
    {
        Validate();
        switch (kind)
        {
        case ScenarioKind::WifiOnly:
            p.lambda_l = 0.0;
            break;
        case ScenarioKind::WifiWifiBaseline:
            p.gamma_ed = p.gamma_cs;
            p.gamma_l = p.gamma_cs;
            p.p_l = p.p_w;
            p.backoff_window = {0.0, 1.0};
            break;
        case ScenarioKind::ContinuousLte:
            p.eta = 1.0;
            break;
        case ScenarioKind::DutyCycleSync:
        case ScenarioKind::DutyCycleAsync:
            p.eta = *eta;
            break;
        case ScenarioKind::LbtSamePriority:
        case ScenarioKind::LbtLowerPriority:
            p.gamma_l = *gamma_l;
            p.backoff_window = *window;
            break;
        }
        p.Validate();
        return p;
    }

    /// Stable textual label; round-trips through Parse.
    std::string Label() const;

    static Scenario Parse(const std::string& label);
};

inline std::string
FormatCompact(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string
Scenario::Label() const
{
    switch (kind)
    {
    case ScenarioKind::WifiOnly:
        return "wifi-only";
    case ScenarioKind::WifiWifiBaseline:
        return "wifi-wifi";
    case ScenarioKind::ContinuousLte:
        return "continuous";
    case ScenarioKind::DutyCycleSync:
        return "duty-sync:eta=" + FormatCompact(eta.value_or(1.0));
    case ScenarioKind::DutyCycleAsync:
        return "duty-async:eta=" + FormatCompact(eta.value_or(1.0));
    case ScenarioKind::LbtSamePriority:
        return "lbt-same:gl=" + FormatCompact(std::round(MwToDbm(gamma_l.value_or(1.0)) * 1e6) / 1e6);
    case ScenarioKind::LbtLowerPriority:
        return "lbt-lower:gl=" + FormatCompact(std::round(MwToDbm(gamma_l.value_or(1.0)) * 1e6) / 1e6);
    }
    return "unknown";
}

inline Scenario
Scenario::Parse(const std::string& label)
{
    auto value_after = [&](const std::string& prefix) {
        std::string rest = label.substr(prefix.size());
        size_t pos = 0;
        double v = std::stod(rest, &pos);
        if (pos != rest.size())
        {
            throw std::invalid_argument("bad scenario label '" + label + "'");
        }
        return v;
    };
    auto starts = [&](const std::string& prefix) { return label.rfind(prefix, 0) == 0; };
    Scenario s;
    if (label == "wifi-only")
    {
        s = WifiOnly();
    }
    else if (label == "wifi-wifi")
    {
        s = Baseline();
    }
    else if (label == "continuous")
    {
        s = Continuous();
    }
    else if (starts("duty-sync:eta="))
    {
        s = DutySync(value_after("duty-sync:eta="));
    }
    else if (starts("duty-async:eta="))
    {
        s = DutyAsync(value_after("duty-async:eta="));
    }
    else if (starts("lbt-same:gl="))
    {
        s = LbtSame(value_after("lbt-same:gl="));
    }
    else if (starts("lbt-lower:gl="))
    {
        s = LbtLower(value_after("lbt-lower:gl="));
    }
    else
    {
        throw std::invalid_argument("unknown scenario '" + label + "'");
    }
    s.Validate();
    return s;
}

} // namespace coex
