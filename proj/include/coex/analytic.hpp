#pragma once

#include "coex/core.hpp"
#include "coex/quadrature.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace coex
{

/// Medium access rule shared by both operators.
enum class Access
{
    Continuous,
    LbtSame,
    LbtLower,
};

/// Conditional medium access probabilities. The suffix names the probe's operator;
/// H1, H2*, H4* are conditioned on a tagged AP, H1W, H3*, H5* on a tagged eNB.
enum class HKind
{
    H1,
    H1W,
    H2W,
    H2L,
    H3W,
    H3L,
    H4W,
    H4L,
    H5W,
    H5L,
};

inline const char*
HKindName(HKind k)
{
    switch (k)
    {
    case HKind::H1:
        return "h1";
    case HKind::H1W:
        return "h1w";
    case HKind::H2W:
        return "h2w";
    case HKind::H2L:
        return "h2l";
    case HKind::H3W:
        return "h3w";
    case HKind::H3L:
        return "h3l";
    case HKind::H4W:
        return "h4w";
    case HKind::H4L:
        return "h4l";
    case HKind::H5W:
        return "h5w";
    case HKind::H5L:
        return "h5l";
    }
    return "?";
}

/// True when the tagged node of kind k is an eNB.
inline bool
TaggedIsEnb(HKind k)
{
    return k == HKind::H1W || k == HKind::H3W || k == HKind::H3L || k == HKind::H5W || k == HKind::H5L;
}

/// True when the probe of kind k is an eNB.
inline bool
ProbeIsEnb(HKind k)
{
    return k == HKind::H2L || k == HKind::H3L || k == HKind::H4L || k == HKind::H5L;
}

inline Access
AccessOf(HKind k)
{
    switch (k)
    {
    case HKind::H1:
    case HKind::H1W:
        return Access::Continuous;
    case HKind::H2W:
    case HKind::H2L:
    case HKind::H3W:
    case HKind::H3L:
        return Access::LbtSame;
    default:
        return Access::LbtLower;
    }
}

/// Serving-distance quadrature nodes for the outer r0 integral.
struct ServingGrid
{
    std::vector<double> r0;
    std::vector<double> weight;
};

inline ServingGrid
MakeServingGrid(double lambda, const QuadratureSpec& spec)
{
    if (!(lambda > 0.0))
    {
        throw std::invalid_argument("serving intensity must be > 0");
    }
    double umax = std::log(1.0 / spec.serving_tail);
    std::vector<double> breaks;
    for (double b : spec.serving_panels)
    {
        if (b < umax)
        {
            breaks.push_back(b);
        }
    }
    breaks.push_back(umax);
    CompositeRule rule = MakeCompositeRule(breaks, spec.serving_points);
    ServingGrid g;
    double total = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i)
    {
        double u = rule.nodes[i];
        g.r0.push_back(std::sqrt(u / (kPi * lambda)));
        g.weight.push_back(rule.weights[i] * std::exp(-u));
        total += g.weight.back();
    }
    for (double& w : g.weight)
    {
        w /= total;
    }
    return g;
}

/// Radial profile of the angular integral of (density - h_far) around a tagged node at (r0, 0).
struct HProfile
{
    double inner_radius = 0.0;
    std::vector<double> rho;
    std::vector<double> weight;
};

/// One-dimensional table of an unexcluded pair integral as a function of separation.
class PairTable
{
  public:
    PairTable(double s1, double s2, double lambda, const Propagation& prop, const QuadratureSpec& spec)
    {
        double eps = spec.abs_tol;
        m_dmax = prop.SensingRadius(s1, eps) + prop.SensingRadius(s2, eps);
        const double step = 0.25;
        size_t n = static_cast<size_t>(std::ceil(m_dmax / step)) + 1;
        std::vector<double> v(n);
        for (size_t i = 0; i < n; ++i)
        {
            v[i] = CFuncRatio(Point2{i * step, 0.0}, s1, Point2{}, s2, 0.0, lambda, prop, spec);
        }
        m_dmax = (n - 1) * step;
        m_spline = boost::math::interpolators::cardinal_cubic_b_spline<double>(v.data(), v.size(), 0.0, step,
                                                                                 0.0, 0.0);
    }

    double operator()(double d) const
    {
        if (d >= m_dmax)
        {
            return 0.0;
        }
        return std::max(0.0, m_spline(d));
    }

  private:
    double m_dmax = 0.0;
    boost::math::interpolators::cardinal_cubic_b_spline<double> m_spline;
};

class AnalyticModel;

/// Evaluates one conditional MAP for a tagged node at (r0, 0), ring by ring.
class HEvaluator
{
  public:
    HEvaluator(const AnalyticModel& model, HKind kind, double r0);

    /// Fix |x| = rho; caches the terms that depend only on |x|.
    void SetRing(double rho);

    /// h at (rho cos theta, rho sin theta) for the current ring.
    double At(double theta) const;

    /// Interferer intensity factor at the same point: h times the probability that the
    /// tagged node's transmission leaves a node at x in place.
    double DensityAt(double theta) const;

    double Eval(const Point2& x);

    double Far() const;

    /// Whether the probe must lie outside B(0, r0).
    bool Excludes() const
    {
        return m_excludes;
    }

    HKind Kind() const
    {
        return m_kind;
    }

  private:
    const AnalyticModel& m_model;
    HKind m_kind;
    double m_r0;
    bool m_excludes;
    double m_nt = 0.0;
    double m_rho = -1.0;
    double m_ring = 0.0;
};

/// Analytic engine for one parameter set.
class AnalyticModel
{
  public:
    AnalyticModel(CoexParams params, QuadratureSpec spec, std::optional<double> lte_serving_lambda = {})
        : m_params(params),
          m_spec(std::move(spec)),
          m_prop(params),
          m_serving_l(lte_serving_lambda.value_or(params.lambda_l))
    {
        m_params.Validate();
        m_spec.Validate();
        sWW = params.gamma_cs / params.p_w;
        sWL = params.gamma_ed / params.p_l;
        sLW = params.gamma_l / params.p_w;
        sLL = params.gamma_l / params.p_l;
        m_nw = N(0.0, 0.0, sWW, params.lambda_w);
        m_nl = N(0.0, 0.0, sWL, params.lambda_l);
        m_nw3 = N(0.0, 0.0, sLW, params.lambda_w);
        m_nl3 = N(0.0, 0.0, sLL, params.lambda_l);
        double smin = std::min({sWW, sWL, sLW, sLL});
        m_pair_radius = 2.0 * m_prop.SensingRadius(smin, m_spec.abs_tol);
    }

    const CoexParams& Params() const
    {
        return m_params;
    }

    const QuadratureSpec& Spec() const
    {
        return m_spec;
    }

    const Propagation& Prop() const
    {
        return m_prop;
    }

    double ServingLambda(Side side) const
    {
        return side == Side::WiFi ? m_params.lambda_w : m_serving_l;
    }

    /// N(y, r) with |y| = y_norm for a sensing ratio s and intensity lambda.
    double N(double y_norm, double r, double s, double lambda) const
    {
        return NFuncRatio(y_norm, r, s, lambda, m_prop, m_spec);
    }

    double C(const Point2& y1, double s1, const Point2& y2, double s2, double R, double lambda) const
    {
        return CFuncRatio(y1, s1, y2, s2, R, lambda, m_prop, m_spec);
    }

    /// Unexcluded pair integral at separation d, tabulated.
    double Pair(double s1, double s2, double lambda, double d) const;

    double NW() const
    {
        return m_nw;
    }

    double NL() const
    {
        return m_nl;
    }

    double NW3() const
    {
        return m_nw3;
    }

    double NL3() const
    {
        return m_nl3;
    }

    double NW2(double r0) const
    {
        return N(r0, r0, sWW, m_params.lambda_w);
    }

    double NL1(double r0) const
    {
        return N(r0, r0, sLL, m_params.lambda_l);
    }

    double PairRadius() const
    {
        return m_pair_radius;
    }

    // ---- medium access probabilities

    double TypicalMap(Access access, Side side) const
    {
        switch (access)
        {
        case Access::Continuous:
            return side == Side::WiFi ? PhiMap(m_nw) * std::exp(-m_nl) : 1.0;
        case Access::LbtSame:
            return side == Side::WiFi ? PhiMap(m_nw + m_nl) : PhiMap(m_nw3 + m_nl3);
        case Access::LbtLower:
            return side == Side::WiFi ? PhiMap(m_nw) : std::exp(-m_nw3) * PhiMap(m_nl3);
        }
        return 0.0;
    }

    /// Tagged-node MAP at a given serving distance.
    double TaggedMapAt(Access access, Side side, double r0) const
    {
        switch (access)
        {
        case Access::Continuous:
            return side == Side::WiFi ? PhiMap(NW2(r0)) * std::exp(-m_nl) : 1.0;
        case Access::LbtSame:
            return side == Side::WiFi ? PhiMap(NW2(r0) + m_nl) : PhiMap(m_nw3 + NL1(r0));
        case Access::LbtLower:
            return side == Side::WiFi ? PhiMap(NW2(r0)) : std::exp(-m_nw3) * PhiMap(NL1(r0));
        }
        return 0.0;
    }

    double TaggedMap(Access access, Side side) const
    {
        const ServingGrid& g = Grid(side);
        double sum = 0.0;
        for (size_t i = 0; i < g.r0.size(); ++i)
        {
            sum += g.weight[i] * TaggedMapAt(access, side, g.r0[i]);
        }
        return sum;
    }

    // ---- conditional MAPs

    double H(HKind kind, double r0, const Point2& x) const
    {
        if (r0 < 0.0 || !x.IsFinite())
        {
            throw std::invalid_argument("conditional MAP: bad arguments");
        }
        HEvaluator ev(*this, kind, r0);
        if (ev.Excludes() && x.Norm() < r0 * (1.0 - 1e-12))
        {
            throw std::domain_error(std::string(HKindName(kind)) + ": probe inside the exclusion ball");
        }
        return ev.Eval(x);
    }

    double HFar(HKind kind) const
    {
        switch (kind)
        {
        case HKind::H1:
        case HKind::H1W:
            return PhiMap(m_nw) * std::exp(-m_nl);
        case HKind::H2W:
        case HKind::H3W:
            return PhiMap(m_nw + m_nl);
        case HKind::H2L:
        case HKind::H3L:
            return PhiMap(m_nw3 + m_nl3);
        case HKind::H4W:
        case HKind::H5W:
            return PhiMap(m_nw);
        case HKind::H4L:
        case HKind::H5L:
            return std::exp(-m_nw3) * PhiMap(m_nl3);
        }
        return 0.0;
    }

    /// Cached angular profile of the interferer density factor minus h_far, tagged node at (r0, 0).
    std::shared_ptr<const HProfile> Profile(HKind kind, double r0) const;

    // ---- SINR coverage

    /// Coverage conditioned on serving distance r0.
    double CoverageAt(Access access, Side side, double T, double r0) const;

    double Coverage(Access access, Side side, double T) const
    {
        if (T < 0.0 || std::isnan(T))
        {
            throw std::invalid_argument("SINR threshold must be >= 0");
        }
        const ServingGrid& g = Grid(side);
        double sum = 0.0;
        for (size_t i = 0; i < g.r0.size(); ++i)
        {
            sum += g.weight[i] * CoverageAt(access, side, T, g.r0[i]);
        }
        return std::clamp(sum, 0.0, 1.0);
    }

    const ServingGrid& Grid(Side side) const
    {
        std::lock_guard<std::mutex> lock(m_mutex);
        auto& slot = side == Side::WiFi ? m_grid_w : m_grid_l;
        if (!slot)
        {
            slot = MakeServingGrid(ServingLambda(side), m_spec);
        }
        return *slot;
    }

    // Sensing ratios: first letter senses, second letter transmits.
    double sWW = 0.0;
    double sWL = 0.0;
    double sLW = 0.0;
    double sLL = 0.0;

  private:
    struct Component
    {
        std::optional<HKind> kind;
        double lambda;
        double ratio;
        bool excluded;
    };

    std::vector<Component> Components(Access access, Side side) const
    {
        const double lw = m_params.lambda_w;
        const double ll = m_params.lambda_l;
        const double wl = m_params.p_w / m_params.p_l;
        const double lw_ratio = m_params.p_l / m_params.p_w;
        switch (access)
        {
        case Access::Continuous:
            if (side == Side::WiFi)
            {
                return {{std::nullopt, ll, wl, false}, {HKind::H1, lw, 1.0, true}};
            }
            return {{std::nullopt, ll, 1.0, true}, {HKind::H1W, lw, lw_ratio, false}};
        case Access::LbtSame:
            if (side == Side::WiFi)
            {
                return {{HKind::H2L, ll, wl, false}, {HKind::H2W, lw, 1.0, true}};
            }
            return {{HKind::H3W, lw, lw_ratio, false}, {HKind::H3L, ll, 1.0, true}};
        case Access::LbtLower:
            if (side == Side::WiFi)
            {
                return {{HKind::H4L, ll, wl, false}, {HKind::H4W, lw, 1.0, true}};
            }
            return {{HKind::H5W, lw, lw_ratio, false}, {HKind::H5L, ll, 1.0, true}};
        }
        return {};
    }

    CoexParams m_params;
    QuadratureSpec m_spec;
    Propagation m_prop;
    double m_serving_l;
    double m_nw = 0.0;
    double m_nl = 0.0;
    double m_nw3 = 0.0;
    double m_nl3 = 0.0;
    double m_pair_radius = 0.0;

    mutable std::mutex m_mutex;
    mutable std::optional<ServingGrid> m_grid_w;
    mutable std::optional<ServingGrid> m_grid_l;
    mutable std::map<std::tuple<double, double, double>, std::shared_ptr<const PairTable>> m_pairs;
    mutable std::map<std::pair<int, double>, std::shared_ptr<const HProfile>> m_profiles;
};

// ---------------------------------------------------------------------------

inline double
AnalyticModel::Pair(double s1, double s2, double lambda, double d) const
{
    if (!(lambda > 0.0))
    {
        return 0.0;
    }
    auto key = std::make_tuple(s1, s2, lambda);
    std::shared_ptr<const PairTable> table;
    {
        std::lock_guard<std::mutex> lock(m_mutex);
        auto it = m_pairs.find(key);
        if (it != m_pairs.end())
        {
            table = it->second;
        }
    }
    if (!table)
    {
        auto built = std::make_shared<const PairTable>(s1, s2, lambda, m_prop, m_spec);
        std::lock_guard<std::mutex> lock(m_mutex);
        table = m_pairs.emplace(key, built).first->second;
    }
    return (*table)(d);
}

inline HEvaluator::HEvaluator(const AnalyticModel& model, HKind kind, double r0)
    : m_model(model),
      m_kind(kind),
      m_r0(r0)
{
    const auto& m = model;
    switch (kind)
    {
    case HKind::H1:
    case HKind::H4W:
        m_excludes = true;
        m_nt = m.NW2(r0);
        break;
    case HKind::H1W:
        m_excludes = false;
        break;
    case HKind::H2W:
        m_excludes = true;
        m_nt = m.NW2(r0) + m.NL();
        break;
    case HKind::H2L:
        m_excludes = false;
        m_nt = m.NW2(r0) + m.NL();
        break;
    case HKind::H3W:
        m_excludes = false;
        m_nt = m.NW3() + m.NL1(r0);
        break;
    case HKind::H3L:
        m_excludes = true;
        m_nt = m.NW3() + m.NL1(r0);
        break;
    case HKind::H4L:
        m_excludes = false;
        m_nt = m.NW2(r0);
        break;
    case HKind::H5W:
        m_excludes = false;
        break;
    case HKind::H5L:
        m_excludes = true;
        m_nt = m.NL1(r0);
        break;
    }
}

inline void
HEvaluator::SetRing(double rho)
{
    const auto& m = m_model;
    const double lw = m.Params().lambda_w;
    const double ll = m.Params().lambda_l;
    m_rho = rho;
    switch (m_kind)
    {
    case HKind::H1:
    case HKind::H4W:
        m_ring = m.N(rho, m_r0, m.sWW, lw);
        break;
    case HKind::H1W:
        m_ring = m.N(rho, m_r0, m.sWL, ll);
        break;
    case HKind::H2W:
        m_ring = m.N(rho, m_r0, m.sWW, lw) + m.NL();
        break;
    case HKind::H2L:
        m_ring = m.N(rho, m_r0, m.sLW, lw) + m.NL3();
        break;
    case HKind::H3W:
        m_ring = m.NW() + m.N(rho, m_r0, m.sWL, ll);
        break;
    case HKind::H3L:
        m_ring = m.NW3() + m.N(rho, m_r0, m.sLL, ll);
        break;
    case HKind::H4L:
        m_ring = m.N(rho, m_r0, m.sLW, lw);
        break;
    case HKind::H5W:
        m_ring = 0.0;
        break;
    case HKind::H5L:
        m_ring = m.N(rho, m_r0, m.sLL, ll);
        break;
    }
}

inline double
HEvaluator::At(double theta) const
{
    const auto& m = m_model;
    const auto& prop = m.Prop();
    const double lw = m.Params().lambda_w;
    const double ll = m.Params().lambda_l;
    const double mu = prop.Mu();
    const Point2 x{m_rho * std::cos(theta), m_rho * std::sin(theta)};
    const Point2 x0{m_r0, 0.0};
    const double d = Distance(x, x0);
    auto not_sensed = [&](double s) { return -std::expm1(-mu * s * prop.Loss(d)); };
    double h = 0.0;
    switch (m_kind)
    {
    case HKind::H1:
    case HKind::H4W: {
        double n3 = m.C(x, m.sWW, x0, m.sWW, m_r0, lw);
        double v = FuncV(d, m.sWW, m.sWW, m_nt, m_ring, n3, prop);
        double u = FuncU(d, m.sWW, m_nt, prop);
        double lte = 1.0;
        if (m_kind == HKind::H1)
        {
            lte = std::exp(-(m.NL() - m.Pair(m.sWL, m.sWL, ll, d)));
        }
        h = v / u * lte;
        break;
    }
    case HKind::H1W:
        h = PhiMap(m.NW()) * std::exp(-m_ring) * not_sensed(m.sWL);
        break;
    case HKind::H2W: {
        double n3 = m.C(x0, m.sWW, x, m.sWW, m_r0, lw) + m.Pair(m.sWL, m.sWL, ll, d);
        h = FuncV(d, m.sWW, m.sWW, m_nt, m_ring, n3, prop) / FuncU(d, m.sWW, m_nt, prop);
        break;
    }
    case HKind::H2L: {
        double n3 = m.C(x, m.sLW, x0, m.sWW, m_r0, lw) + m.Pair(m.sLL, m.sWL, ll, d);
        h = FuncV(d, m.sWL, m.sLW, m_nt, m_ring, n3, prop) / FuncU(d, m.sWL, m_nt, prop);
        break;
    }
    case HKind::H3W: {
        double n3 = m.Pair(m.sLW, m.sWW, lw, d) + m.C(x, m.sWL, x0, m.sLL, m_r0, ll);
        h = FuncV(d, m.sLW, m.sWL, m_nt, m_ring, n3, prop) / FuncU(d, m.sLW, m_nt, prop);
        break;
    }
    case HKind::H3L: {
        double n3 = m.Pair(m.sLW, m.sLW, lw, d) + m.C(x, m.sLL, x0, m.sLL, m_r0, ll);
        h = FuncV(d, m.sLL, m.sLL, m_nt, m_ring, n3, prop) / FuncU(d, m.sLL, m_nt, prop);
        break;
    }
    case HKind::H4L: {
        double cw = m.C(x, m.sLW, x0, m.sWW, m_r0, lw);
        h = PhiMap(m.NL3()) * PhiMap(m_nt - cw) * not_sensed(m.sLW) / (PhiMap(m_nt) * std::exp(m_ring));
        break;
    }
    case HKind::H5W:
        h = PhiMap(m.NW() - m.Pair(m.sLW, m.sWW, lw, d));
        break;
    case HKind::H5L: {
        double n6 = m.C(x, m.sLL, x0, m.sLL, m_r0, ll);
        double cw = m.Pair(m.sLW, m.sLW, lw, d);
        double pair = not_sensed(m.sLL) * (FuncM(m_nt, m_ring, n6) + FuncM(m_ring, m_nt, n6));
        h = pair / (std::exp(m.NW3() - cw) * FuncU(d, m.sLL, m_nt, prop));
        break;
    }
    }
    return h;
}

inline double
HEvaluator::DensityAt(double theta) const
{
    double h = At(theta);
    if (m_kind == HKind::H5W)
    {
        // A lower-priority eNB that transmits has sensed no AP, so APs near it are thinned.
        const auto& m = m_model;
        const Point2 x{m_rho * std::cos(theta), m_rho * std::sin(theta)};
        const double d = Distance(x, Point2{m_r0, 0.0});
        h *= -std::expm1(-m.Prop().Mu() * m.sLW * m.Prop().Loss(d));
    }
    return h;
}

inline double
HEvaluator::Eval(const Point2& x)
{
    double rho = x.Norm();
    if (rho != m_rho)
    {
        SetRing(rho);
    }
    return At(std::atan2(x.y, x.x));
}

inline double
HEvaluator::Far() const
{
    return m_model.HFar(m_kind);
}

inline std::shared_ptr<const HProfile>
AnalyticModel::Profile(HKind kind, double r0) const
{
    auto key = std::make_pair(static_cast<int>(kind), r0);
    {
        std::lock_guard<std::mutex> lock(m_mutex);
        auto it = m_profiles.find(key);
        if (it != m_profiles.end())
        {
            return it->second;
        }
    }
    HEvaluator ev(*this, kind, r0);
    const double far = ev.Far();
    const double D = m_pair_radius;
    auto prof = std::make_shared<HProfile>();
    prof->inner_radius = ev.Excludes() ? r0 : 0.0;
    double rin = prof->inner_radius;
    double rout = r0 + D;
    std::vector<double> cuts{r0, r0 - D, 1.0};
    CompositeRule radial = MakeCompositeRule(PanelBreaks(rin, rout, m_spec.radial_panel, cuts), m_spec.radial_points);
    const GaussRule& ga = GaussLegendre(m_spec.angular_points);
    for (size_t i = 0; i < radial.nodes.size(); ++i)
    {
        double rho = radial.nodes[i];
        ev.SetRing(rho);
        double theta1 = 0.0;
        if (r0 > 0.0 && rho > 0.0)
        {
            double kappa = (rho * rho + r0 * r0 - D * D) / (2.0 * rho * r0);
            theta1 = kappa <= -1.0 ? kPi : (kappa >= 1.0 ? 0.0 : std::acos(kappa));
        }
        double a = 0.0;
        if (theta1 > 0.0)
        {
            std::vector<double> br = PanelBreaks(0.0, theta1, m_spec.angular_panel / rho);
            for (size_t j = 0; j + 1 < br.size(); ++j)
            {
                double half = 0.5 * (br[j + 1] - br[j]);
                double mid = 0.5 * (br[j + 1] + br[j]);
                for (size_t k = 0; k < ga.nodes.size(); ++k)
                {
                    a += half * ga.weights[k] * (ev.DensityAt(mid + half * ga.nodes[k]) - far);
                }
            }
        }
        if (theta1 < kPi)
        {
            a += (kPi - theta1) * (ev.DensityAt(kPi) - far);
        }
        prof->rho.push_back(rho);
        prof->weight.push_back(radial.weights[i] * rho * 2.0 * a);
    }
    std::lock_guard<std::mutex> lock(m_mutex);
    return m_profiles.emplace(key, prof).first->second;
}

inline double
AnalyticModel::CoverageAt(Access access, Side side, double T, double r0) const
{
    if (T == 0.0)
    {
        return 1.0;
    }
    const double l0 = m_prop.Loss(r0);
    const double tl = T * l0;
    const double p_serving = side == Side::WiFi ? m_params.p_w : m_params.p_l;
    double exponent = m_prop.Mu() * tl * m_params.sigma_n2 / p_serving;
    for (const Component& c : Components(access, side))
    {
        if (!(c.lambda > 0.0))
        {
            continue;
        }
        double rin = c.excluded ? r0 : 0.0;
        double far = c.kind ? HFar(*c.kind) : 1.0;
        double part = far * RadialKernelIntegral(T, l0, c.ratio, rin, m_prop, m_spec);
        if (c.kind)
        {
            auto prof = Profile(*c.kind, r0);
            for (size_t i = 0; i < prof->rho.size(); ++i)
            {
                part += prof->weight[i] * tl / (c.ratio * m_prop.Loss(prof->rho[i]) + tl);
            }
        }
        exponent += c.lambda * part;
    }
    return std::exp(-exponent);
}

} // namespace coex
