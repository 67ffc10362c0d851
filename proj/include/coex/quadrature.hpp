#pragma once

#include "coex/core.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace coex
{

struct QuadratureSpec
{
    double rel_tol = 1e-6;
    double abs_tol = 1e-10;
    /// Hard cap on any truncation radius, meters.
    double r_max = 1e5;
    /// Radial panel width for h-weighted integrals, meters.
    double radial_panel = 12.0;
    /// Angular panel arc length for h-weighted integrals, meters.
    double angular_panel = 16.0;
    /// Gauss-Legendre points per panel of the h grid.
    int radial_points = 4;
    int angular_points = 4;
    /// Panels of the outer serving-distance integral, in u = lambda pi r0^2.
    std::vector<double> serving_panels{0.0, 0.25, 0.75, 1.5, 3.0, 6.0};
    int serving_points = 7;
    /// Fixed Gauss-Legendre order per piece of the pair integral C; 0 selects adaptive.
    int pair_points = 8;
    /// Panel length of the pair integral, meters (radially and along arcs).
    double pair_panel = 20.0;
    /// Serving-distance truncation: nearest-neighbour CDF tail mass.
    double serving_tail = 1e-6;

    void Validate() const
    {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
        {
            throw std::invalid_argument("quadrature tolerances must be > 0");
        }
        if (!(r_max > 0.0) || !(radial_panel > 0.0) || !(angular_panel > 0.0))
        {
            throw std::invalid_argument("quadrature radii and panel widths must be > 0");
        }
        if (radial_points < 1 || angular_points < 1 || serving_points < 1 || radial_points > 20 ||
            angular_points > 20 || serving_points > 20)
        {
            throw std::invalid_argument("quadrature point counts must lie in [1, 20]");
        }
        if (serving_panels.size() < 2 || serving_panels.front() != 0.0 ||
            !std::is_sorted(serving_panels.begin(), serving_panels.end()))
        {
            throw std::invalid_argument("serving_panels must start at 0 and increase");
        }
        if (!(serving_tail > 0.0 && serving_tail < 1.0))
        {
            throw std::invalid_argument("serving_tail must lie in (0, 1)");
        }
    }
};

class QuadratureError : public std::runtime_error
{
  public:
    QuadratureError(const std::string& what, double estimate, double error_bound)
        : std::runtime_error(what + " (estimate " + std::to_string(estimate) + ", error bound " +
                             std::to_string(error_bound) + ")"),
          m_estimate(estimate),
          m_error(error_bound)
    {
    }

    double Estimate() const
    {
        return m_estimate;
    }

    double ErrorBound() const
    {
        return m_error;
    }

  private:
    double m_estimate;
    double m_error;
};

namespace detail
{

/// Ratio between the returned error bound and the requested tolerance that counts as failure.
inline constexpr double kFailureSlack = 100.0;

} // namespace detail

/// Adaptive Gauss-Kronrod on [a, b], b may be +inf. Throws QuadratureError on non-convergence.
template <class F>
double
Integrate(F&& f, double a, double b, const QuadratureSpec& spec, double tol_scale = 1.0)
{
    if (a == b)
    {
        return 0.0;
    }
    double err = 0.0;
    double rel = spec.rel_tol * tol_scale;
    double value =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 12, rel, &err);
    if (!std::isfinite(value) || err > detail::kFailureSlack * std::max(spec.abs_tol, rel * std::abs(value)))
    {
        throw QuadratureError("adaptive quadrature did not converge", value, err);
    }
    return value;
}

/// Sum of Integrate over consecutive sub-intervals given by sorted breakpoints.
template <class F>
double
IntegratePieces(F&& f, std::vector<double> breaks, const QuadratureSpec& spec, double tol_scale = 1.0)
{
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    double sum = 0.0;
    for (size_t i = 0; i + 1 < breaks.size(); ++i)
    {
        sum += Integrate(f, breaks[i], breaks[i + 1], spec, tol_scale);
    }
    return sum;
}

struct GaussRule;
const GaussRule& GaussLegendre(int n);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail
{

template <unsigned N>
GaussRule
ExpandGauss()
{
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    GaussRule rule;
    for (size_t i = 0; i < x.size(); ++i)
    {
        if (x[i] == 0.0)
        {
            rule.nodes.push_back(0.0);
            rule.weights.push_back(w[i]);
        }
        else
        {
            rule.nodes.push_back(-x[i]);
            rule.weights.push_back(w[i]);
            rule.nodes.push_back(x[i]);
            rule.weights.push_back(w[i]);
        }
    }
    return rule;
}

template <unsigned... Ns>
std::array<GaussRule, sizeof...(Ns)>
MakeGaussTable(std::integer_sequence<unsigned, Ns...>)
{
    return {ExpandGauss<Ns + 1>()...};
}

} // namespace detail

/// Gauss-Legendre rule with n points, 1 <= n <= 20.
inline const GaussRule&
GaussLegendre(int n)
{
    static const auto table = detail::MakeGaussTable(std::make_integer_sequence<unsigned, 20>{});
    if (n < 1 || n > 20)
    {
        throw std::invalid_argument("GaussLegendre supports 1..20 points");
    }
    return table[n - 1];
}

/// Fixed-order Gauss-Legendre sum over consecutive sub-intervals.
template <class F>
double
GaussPieces(F&& f, std::vector<double> breaks, int points)
{
    std::sort(breaks.begin(), breaks.end());
    const GaussRule& g = GaussLegendre(points);
    double sum = 0.0;
    for (size_t i = 0; i + 1 < breaks.size(); ++i)
    {
        double half = 0.5 * (breaks[i + 1] - breaks[i]);
        if (!(half > 0.0))
        {
            continue;
        }
        double mid = 0.5 * (breaks[i + 1] + breaks[i]);
        double part = 0.0;
        for (size_t k = 0; k < g.nodes.size(); ++k)
        {
            part += g.weights[k] * f(mid + half * g.nodes[k]);
        }
        sum += half * part;
    }
    return sum;
}

/// Composite Gauss-Legendre nodes over consecutive panels.
struct CompositeRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline CompositeRule
MakeCompositeRule(const std::vector<double>& breaks, int points)
{
    const GaussRule& g = GaussLegendre(points);
    CompositeRule out;
    for (size_t i = 0; i + 1 < breaks.size(); ++i)
    {
        double a = breaks[i];
        double b = breaks[i + 1];
        if (!(b > a))
        {
            continue;
        }
        double half = 0.5 * (b - a);
        double mid = 0.5 * (a + b);
        for (size_t k = 0; k < g.nodes.size(); ++k)
        {
            out.nodes.push_back(mid + half * g.nodes[k]);
            out.weights.push_back(half * g.weights[k]);
        }
    }
    return out;
}

/// Breakpoints splitting [a, b] into panels no wider than width, keeping the extra cuts.
inline std::vector<double>
PanelBreaks(double a, double b, double width, std::vector<double> cuts = {})
{
    std::vector<double> pts{a, b};
    for (double c : cuts)
    {
        if (c > a && c < b)
        {
            pts.push_back(c);
        }
    }
    std::sort(pts.begin(), pts.end());
    std::vector<double> out{pts.front()};
    for (size_t i = 0; i + 1 < pts.size(); ++i)
    {
        double lo = pts[i];
        double hi = pts[i + 1];
        if (!(hi > lo))
        {
            continue;
        }
        int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / width - 1e-12)));
        for (int k = 1; k <= n; ++k)
        {
            out.push_back(lo + (hi - lo) * k / n);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scalar helpers M, V, U

/// (1 - e^{-x}) / x with its limit 1 at x = 0.
inline double
PhiMap(double x)
{
    if (std::abs(x) < 1e-8)
    {
        return 1.0 - 0.5 * x + x * x / 6.0;
    }
    return -std::expm1(-x) / x;
}

/// J_k(x) = int_0^1 t^k e^{-t x} dt.
inline double
MomentExp(int k, double x)
{
    if (x > 40.0)
    {
        // Upward recurrence is stable for large x.
        double j = PhiMap(x);
        double ex = std::exp(-x);
        for (int m = 1; m <= k; ++m)
        {
            j = (m * j - ex) / x;
        }
        return j;
    }
    const GaussRule& g = GaussLegendre(20);
    double sum = 0.0;
    for (size_t i = 0; i < g.nodes.size(); ++i)
    {
        double t = 0.5 * (g.nodes[i] + 1.0);
        sum += g.weights[i] * std::pow(t, k) * std::exp(-t * x);
    }
    return 0.5 * sum;
}

/// M(N1, N2, N3) = [phi(N1) - phi(N1 + N2 - N3)] / (N2 - N3).
inline double
FuncM(double n1, double n2, double n3)
{
    double delta = n2 - n3;
    if (std::abs(delta) < 1e-3)
    {
        // Taylor series of the divided difference about N1.
        double sum = 0.0;
        double dpow = 1.0;
        double fact = 1.0;
        for (int k = 1; k <= 5; ++k)
        {
            fact *= k;
            double sign = (k % 2 == 1) ? 1.0 : -1.0;
            sum += sign * MomentExp(k, n1) * dpow / fact;
            dpow *= delta;
        }
        return sum;
    }
    return (PhiMap(n1) - PhiMap(n1 + delta)) / delta;
}

/// V(x, s1, s2, N1, N2, N3).
inline double
FuncV(double dist, double s1, double s2, double n1, double n2, double n3, const Propagation& prop)
{
    double l = prop.Loss(dist);
    double a1 = -std::expm1(-prop.Mu() * s1 * l);
    double a2 = -std::expm1(-prop.Mu() * s2 * l);
    return a1 * FuncM(n1, n2, n3) + a2 * FuncM(n2, n1, n3);
}

inline double
FuncV(const Point2& x, double s1, double s2, double n1, double n2, double n3, const CoexParams& params)
{
    return FuncV(x.Norm(), s1, s2, n1, n2, n3, Propagation(params));
}

/// U(x, s, N1) = phi(N1) - e^{-mu s l(|x|)} J_1(N1).
inline double
FuncU(double dist, double s, double n1, const Propagation& prop)
{
    double e = std::exp(-prop.Mu() * s * prop.Loss(dist));
    return PhiMap(n1) - e * MomentExp(1, n1);
}

inline double
FuncU(const Point2& x, double s, double n1, const CoexParams& params)
{
    return FuncU(x.Norm(), s, n1, Propagation(params));
}

// ---------------------------------------------------------------------------
// Table II integrals

namespace detail
{

/// Angular measure of {phi : |c + rho e(phi)| >= R} where |c| = cn.
inline double
OutsideArc(double rho, double cn, double R)
{
    if (R <= 0.0)
    {
        return 2.0 * kPi;
    }
    if (cn <= 0.0 || rho <= 0.0)
    {
        return (std::max(cn, rho) >= R) ? 2.0 * kPi : 0.0;
    }
    double kappa = (R * R - cn * cn - rho * rho) / (2.0 * cn * rho);
    return 2.0 * std::acos(std::clamp(kappa, -1.0, 1.0));
}

} // namespace detail

/// N(y, r): lambda * int_{|x| >= r} exp(-mu s l(|x - y|)) dx, with s = gamma / power.
inline double
NFuncRatio(double y_norm, double r, double s, double lambda, const Propagation& prop, const QuadratureSpec& spec)
{
    if (!(lambda > 0.0))
    {
        return 0.0;
    }
    if (!(s >= 0.0))
    {
        throw std::invalid_argument("NFunc: sensing ratio must be >= 0");
    }
    double rmax = std::min(prop.SensingRadius(s, spec.abs_tol * 1e-2), spec.r_max);
    if (s == 0.0)
    {
        throw std::invalid_argument("NFunc: zero threshold gives an infinite count");
    }
    double lo = 0.0;
    if (r > 0.0 && y_norm < r)
    {
        lo = r - y_norm;
    }
    if (lo >= rmax)
    {
        return 0.0;
    }
    auto f = [&](double rho) {
        return rho * prop.NotSensed(s, rho) * detail::OutsideArc(rho, y_norm, r);
    };
    std::vector<double> breaks{lo, rmax};
    for (double c : {1.0, std::abs(r - y_norm), r + y_norm})
    {
        if (c > lo && c < rmax)
        {
            breaks.push_back(c);
        }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    double sum = 0.0;
    for (size_t i = 0; i + 1 < breaks.size(); ++i)
    {
        double a = breaks[i];
        double w = breaks[i + 1] - a;
        if (r > 0.0 && y_norm > 0.0 && a < r + y_norm)
        {
            // Square-root kinks of the arc length at |r - y| and r + y.
            auto mapped = [&](double t) {
                return f(a + 0.5 * w * (1.0 - std::cos(kPi * t))) * 0.5 * w * kPi * std::sin(kPi * t);
            };
            sum += Integrate(mapped, 0.0, 1.0, spec);
        }
        else
        {
            sum += Integrate(f, a, a + w, spec);
        }
    }
    return lambda * sum;
}

inline double
NFunc(const Point2& y, double r, double gamma, double lambda, double power, const CoexParams& params,
      const QuadratureSpec& spec)
{
    if (r < 0.0 || gamma < 0.0 || lambda < 0.0 || !(power > 0.0))
    {
        throw std::invalid_argument("NFunc: bad arguments");
    }
    if (lambda == 0.0)
    {
        return 0.0;
    }
    if (std::isinf(gamma))
    {
        return 0.0;
    }
    return NFuncRatio(y.Norm(), r, gamma / power, lambda, Propagation(params), spec);
}

/// C: lambda * int_{|x| >= R} exp(-mu s1 l(|x - y1|) - mu s2 l(|x - y2|)) dx.
inline double
CFuncRatio(const Point2& y1, double s1, const Point2& y2, double s2, double R, double lambda,
           const Propagation& prop, const QuadratureSpec& spec)
{
    const int pair_points = spec.pair_points;
    if (!(lambda > 0.0) || std::isinf(s1) || std::isinf(s2))
    {
        return 0.0;
    }
    double eps = spec.abs_tol * 1e-2;
    // Centre the polar frame on the narrower factor.
    bool first = s1 >= s2;
    Point2 c = first ? y1 : y2;
    Point2 o = first ? y2 : y1;
    double sc = first ? s1 : s2;
    double so = first ? s2 : s1;
    double dc = std::min(prop.SensingRadius(sc, eps), spec.r_max);
    double dout = std::min(prop.SensingRadius(so, eps), spec.r_max);
    Point2 co = o - c;
    double D = co.Norm();
    if (D > dc + dout)
    {
        return 0.0;
    }
    double cn = c.Norm();
    double phic = std::atan2(c.y, c.x);
    double phio = std::atan2(co.y, co.x);
    double rlo = std::max(0.0, D - dout);
    double rhi = std::min(dc, D + dout);
    if (R > 0.0 && cn < R)
    {
        rlo = std::max(rlo, R - cn);
    }
    if (!(rhi > rlo))
    {
        return 0.0;
    }
    const double mu = prop.Mu();
    auto inner = [&](double rho) -> double {
        if (rho <= 0.0)
        {
            return 0.0;
        }
        double gc = std::exp(-mu * sc * prop.Loss(rho));
        if (gc == 0.0)
        {
            return 0.0;
        }
        // Arc of the circle outside the exclusion ball, centred on phic with half-width beta.
        double beta = detail::OutsideArc(rho, cn, R) / 2.0;
        if (beta <= 0.0)
        {
            return 0.0;
        }
        // Arc within reach of the second factor, centred on phio with half-width gam.
        double gam = kPi;
        if (D > 0.0)
        {
            double k2 = (rho * rho + D * D - dout * dout) / (2.0 * rho * D);
            if (k2 >= 1.0)
            {
                return 0.0;
            }
            gam = std::acos(std::max(k2, -1.0));
        }
        auto g = [&](double phi) {
            double px = rho * std::cos(phi) - co.x;
            double py = rho * std::sin(phi) - co.y;
            return std::exp(-mu * so * prop.LossSq(px * px + py * py));
        };
        double base = (cn > 0.0) ? phic : 0.0;
        double a0 = base - beta;
        double a1 = base + beta;
        double b0 = phio - gam;
        double b1 = phio + gam;
        double sum = 0.0;
        bool full_a = beta >= kPi;
        for (int k = -1; k <= 1; ++k)
        {
            double lo = full_a ? b0 : std::max(a0 + 2.0 * kPi * k, b0);
            double hi = full_a ? b1 : std::min(a1 + 2.0 * kPi * k, b1);
            if (full_a && k != 0)
            {
                continue;
            }
            if (!(hi > lo))
            {
                continue;
            }
            std::vector<double> br{lo};
            if (phio > lo && phio < hi)
            {
                br.push_back(phio);
            }
            br.push_back(hi);
            if (pair_points > 0)
            {
                for (size_t j = 0; j + 1 < br.size(); ++j)
                {
                    sum += GaussPieces(g, PanelBreaks(br[j], br[j + 1], spec.pair_panel / rho), pair_points);
                }
            }
            else
            {
                sum += IntegratePieces(g, br, spec, 0.1);
            }
        }
        return rho * gc * sum;
    };
    std::vector<double> breaks{rlo, rhi};
    for (double v : {1.0, std::abs(R - cn), R + cn, D})
    {
        if (v > rlo && v < rhi)
        {
            breaks.push_back(v);
        }
    }
    if (pair_points > 0)
    {
        // The arc length has square-root kinks at the exclusion breakpoints; panels touching
        // them use a cosine map.
        std::vector<double> kinks;
        if (R > 0.0)
        {
            kinks = {std::abs(R - cn), R + cn};
        }
        auto is_kink = [&](double v) {
            for (double k : kinks)
            {
                if (std::abs(v - k) < 1e-9 * (1.0 + k))
                {
                    return true;
                }
            }
            return false;
        };
        std::sort(breaks.begin(), breaks.end());
        double sum = 0.0;
        for (size_t i = 0; i + 1 < breaks.size(); ++i)
        {
            std::vector<double> panels = PanelBreaks(breaks[i], breaks[i + 1], spec.pair_panel);
            for (size_t j = 0; j + 1 < panels.size(); ++j)
            {
                double a = panels[j];
                double b = panels[j + 1];
                bool ka = j == 0 && is_kink(a);
                bool kb = j + 2 == panels.size() && is_kink(b);
                if (!ka && !kb)
                {
                    sum += GaussPieces(inner, {a, b}, pair_points);
                    continue;
                }
                double w = b - a;
                auto mapped = [&](double t) {
                    double rho = a + 0.5 * w * (1.0 - std::cos(kPi * t));
                    return inner(rho) * 0.5 * w * kPi * std::sin(kPi * t);
                };
                sum += GaussPieces(mapped, {0.0, 1.0}, pair_points);
            }
        }
        return lambda * sum;
    }
    return lambda * IntegratePieces(inner, breaks, spec);
}

/// C with the exclusion ball B(0, |y2|) of the frame the arguments are expressed in.
inline double
CFunc(const Point2& y1, double gamma1, const Point2& y2, double gamma2, double lambda, double power,
      const CoexParams& params, const QuadratureSpec& spec)
{
    if (gamma1 < 0.0 || gamma2 < 0.0 || lambda < 0.0 || !(power > 0.0))
    {
        throw std::invalid_argument("CFunc: bad arguments");
    }
    return CFuncRatio(y1, gamma1 / power, y2, gamma2 / power, y2.Norm(), lambda, Propagation(params), spec);
}

// ---------------------------------------------------------------------------
// Interference functionals

/// int_{|x| >= R} T l0 / (ratio l(|x|) + T l0) dx.
inline double
RadialKernelIntegral(double T, double l0, double ratio, double R, const Propagation& prop,
                     const QuadratureSpec& spec)
{
    if (T <= 0.0)
    {
        return 0.0;
    }
    double tl = T * l0;
    auto f = [&](double rho) { return 2.0 * kPi * rho * tl / (ratio * prop.Loss(rho) + tl); };
    double sum = 0.0;
    double start = R;
    if (R < 1.0)
    {
        sum += kPi * (1.0 - R * R) * tl / (ratio * prop.K() + tl);
        start = 1.0;
    }
    // Split at the knee of the kernel so the tail is smooth.
    double knee = std::pow(tl / (ratio * prop.K()), 1.0 / prop.Alpha());
    if (knee > start)
    {
        sum += Integrate(f, start, knee, spec);
        start = knee;
    }
    sum += Integrate(f, start, std::numeric_limits<double>::infinity(), spec);
    return sum;
}

/// Kernel of an interference Laplace exponent.
struct InterferenceKernel
{
    double T = 0.0;
    /// l(r0) of the serving link.
    double l_serving = 1.0;
    /// Serving power over interferer power.
    double power_ratio = 1.0;
    double lambda = 0.0;
    /// Retention probability h(x); empty means h = 1.
    std::function<double(const Point2&)> h;
    /// Value of h far from the origin.
    double h_far = 1.0;
    /// Radius beyond which h equals h_far to working precision.
    double h_support = 0.0;
};

/// lambda * int_{|x| >= R} T l0 h(x) / (ratio l(|x|) + T l0) dx.
inline double
LaplaceInterferenceIntegral(const InterferenceKernel& k, double exclusion_radius, const CoexParams& params,
                            const QuadratureSpec& spec)
{
    if (k.T < 0.0)
    {
        throw std::invalid_argument("LaplaceInterferenceIntegral: T must be >= 0");
    }
    if (k.T == 0.0 || k.lambda == 0.0)
    {
        return 0.0;
    }
    Propagation prop(params);
    double tl = k.T * k.l_serving;
    double far = k.h ? k.h_far : 1.0;
    double total = far * RadialKernelIntegral(k.T, k.l_serving, k.power_ratio, exclusion_radius, prop, spec);
    if (k.h && k.h_support > exclusion_radius)
    {
        auto ring = [&](double rho) {
            auto g = [&](double th) { return k.h(Point2{rho * std::cos(th), rho * std::sin(th)}) - far; };
            double a = Integrate(g, 0.0, 2.0 * kPi, spec, 0.1);
            return rho * a * tl / (k.power_ratio * prop.Loss(rho) + tl);
        };
        total += Integrate(ring, exclusion_radius, k.h_support, spec);
    }
    return k.lambda * total;
}

} // namespace coex
