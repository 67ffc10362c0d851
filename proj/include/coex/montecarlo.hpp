#pragma once

#include "coex/analytic.hpp"
#include "coex/core.hpp"
#include "coex/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace coex
{

struct SimConfig
{
    double side = 1000.0;
    double guard = 500.0;
    int n_ap_realizations = 50;
    int n_enb_realizations = 50;
    int n_probes = 50;
    uint64_t seed = 1;
    /// Tile edge of the point generator, meters.
    double tile = 100.0;
    /// Sensing probability below which a neighbour is never checked.
    double contention_eps = 1e-12;
    /// Energy detection on the summed LTE power instead of the strongest eNB.
    bool total_energy_detection = false;
    int jobs = 1;

    double HalfExtent() const
    {
        return 0.5 * side + guard;
    }

    void Validate() const
    {
        if (!(side > 0.0) || !(guard >= 0.0) || !(tile > 0.0))
        {
            throw std::invalid_argument("sim: side and tile must be > 0, guard >= 0");
        }
        if (n_ap_realizations < 1 || n_enb_realizations < 1 || n_probes < 1)
        {
            throw std::invalid_argument("sim: realization and probe counts must be >= 1");
        }
        if (!(contention_eps > 0.0 && contention_eps < 1.0))
        {
            throw std::invalid_argument("sim: contention_eps must lie in (0, 1)");
        }
        if (jobs < 1)
        {
            throw std::invalid_argument("sim: jobs must be >= 1");
        }
    }
};

struct NodeSet
{
    std::vector<double> x;
    std::vector<double> y;
    std::vector<uint64_t> id;

    size_t Size() const
    {
        return x.size();
    }

    void Add(double px, double py, uint64_t pid)
    {
        x.push_back(px);
        y.push_back(py);
        id.push_back(pid);
    }
};

/// Homogeneous PPP on [-E, E]^2 built from independently seeded tiles, so a larger
/// window reproduces the points of a smaller one.
inline NodeSet
SamplePpp(double lambda, double half_extent, double tile, uint64_t key)
{
    NodeSet out;
    if (!(lambda > 0.0))
    {
        return out;
    }
    const int lo = static_cast<int>(std::floor(-half_extent / tile));
    const int hi = static_cast<int>(std::ceil(half_extent / tile));
    for (int ix = lo; ix < hi; ++ix)
    {
        for (int iy = lo; iy < hi; ++iy)
        {
            uint64_t tkey = HashKey({key, static_cast<uint64_t>(ix), static_cast<uint64_t>(iy)});
            StreamRng rng(tkey);
            std::poisson_distribution<long> count(lambda * tile * tile);
            long n = count(rng);
            for (long k = 0; k < n; ++k)
            {
                double px = (ix + rng.Uniform()) * tile;
                double py = (iy + rng.Uniform()) * tile;
                if (std::abs(px) <= half_extent && std::abs(py) <= half_extent)
                {
                    out.Add(px, py, HashKey({tkey, static_cast<uint64_t>(k)}));
                }
            }
        }
    }
    return out;
}

/// Uniform grid over a node set for fixed-radius neighbour queries.
class CellIndex
{
  public:
    CellIndex(const NodeSet& nodes, double cell, double half_extent)
        : m_cell(cell),
          m_origin(-half_extent)
    {
        m_n = std::max(1, static_cast<int>(std::ceil(2.0 * half_extent / cell)));
        m_start.assign(static_cast<size_t>(m_n) * m_n + 1, 0);
        std::vector<int> cellof(nodes.Size());
        for (size_t i = 0; i < nodes.Size(); ++i)
        {
            cellof[i] = CellOf(nodes.x[i], nodes.y[i]);
            ++m_start[cellof[i] + 1];
        }
        for (size_t c = 1; c < m_start.size(); ++c)
        {
            m_start[c] += m_start[c - 1];
        }
        m_items.resize(nodes.Size());
        std::vector<int> fill(m_start.begin(), m_start.end() - 1);
        for (size_t i = 0; i < nodes.Size(); ++i)
        {
            m_items[fill[cellof[i]]++] = static_cast<int>(i);
        }
    }

    /// Calls f(j) for every node j in cells overlapping the disc; caller filters by distance.
    template <class F>
    void ForEachCandidate(double x, double y, double r, F&& f) const
    {
        int cx0 = Clamp(static_cast<int>(std::floor((x - r - m_origin) / m_cell)));
        int cx1 = Clamp(static_cast<int>(std::floor((x + r - m_origin) / m_cell)));
        int cy0 = Clamp(static_cast<int>(std::floor((y - r - m_origin) / m_cell)));
        int cy1 = Clamp(static_cast<int>(std::floor((y + r - m_origin) / m_cell)));
        for (int cx = cx0; cx <= cx1; ++cx)
        {
            for (int cy = cy0; cy <= cy1; ++cy)
            {
                int c = cx * m_n + cy;
                for (int k = m_start[c]; k < m_start[c + 1]; ++k)
                {
                    if (!f(m_items[k]))
                    {
                        return;
                    }
                }
            }
        }
    }

  private:
    int Clamp(int c) const
    {
        return std::clamp(c, 0, m_n - 1);
    }

    int CellOf(double x, double y) const
    {
        return Clamp(static_cast<int>(std::floor((x - m_origin) / m_cell))) * m_n +
               Clamp(static_cast<int>(std::floor((y - m_origin) / m_cell)));
    }

    double m_cell;
    double m_origin;
    int m_n = 1;
    std::vector<int> m_start;
    std::vector<int> m_items;
};

/// One sampled network with its medium access state.
struct Realization
{
    NodeSet aps;
    NodeSet enbs;
    std::vector<double> ap_timer;
    std::vector<double> enb_timer;
    /// Duty-cycle on/off state; all ones outside asynchronous duty cycling.
    std::vector<char> enb_active;
    std::vector<char> e_w;
    std::vector<char> e_l;
    uint64_t mac_key = 0;
};

enum class MacRule
{
    Continuous,
    Lbt,
};

inline MacRule
MacRuleOf(const Scenario& s)
{
    if (s.IsLbt() || s.kind == ScenarioKind::WifiWifiBaseline)
    {
        return MacRule::Lbt;
    }
    return MacRule::Continuous;
}

/// Samples both point processes, timers and duty flags. params must already carry the scenario.
inline Realization
SampleRealization(const Scenario& scenario, const CoexParams& params, const SimConfig& sim, int ap_index,
                  int enb_index)
{
    Realization r;
    const double E = sim.HalfExtent();
    r.aps = SamplePpp(params.lambda_w, E, sim.tile,
                      HashKey({sim.seed, stream::kApPoints, static_cast<uint64_t>(ap_index)}));
    r.enbs = SamplePpp(params.lambda_l, E, sim.tile,
                       HashKey({sim.seed, stream::kEnbPoints, static_cast<uint64_t>(enb_index)}));
    r.mac_key = HashKey({sim.seed, stream::kMac, static_cast<uint64_t>(ap_index), static_cast<uint64_t>(enb_index)});
    r.ap_timer.resize(r.aps.Size());
    for (size_t i = 0; i < r.aps.Size(); ++i)
    {
        r.ap_timer[i] = HashUniform(HashKey({r.mac_key, stream::kTimer, r.aps.id[i]}));
    }
    const BackoffWindow w = params.backoff_window;
    r.enb_timer.resize(r.enbs.Size());
    r.enb_active.assign(r.enbs.Size(), 1);
    for (size_t k = 0; k < r.enbs.Size(); ++k)
    {
        r.enb_timer[k] = w.a + (w.b - w.a) * HashUniform(HashKey({r.mac_key, stream::kTimer, r.enbs.id[k]}));
        if (scenario.kind == ScenarioKind::DutyCycleAsync)
        {
            r.enb_active[k] = HashUniform(HashKey({r.mac_key, stream::kDuty, r.enbs.id[k]})) < params.eta;
        }
    }
    return r;
}

namespace detail
{

/// Shared sensing test: does transmitter j (power pj) trigger node i's threshold gamma_i?
struct Sensing
{
    const Propagation& prop;
    uint64_t key;
    double mu;

    bool operator()(uint64_t id_j, uint64_t id_i, double pj, double d2, double gamma_i) const
    {
        double g = HashExponential(HashKey({key, stream::kPairFading, id_j, id_i}), mu);
        return pj * g > gamma_i * prop.LossSq(d2);
    }

    double Gain(uint64_t id_j, uint64_t id_i) const
    {
        return HashExponential(HashKey({key, stream::kPairFading, id_j, id_i}), mu);
    }
};

} // namespace detail

/// Fills e_w and e_l. enbs_on = false mutes every eNB (off phase of synchronous duty cycling).
inline void
ApplyMac(Realization& r, const CoexParams& params, MacRule rule, const SimConfig& sim, bool enbs_on = true)
{
    Propagation prop(params);
    const double eps = sim.contention_eps;
    const double E = sim.HalfExtent();
    const double sWW = params.gamma_cs / params.p_w;
    const double sWL = params.gamma_ed / params.p_l;
    const double sLW = params.gamma_l / params.p_w;
    const double sLL = params.gamma_l / params.p_l;
    const double rWW = prop.SensingRadius(sWW, eps);
    const double rWL = prop.SensingRadius(sWL, eps);
    const double rLW = prop.SensingRadius(sLW, eps);
    const double rLL = prop.SensingRadius(sLL, eps);
    const double cell = std::max({rWW, rWL, rLW, rLL, 1.0});
    detail::Sensing sensed{prop, r.mac_key, params.mu};

    std::vector<char> on(r.enbs.Size());
    for (size_t k = 0; k < r.enbs.Size(); ++k)
    {
        on[k] = enbs_on && r.enb_active[k];
    }
    CellIndex ap_index(r.aps, cell, E);
    CellIndex enb_index(r.enbs, cell, E);

    r.e_w.assign(r.aps.Size(), 1);
    r.e_l.assign(r.enbs.Size(), 0);
    for (size_t i = 0; i < r.aps.Size(); ++i)
    {
        const double xi = r.aps.x[i];
        const double yi = r.aps.y[i];
        const double ti = r.ap_timer[i];
        bool free = true;
        ap_index.ForEachCandidate(xi, yi, rWW, [&](int j) {
            if (static_cast<size_t>(j) == i || r.ap_timer[j] >= ti)
            {
                return true;
            }
            double dx = r.aps.x[j] - xi;
            double dy = r.aps.y[j] - yi;
            double d2 = dx * dx + dy * dy;
            if (d2 <= rWW * rWW && sensed(r.aps.id[j], r.aps.id[i], params.p_w, d2, params.gamma_cs))
            {
                free = false;
            }
            return free;
        });
        if (free && rule == MacRule::Continuous && sim.total_energy_detection)
        {
            double total = 0.0;
            for (size_t k = 0; k < r.enbs.Size(); ++k)
            {
                if (!on[k])
                {
                    continue;
                }
                double dx = r.enbs.x[k] - xi;
                double dy = r.enbs.y[k] - yi;
                total += params.p_l * sensed.Gain(r.enbs.id[k], r.aps.id[i]) / prop.LossSq(dx * dx + dy * dy);
            }
            free = total <= params.gamma_ed;
        }
        else if (free)
        {
            enb_index.ForEachCandidate(xi, yi, rWL, [&](int k) {
                if (!on[k] || (rule == MacRule::Lbt && r.enb_timer[k] >= ti))
                {
                    return true;
                }
                double dx = r.enbs.x[k] - xi;
                double dy = r.enbs.y[k] - yi;
                double d2 = dx * dx + dy * dy;
                if (d2 <= rWL * rWL && sensed(r.enbs.id[k], r.aps.id[i], params.p_l, d2, params.gamma_ed))
                {
                    free = false;
                }
                return free;
            });
        }
        r.e_w[i] = free;
    }
    for (size_t k = 0; k < r.enbs.Size(); ++k)
    {
        if (!on[k])
        {
            continue;
        }
        if (rule == MacRule::Continuous)
        {
            r.e_l[k] = 1;
            continue;
        }
        const double xk = r.enbs.x[k];
        const double yk = r.enbs.y[k];
        const double tk = r.enb_timer[k];
        bool free = true;
        ap_index.ForEachCandidate(xk, yk, rLW, [&](int j) {
            if (r.ap_timer[j] >= tk)
            {
                return true;
            }
            double dx = r.aps.x[j] - xk;
            double dy = r.aps.y[j] - yk;
            double d2 = dx * dx + dy * dy;
            if (d2 <= rLW * rLW && sensed(r.aps.id[j], r.enbs.id[k], params.p_w, d2, params.gamma_l))
            {
                free = false;
            }
            return free;
        });
        if (free)
        {
            enb_index.ForEachCandidate(xk, yk, rLL, [&](int j) {
                if (static_cast<size_t>(j) == k || !on[j] || r.enb_timer[j] >= tk)
                {
                    return true;
                }
                double dx = r.enbs.x[j] - xk;
                double dy = r.enbs.y[j] - yk;
                double d2 = dx * dx + dy * dy;
                if (d2 <= rLL * rLL && sensed(r.enbs.id[j], r.enbs.id[k], params.p_l, d2, params.gamma_l))
                {
                    free = false;
                }
                return free;
            });
        }
        r.e_l[k] = free;
    }
}

/// Lower-priority LBT in its reduced form: APs contend among themselves only, an eNB
/// defers to any AP it senses. Used to cross-check ApplyMac with a (1,2) window.
inline void
ApplyMacLbtLowerReduced(Realization& r, const CoexParams& params)
{
    Propagation prop(params);
    detail::Sensing sensed{prop, r.mac_key, params.mu};
    auto d2 = [](double ax, double ay, double bx, double by) {
        return (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
    };
    r.e_w.assign(r.aps.Size(), 1);
    r.e_l.assign(r.enbs.Size(), 1);
    for (size_t i = 0; i < r.aps.Size(); ++i)
    {
        for (size_t j = 0; j < r.aps.Size() && r.e_w[i]; ++j)
        {
            if (j != i && r.ap_timer[j] < r.ap_timer[i] &&
                sensed(r.aps.id[j], r.aps.id[i], params.p_w, d2(r.aps.x[i], r.aps.y[i], r.aps.x[j], r.aps.y[j]),
                       params.gamma_cs))
            {
                r.e_w[i] = 0;
            }
        }
    }
    for (size_t k = 0; k < r.enbs.Size(); ++k)
    {
        for (size_t j = 0; j < r.aps.Size() && r.e_l[k]; ++j)
        {
            if (sensed(r.aps.id[j], r.enbs.id[k], params.p_w,
                       d2(r.enbs.x[k], r.enbs.y[k], r.aps.x[j], r.aps.y[j]), params.gamma_l))
            {
                r.e_l[k] = 0;
            }
        }
        for (size_t j = 0; j < r.enbs.Size() && r.e_l[k]; ++j)
        {
            if (j != k && r.enb_timer[j] < r.enb_timer[k] &&
                sensed(r.enbs.id[j], r.enbs.id[k], params.p_l,
                       d2(r.enbs.x[k], r.enbs.y[k], r.enbs.x[j], r.enbs.y[j]), params.gamma_l))
            {
                r.e_l[k] = 0;
            }
        }
    }
}

/// Number of ordered AP pairs that both transmit although the later one senses the earlier one.
inline size_t
CountContentionViolations(const Realization& r, const CoexParams& params)
{
    Propagation prop(params);
    detail::Sensing sensed{prop, r.mac_key, params.mu};
    size_t bad = 0;
    for (size_t i = 0; i < r.aps.Size(); ++i)
    {
        if (!r.e_w[i])
        {
            continue;
        }
        for (size_t j = 0; j < r.aps.Size(); ++j)
        {
            if (j == i || !r.e_w[j] || r.ap_timer[j] >= r.ap_timer[i])
            {
                continue;
            }
            double dx = r.aps.x[j] - r.aps.x[i];
            double dy = r.aps.y[j] - r.aps.y[i];
            if (sensed(r.aps.id[j], r.aps.id[i], params.p_w, dx * dx + dy * dy, params.gamma_cs))
            {
                ++bad;
            }
        }
    }
    return bad;
}

/// Per-side sample store of one engine run.
struct SideTally
{
    uint64_t probes = 0;
    uint64_t served = 0;
    uint64_t nodes = 0;
    uint64_t nodes_on = 0;
    std::vector<double> sinr;

    void Merge(const SideTally& o)
    {
        probes += o.probes;
        served += o.served;
        nodes += o.nodes;
        nodes_on += o.nodes_on;
        sinr.insert(sinr.end(), o.sinr.begin(), o.sinr.end());
    }

    /// Number of served probes with SINR strictly above T; requires sorted samples.
    uint64_t Above(double T) const
    {
        return static_cast<uint64_t>(sinr.end() - std::upper_bound(sinr.begin(), sinr.end(), T));
    }
};

/// Probes uniform in the inner window, associated with the nearest AP and nearest eNB.
inline void
EvaluateProbes(const Realization& r, const CoexParams& params, const SimConfig& sim, bool lte_side, SideTally& wifi,
               SideTally& lte)
{
    Propagation prop(params);
    const double half = 0.5 * sim.side;
    for (size_t i = 0; i < r.aps.Size(); ++i)
    {
        if (std::abs(r.aps.x[i]) <= half && std::abs(r.aps.y[i]) <= half)
        {
            ++wifi.nodes;
            wifi.nodes_on += r.e_w[i];
        }
    }
    if (lte_side)
    {
        for (size_t k = 0; k < r.enbs.Size(); ++k)
        {
            if (std::abs(r.enbs.x[k]) <= half && std::abs(r.enbs.y[k]) <= half)
            {
                ++lte.nodes;
                lte.nodes_on += r.e_l[k];
            }
        }
    }
    StreamRng rng(HashKey({r.mac_key, stream::kProbes}));
    const double mu = params.mu;
    for (int p = 0; p < sim.n_probes; ++p)
    {
        const double px = (2.0 * rng.Uniform() - 1.0) * half;
        const double py = (2.0 * rng.Uniform() - 1.0) * half;
        const uint64_t pkey = HashKey({r.mac_key, stream::kProbeFading, static_cast<uint64_t>(p)});
        auto nearest = [&](const NodeSet& s) {
            long best = -1;
            double bd = std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < s.Size(); ++j)
            {
                double dx = s.x[j] - px;
                double dy = s.y[j] - py;
                double d2 = dx * dx + dy * dy;
                if (d2 < bd)
                {
                    bd = d2;
                    best = static_cast<long>(j);
                }
            }
            return best;
        };
        const long tw = nearest(r.aps);
        const long tl = lte_side ? nearest(r.enbs) : -1;
        auto rx = [&](const NodeSet& s, size_t j, double power) {
            double dx = s.x[j] - px;
            double dy = s.y[j] - py;
            double f = HashExponential(HashKey({pkey, s.id[j]}), mu);
            return power * f / prop.LossSq(dx * dx + dy * dy);
        };
        const bool need_w = tw >= 0 && r.e_w[tw];
        const bool need_l = tl >= 0 && r.e_l[tl];
        if (tw >= 0)
        {
            ++wifi.probes;
        }
        if (tl >= 0)
        {
            ++lte.probes;
        }
        if (!need_w && !need_l)
        {
            continue;
        }
        double rest = 0.0;
        double s_w = 0.0;
        double s_l = 0.0;
        for (size_t j = 0; j < r.aps.Size(); ++j)
        {
            if (!r.e_w[j])
            {
                continue;
            }
            double v = rx(r.aps, j, params.p_w);
            if (static_cast<long>(j) == tw)
            {
                s_w = v;
            }
            else
            {
                rest += v;
            }
        }
        for (size_t k = 0; k < r.enbs.Size(); ++k)
        {
            if (!r.e_l[k])
            {
                continue;
            }
            double v = rx(r.enbs, k, params.p_l);
            if (static_cast<long>(k) == tl)
            {
                s_l = v;
            }
            else
            {
                rest += v;
            }
        }
        if (need_w)
        {
            ++wifi.served;
            wifi.sinr.push_back(s_w / (rest + s_l + params.sigma_n2));
        }
        if (need_l)
        {
            ++lte.served;
            lte.sinr.push_back(s_l / (rest + s_w + params.sigma_n2));
        }
    }
}

/// Result of one Monte Carlo run. Synchronous duty cycling keeps both phases.
struct SimResult
{
    Scenario scenario;
    CoexParams params;
    SimConfig sim;
    SideTally wifi_on;
    SideTally wifi_off;
    SideTally lte;
    bool two_phase = false;
};

inline SimResult
RunSimulation(const Scenario& scenario, const CoexParams& base, const SimConfig& sim)
{
    sim.Validate();
    const CoexParams params = scenario.Apply(base);
    const MacRule rule = MacRuleOf(scenario);
    const bool lte_side = scenario.HasSecondSide();
    const bool sync = scenario.kind == ScenarioKind::DutyCycleSync;
    struct Partial
    {
        SideTally w_on, w_off, l;
    };
    std::vector<Partial> parts(sim.n_ap_realizations);
    auto work = [&](int worker) {
        for (int a = worker; a < sim.n_ap_realizations; a += sim.jobs)
        {
            Partial& part = parts[a];
            for (int b = 0; b < sim.n_enb_realizations; ++b)
            {
                Realization r = SampleRealization(scenario, params, sim, a, b);
                if (sync)
                {
                    SideTally unused;
                    ApplyMac(r, params, rule, sim, true);
                    EvaluateProbes(r, params, sim, lte_side, part.w_on, part.l);
                    ApplyMac(r, params, rule, sim, false);
                    EvaluateProbes(r, params, sim, false, part.w_off, unused);
                }
                else
                {
                    ApplyMac(r, params, rule, sim, true);
                    EvaluateProbes(r, params, sim, lte_side, part.w_on, part.l);
                }
            }
        }
    };
    if (sim.jobs == 1)
    {
        work(0);
    }
    else
    {
        std::vector<std::thread> threads;
        for (int w = 0; w < sim.jobs; ++w)
        {
            threads.emplace_back(work, w);
        }
        for (auto& t : threads)
        {
            t.join();
        }
    }
    SimResult res{scenario, params, sim, {}, {}, {}, sync};
    for (const Partial& p : parts)
    {
        res.wifi_on.Merge(p.w_on);
        res.wifi_off.Merge(p.w_off);
        res.lte.Merge(p.l);
    }
    std::sort(res.wifi_on.sinr.begin(), res.wifi_on.sinr.end());
    std::sort(res.wifi_off.sinr.begin(), res.wifi_off.sinr.end());
    std::sort(res.lte.sinr.begin(), res.lte.sinr.end());
    return res;
}

// ---------------------------------------------------------------------------
// Empirical metrics

struct Estimate
{
    double value = 0.0;
    double stderr_ = 0.0;
};

namespace detail
{

inline Estimate
Binomial(uint64_t k, uint64_t n)
{
    if (n == 0)
    {
        return {0.0, 0.0};
    }
    double p = static_cast<double>(k) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

inline Estimate
Mix(double w1, Estimate a, double w2, Estimate b)
{
    return {w1 * a.value + w2 * b.value,
            std::sqrt(w1 * w1 * a.stderr_ * a.stderr_ + w2 * w2 * b.stderr_ * b.stderr_)};
}

} // namespace detail

class EmpiricalMetrics
{
  public:
    explicit EmpiricalMetrics(SimResult res)
        : m_res(std::move(res))
    {
    }

    const SimResult& Result() const
    {
        return m_res;
    }

    double Eta() const
    {
        return m_res.params.eta;
    }

    /// Fraction of transmitting nodes in the inner window.
    Estimate TypicalMap(Side side) const
    {
        if (side == Side::Lte)
        {
            Estimate e = detail::Binomial(m_res.lte.nodes_on, m_res.lte.nodes);
            if (m_res.scenario.kind == ScenarioKind::DutyCycleSync)
            {
                e = detail::Mix(Eta(), e, 0.0, {});
            }
            return e;
        }
        Estimate on = detail::Binomial(m_res.wifi_on.nodes_on, m_res.wifi_on.nodes);
        if (!m_res.two_phase)
        {
            return on;
        }
        Estimate off = detail::Binomial(m_res.wifi_off.nodes_on, m_res.wifi_off.nodes);
        return detail::Mix(Eta(), on, 1.0 - Eta(), off);
    }

    /// Airtime of the tagged node: empirical MAP, or the duty fraction for duty-cycled LTE.
    Estimate TaggedMap(Side side) const
    {
        if (side == Side::Lte)
        {
            if (m_res.scenario.IsDuty())
            {
                return {Eta(), 0.0};
            }
            return detail::Binomial(m_res.lte.served, m_res.lte.probes);
        }
        Estimate on = detail::Binomial(m_res.wifi_on.served, m_res.wifi_on.probes);
        if (!m_res.two_phase)
        {
            return on;
        }
        Estimate off = detail::Binomial(m_res.wifi_off.served, m_res.wifi_off.probes);
        return detail::Mix(Eta(), on, 1.0 - Eta(), off);
    }

    /// Density of successful transmissions, links per m^2.
    Estimate Dst(Side side, double T) const
    {
        const double lambda = side == Side::WiFi ? m_res.params.lambda_w : m_res.params.lambda_l;
        auto succ = [&](const SideTally& t) { return detail::Binomial(t.Above(T), t.probes); };
        Estimate e;
        if (side == Side::Lte)
        {
            e = succ(m_res.lte);
            if (m_res.scenario.kind == ScenarioKind::DutyCycleSync)
            {
                e = detail::Mix(Eta(), e, 0.0, {});
            }
        }
        else if (m_res.two_phase)
        {
            e = detail::Mix(Eta(), succ(m_res.wifi_on), 1.0 - Eta(), succ(m_res.wifi_off));
        }
        else
        {
            e = succ(m_res.wifi_on);
        }
        return {lambda * e.value, lambda * e.stderr_};
    }

    /// SINR coverage of the tagged link given that it transmits (time-averaged for duty cycling).
    Estimate Coverage(Side side, double T) const
    {
        if (side == Side::Lte || !m_res.two_phase)
        {
            const SideTally& t = side == Side::Lte ? m_res.lte : m_res.wifi_on;
            return detail::Binomial(t.Above(T), t.served);
        }
        Estimate d = Dst(side, T);
        double norm = m_res.params.lambda_w * TaggedMap(side).value;
        if (norm <= 0.0)
        {
            return {0.0, 0.0};
        }
        return {d.value / norm, d.stderr_ / norm};
    }

    /// Probability that the tagged link supports rate rho, bit/s.
    Estimate RateCoverage(Side side, double rho) const
    {
        const double B = m_res.params.bandwidth;
        auto branch = [&](const SideTally& t, double airtime) -> Estimate {
            if (airtime <= 0.0)
            {
                return {0.0, 0.0};
            }
            return detail::Binomial(t.Above(RateToSinrThreshold(rho, airtime, B)), t.served);
        };
        if (side == Side::Lte)
        {
            return branch(m_res.lte, TaggedMap(Side::Lte).value);
        }
        if (!m_res.two_phase)
        {
            return branch(m_res.wifi_on, TaggedMap(Side::WiFi).value);
        }
        Estimate on = branch(m_res.wifi_on, detail::Binomial(m_res.wifi_on.served, m_res.wifi_on.probes).value);
        Estimate off = branch(m_res.wifi_off, detail::Binomial(m_res.wifi_off.served, m_res.wifi_off.probes).value);
        return detail::Mix(Eta(), on, 1.0 - Eta(), off);
    }

  private:
    SimResult m_res;
};

// ---------------------------------------------------------------------------
// Validation ops

struct InterferenceCdfResult
{
    double lambda_l = 0.0;
    /// Sorted samples, mW.
    std::vector<double> total;
    std::vector<double> strongest;
    double cdf_total_at_ed = 0.0;
    double cdf_max_at_ed = 0.0;
    double gap = 0.0;

    static double Cdf(const std::vector<double>& sorted, double v)
    {
        if (sorted.empty())
        {
            return 0.0;
        }
        return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin()) /
               static_cast<double>(sorted.size());
    }
};

/// Total and strongest LTE power at a typical AP, eNBs on the disc of radius side/2 + guard.
inline InterferenceCdfResult
InterferenceCdfCheck(const CoexParams& params, const SimConfig& sim, int samples)
{
    Propagation prop(params);
    const double R = sim.HalfExtent();
    InterferenceCdfResult out;
    out.lambda_l = params.lambda_l;
    for (int s = 0; s < samples; ++s)
    {
        StreamRng rng(HashKey({sim.seed, stream::kCdf, static_cast<uint64_t>(s)}));
        std::poisson_distribution<long> count(params.lambda_l * kPi * R * R);
        long n = count(rng);
        double total = 0.0;
        double best = 0.0;
        for (long k = 0; k < n; ++k)
        {
            double rr = R * std::sqrt(rng.Uniform());
            double g = -std::log(rng.Uniform()) / params.mu;
            double v = params.p_l * g / prop.LossSq(rr * rr);
            total += v;
            best = std::max(best, v);
        }
        out.total.push_back(total);
        out.strongest.push_back(best);
    }
    std::sort(out.total.begin(), out.total.end());
    std::sort(out.strongest.begin(), out.strongest.end());
    out.cdf_total_at_ed = InterferenceCdfResult::Cdf(out.total, params.gamma_ed);
    out.cdf_max_at_ed = InterferenceCdfResult::Cdf(out.strongest, params.gamma_ed);
    out.gap = std::abs(out.cdf_total_at_ed - out.cdf_max_at_ed);
    return out;
}

struct OracleEstimate
{
    Point2 x;
    uint64_t tagged_on = 0;
    uint64_t both = 0;
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    double HalfWidth() const
    {
        return 0.5 * (hi - lo);
    }
};

/// Wilson score interval for k successes out of n at normal quantile z.
inline std::pair<double, double>
WilsonInterval(uint64_t k, uint64_t n, double z)
{
    if (n == 0)
    {
        return {0.0, 1.0};
    }
    double nn = static_cast<double>(n);
    double p = static_cast<double>(k) / nn;
    double z2 = z * z;
    double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
    double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Empirical P(probe transmits | tagged transmits) with the tagged node planted at (r0, 0),
/// its own process emptied inside B(0, r0) and the probe planted at each offset.
/// params must carry the scenario (thresholds, backoff window).
inline std::vector<OracleEstimate>
ConditionalMapOracle(HKind kind, const CoexParams& params, double r0, const std::vector<Point2>& offsets,
                     uint64_t samples, uint64_t seed, double eps = 1e-12, double z = 1.96)
{
    params.Validate();
    Propagation prop(params);
    const Access access = AccessOf(kind);
    const bool tagged_enb = TaggedIsEnb(kind);
    const bool probe_enb = ProbeIsEnb(kind);
    const BackoffWindow win = access == Access::LbtLower ? BackoffWindow{1.0, 2.0} : BackoffWindow{0.0, 1.0};
    double reach = 0.0;
    for (double s : {params.gamma_cs / params.p_w, params.gamma_ed / params.p_l, params.gamma_l / params.p_w,
                     params.gamma_l / params.p_l})
    {
        reach = std::max(reach, prop.SensingRadius(s, eps));
    }
    double xmax = r0;
    for (const Point2& x : offsets)
    {
        xmax = std::max(xmax, x.Norm());
    }
    const double R = xmax + reach;

    struct Node
    {
        double x, y, t;
        bool enb;
        uint64_t id;
    };
    auto threshold = [&](bool rx_enb, bool tx_enb) {
        if (rx_enb)
        {
            return params.gamma_l;
        }
        return tx_enb ? params.gamma_ed : params.gamma_cs;
    };
    auto power = [&](bool enb) { return enb ? params.p_l : params.p_w; };
    auto timer = [&](bool enb, double u) { return enb ? win.a + (win.b - win.a) * u : u; };

    std::vector<OracleEstimate> out(offsets.size());
    for (size_t j = 0; j < offsets.size(); ++j)
    {
        out[j].x = offsets[j];
    }
    std::vector<Node> nodes;
    for (uint64_t s = 0; s < samples; ++s)
    {
        const uint64_t key = HashKey({seed, stream::kOracle, s});
        StreamRng rng(key);
        nodes.clear();
        uint64_t next_id = 3;
        auto scatter = [&](double lambda, bool enb) {
            if (!(lambda > 0.0))
            {
                return;
            }
            std::poisson_distribution<long> count(lambda * kPi * R * R);
            long n = count(rng);
            double excl = (enb == tagged_enb) ? r0 : 0.0;
            for (long k = 0; k < n; ++k)
            {
                double rr = R * std::sqrt(rng.Uniform());
                double th = 2.0 * kPi * rng.Uniform();
                double u = rng.Uniform();
                if (rr < excl)
                {
                    continue;
                }
                nodes.push_back({rr * std::cos(th), rr * std::sin(th), timer(enb, u), enb, next_id++});
            }
        };
        scatter(params.lambda_w, false);
        scatter(params.lambda_l, true);
        const Node tagged{r0, 0.0, timer(tagged_enb, rng.Uniform()), tagged_enb, 1};
        const double probe_u = rng.Uniform();
        detail::Sensing sensed{prop, key, params.mu};
        auto blocks = [&](const Node& j, const Node& i) {
            if (access == Access::Continuous)
            {
                if (i.enb)
                {
                    return false;
                }
                if (!j.enb && j.t >= i.t)
                {
                    return false;
                }
            }
            else if (j.t >= i.t)
            {
                return false;
            }
            double dx = j.x - i.x;
            double dy = j.y - i.y;
            return sensed(j.id, i.id, power(j.enb), dx * dx + dy * dy, threshold(i.enb, j.enb));
        };
        auto transmits = [&](const Node& i, const Node& other) {
            if (blocks(other, i))
            {
                return false;
            }
            for (const Node& n : nodes)
            {
                if (blocks(n, i))
                {
                    return false;
                }
            }
            return true;
        };
        for (size_t j = 0; j < offsets.size(); ++j)
        {
            const Node probe{offsets[j].x, offsets[j].y, timer(probe_enb, probe_u), probe_enb, 2};
            if (!transmits(tagged, probe))
            {
                continue;
            }
            ++out[j].tagged_on;
            if (transmits(probe, tagged))
            {
                ++out[j].both;
            }
        }
    }
    for (auto& o : out)
    {
        o.estimate = o.tagged_on ? static_cast<double>(o.both) / static_cast<double>(o.tagged_on) : 0.0;
        auto [lo, hi] = WilsonInterval(o.both, o.tagged_on, z);
        o.lo = lo;
        o.hi = hi;
    }
    return out;
}

} // namespace coex
