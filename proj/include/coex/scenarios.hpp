#pragma once

#include "coex/analytic.hpp"
#include "coex/core.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

namespace coex
{

/// Shares analytic models (and their caches) between scenarios with equal parameters.
class ModelRegistry
{
  public:
    explicit ModelRegistry(QuadratureSpec spec = {})
        : m_spec(std::move(spec))
    {
    }

    std::shared_ptr<const AnalyticModel> Get(CoexParams p, std::optional<double> lte_serving_lambda = {})
    {
        p.eta = 1.0;
        std::vector<double> key{p.lambda_w, p.lambda_l, p.p_w, p.p_l, p.gamma_cs, p.gamma_ed, p.gamma_l,
                                p.f_c, p.alpha, p.mu, p.sigma_n2, p.bandwidth, p.backoff_window.a,
                                p.backoff_window.b, lte_serving_lambda.value_or(-1.0)};
        std::lock_guard<std::mutex> lock(m_mutex);
        auto& slot = m_models[key];
        if (!slot)
        {
            slot = std::make_shared<const AnalyticModel>(p, m_spec, lte_serving_lambda);
        }
        return slot;
    }

    const QuadratureSpec& Spec() const
    {
        return m_spec;
    }

  private:
    QuadratureSpec m_spec;
    std::mutex m_mutex;
    std::map<std::vector<double>, std::shared_ptr<const AnalyticModel>> m_models;
};

/// Analytic DST, MAP, SINR and rate coverage for any scenario.
class ScenarioEvaluator
{
  public:
    ScenarioEvaluator(CoexParams base, std::shared_ptr<ModelRegistry> registry)
        : m_base(base),
          m_registry(std::move(registry))
    {
        m_base.Validate();
    }

    ScenarioEvaluator(CoexParams base, QuadratureSpec spec = {})
        : ScenarioEvaluator(base, std::make_shared<ModelRegistry>(std::move(spec)))
    {
    }

    const CoexParams& Base() const
    {
        return m_base;
    }

    double TypicalMap(const Scenario& s, Side side) const
    {
        double sum = 0.0;
        for (const Branch& b : Branches(s, side))
        {
            double m = b.airtime ? *b.airtime : b.model->TypicalMap(b.access, side);
            sum += b.weight * m;
        }
        return sum;
    }

    double TaggedMap(const Scenario& s, Side side) const
    {
        double sum = 0.0;
        for (const Branch& b : Branches(s, side))
        {
            sum += b.weight * Airtime(b, side);
        }
        return sum;
    }

    /// Coverage of the tagged link given that it transmits, time-averaged over phases.
    double Coverage(const Scenario& s, Side side, double T) const
    {
        const auto branches = Branches(s, side);
        double num = 0.0;
        double den = 0.0;
        for (const Branch& b : branches)
        {
            if (b.weight <= 0.0)
            {
                continue;
            }
            double m = Airtime(b, side);
            if (m <= 0.0)
            {
                continue;
            }
            num += b.weight * m * b.model->Coverage(b.access, side, T);
            den += b.weight * m;
        }
        if (den > 0.0)
        {
            return std::clamp(num / den, 0.0, 1.0);
        }
        const Branch& b = branches.front();
        return b.model->Coverage(b.access, side, T);
    }

    /// Density of successful transmissions, links per m^2.
    double Dst(const Scenario& s, Side side, double T) const
    {
        double sum = 0.0;
        for (const Branch& b : Branches(s, side))
        {
            if (b.weight <= 0.0)
            {
                continue;
            }
            double m = Airtime(b, side);
            if (m <= 0.0)
            {
                continue;
            }
            sum += b.weight * m * b.model->Coverage(b.access, side, T);
        }
        return Lambda(s, side) * sum;
    }

    /// Probability that the tagged node supports an aggregate rate rho (bit/s).
    double RateCoverage(const Scenario& s, Side side, double rho) const
    {
        if (rho < 0.0)
        {
            throw std::invalid_argument("rate must be >= 0");
        }
        if (rho == 0.0)
        {
            return 1.0;
        }
        double sum = 0.0;
        for (const Branch& b : Branches(s, side))
        {
            if (b.weight <= 0.0)
            {
                continue;
            }
            double m = Airtime(b, side);
            if (m <= 0.0)
            {
                continue;
            }
            double T = RateToSinrThreshold(rho, m, b.model->Params().bandwidth);
            sum += b.weight * b.model->Coverage(b.access, side, T);
        }
        return std::clamp(sum, 0.0, 1.0);
    }

    /// Intensity of the serving nodes of a side, per m^2.
    double Lambda(const Scenario& s, Side side) const
    {
        CoexParams p = s.Apply(m_base);
        return side == Side::WiFi ? p.lambda_w : p.lambda_l;
    }

    /// The model and access rule a scenario reduces to for a single-phase side.
    std::pair<std::shared_ptr<const AnalyticModel>, Access> Primary(const Scenario& s, Side side) const
    {
        auto b = Branches(s, side).front();
        return {b.model, b.access};
    }

  private:
    struct Branch
    {
        double weight;
        std::shared_ptr<const AnalyticModel> model;
        Access access;
        std::optional<double> airtime;
    };

    double Airtime(const Branch& b, Side side) const
    {
        return b.airtime ? *b.airtime : b.model->TaggedMap(b.access, side);
    }

    std::vector<Branch> Branches(const Scenario& s, Side side) const
    {
        if (side == Side::Lte && !s.HasSecondSide())
        {
            throw std::invalid_argument("scenario '" + s.Label() + "' has no LTE side");
        }
        const CoexParams p = s.Apply(m_base);
        switch (s.kind)
        {
        case ScenarioKind::WifiOnly:
        case ScenarioKind::ContinuousLte:
            return {{1.0, m_registry->Get(p), Access::Continuous, std::nullopt}};
        case ScenarioKind::WifiWifiBaseline:
        case ScenarioKind::LbtSamePriority:
            return {{1.0, m_registry->Get(p), Access::LbtSame, std::nullopt}};
        case ScenarioKind::LbtLowerPriority:
            return {{1.0, m_registry->Get(p), Access::LbtLower, std::nullopt}};
        case ScenarioKind::DutyCycleSync: {
            if (side == Side::Lte)
            {
                return {{1.0, m_registry->Get(p), Access::Continuous, p.eta}};
            }
            CoexParams off = p;
            off.lambda_l = 0.0;
            return {{p.eta, m_registry->Get(p), Access::Continuous, std::nullopt},
                    {1.0 - p.eta, m_registry->Get(off), Access::Continuous, std::nullopt}};
        }
        case ScenarioKind::DutyCycleAsync: {
            CoexParams thin = p;
            thin.lambda_l = p.lambda_l * p.eta;
            if (side == Side::Lte)
            {
                return {{1.0, m_registry->Get(thin, p.lambda_l), Access::Continuous, p.eta}};
            }
            return {{1.0, m_registry->Get(thin), Access::Continuous, std::nullopt}};
        }
        }
        throw std::logic_error("unhandled scenario kind");
    }

    CoexParams m_base;
    std::shared_ptr<ModelRegistry> m_registry;
};

} // namespace coex
