// coexsim: Wi-Fi/LTE coexistence sweeps, analytic and simulated.

#include "coex/coex.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace coex;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitQuadrature = 3;

struct Options
{
    std::string config;
    std::vector<std::string> scenarios;
    std::string engine;
    std::string out;
    int64_t seed = -1;
    int jobs = 0;
};

ExperimentConfig
LoadConfig(const Options& o, Engine fallback_engine)
{
    Json j;
    if (o.config.empty())
    {
        j = DefaultConfigJson();
        j["engine"] = EngineName(fallback_engine);
    }
    else
    {
        std::ifstream is(o.config);
        if (!is)
        {
            throw ConfigError("--config", "cannot open '" + o.config + "'");
        }
        try
        {
            j = Json::parse(is);
        }
        catch (const nlohmann::json::parse_error& e)
        {
            throw ConfigError("--config", e.what());
        }
        if (!j.contains("engine"))
        {
            j["engine"] = EngineName(fallback_engine);
        }
    }
    if (!o.engine.empty())
    {
        j["engine"] = o.engine;
    }
    if (!o.scenarios.empty())
    {
        j["scenarios"] = o.scenarios;
    }
    if (o.seed >= 0)
    {
        j["sim"]["seed"] = o.seed;
    }
    if (!o.out.empty())
    {
        j["out"] = o.out;
    }
    if (o.jobs > 0)
    {
        j["jobs"] = o.jobs;
    }
    return ParseConfig(j);
}

int
DoRun(const Options& o, Engine fallback)
{
    ExperimentConfig cfg = LoadConfig(o, fallback);
    std::fprintf(stderr, "coexsim: %zu scenarios, engine %s\n", cfg.scenarios.size(), EngineName(cfg.engine));
    RunOutput out = Run(cfg);
    auto paths = WriteOutputs(cfg.out_dir, cfg, out);
    std::fprintf(stderr, "coexsim: wrote %zu files to %s\n", paths.size(), cfg.out_dir.c_str());
    for (const CellError& e : out.errors)
    {
        std::fprintf(stderr, "coexsim: failed cell %s/%s/%s at %g: %s\n", e.scenario.c_str(), e.side.c_str(),
                     e.metric.c_str(), e.threshold, e.message.c_str());
    }
    bool identities_ok = std::all_of(out.identities.begin(), out.identities.end(),
                                     [](const IdentityCheck& c) { return c.Pass(); });
    for (const IdentityCheck& c : out.identities)
    {
        if (!c.Pass())
        {
            std::fprintf(stderr, "coexsim: identity '%s' off by %.3g\n", c.name.c_str(), c.max_abs_diff);
        }
    }
    if (out.HasQuadratureFailure())
    {
        return kExitQuadrature;
    }
    return identities_ok ? kExitOk : kExitValidation;
}

int
DoCompare(const std::vector<std::string>& inputs, const std::string& engine, double lambda_w, const std::string& out)
{
    auto curves = LoadCurves(inputs);
    auto checks = CompareCurves(curves, lambda_w, engine);
    Json report = CompareJson(checks);
    if (out.empty())
    {
        std::cout << report.dump(2) << '\n';
    }
    else
    {
        std::ofstream f(out);
        f << report.dump(2) << '\n';
    }
    bool ok = true;
    for (const OrderingCheck& c : checks)
    {
        std::fprintf(stderr, "%-4s %s  %s\n", !c.applicable ? "SKIP" : (c.pass ? "PASS" : "FAIL"), c.name.c_str(),
                     c.detail.c_str());
        ok = ok && (!c.applicable || c.pass);
    }
    return ok ? kExitOk : kExitValidation;
}

int
DoValidate(const Options& o)
{
    ExperimentConfig cfg = LoadConfig(o, Engine::Analytic);
    auto registry = std::make_shared<ModelRegistry>(cfg.quadrature);
    bool ok = true;
    Json report;

    report["identity_checks"] = Json::array();
    for (const IdentityCheck& c : RunIdentityChecks(cfg.params, registry, {-10.0, 0.0, 10.0, 20.0}))
    {
        report["identity_checks"].push_back({{"name", c.name}, {"max_abs_diff", c.max_abs_diff}, {"pass", c.Pass()}});
        ok = ok && c.Pass();
    }

    // Closed forms: N at alpha = 4 and the interference-only Rayleigh coverage.
    report["oracles"] = Json::array();
    if (cfg.params.alpha == 4.0)
    {
        const CoexParams& p = cfg.params;
        Propagation prop(p);
        double s = p.gamma_cs / p.p_w;
        double closed = p.lambda_w * kPi / 2.0 * std::sqrt(kPi / (p.mu * s * prop.K()));
        double num = NFuncRatio(0.0, 0.0, s, p.lambda_w, prop, cfg.quadrature);
        bool pass = std::abs(num - closed) <= 1e-5 * closed;
        report["oracles"].push_back({{"name", "n_func closed form"}, {"value", num}, {"expected", closed},
                                     {"pass", pass}});
        ok = ok && pass;

        CoexParams q = p;
        q.lambda_w = 0.0;
        q.sigma_n2 = 0.0;
        AnalyticModel m(q, cfg.quadrature);
        double worst = 0.0;
        for (double db : {-10.0, 0.0, 10.0, 20.0})
        {
            double T = DbToLinear(db);
            double exact = 1.0 / (1.0 + std::sqrt(T) * (kPi / 2.0 - std::atan(1.0 / std::sqrt(T))));
            worst = std::max(worst, std::abs(m.Coverage(Access::Continuous, Side::Lte, T) - exact));
        }
        report["oracles"].push_back({{"name", "lte coverage closed form"}, {"max_abs_diff", worst},
                                     {"pass", worst <= 1e-3}});
        ok = ok && worst <= 1e-3;
    }

    report["interference_cdf"] = Json::array();
    for (double per_km2 : {200.0, 600.0})
    {
        CoexParams q = cfg.params;
        q.lambda_l = PerKm2ToPerM2(per_km2);
        InterferenceCdfResult cdf = InterferenceCdfCheck(q, cfg.sim, 5000);
        report["interference_cdf"].push_back({{"lambda_l_per_km2", per_km2},
                                              {"cdf_total_at_ed", cdf.cdf_total_at_ed},
                                              {"cdf_max_at_ed", cdf.cdf_max_at_ed},
                                              {"gap", cdf.gap},
                                              {"pass", cdf.gap <= 0.03}});
        ok = ok && cdf.gap <= 0.03;
    }
    report["pass"] = ok;
    std::cout << report.dump(2) << '\n';
    return ok ? kExitOk : kExitValidation;
}

} // namespace

int
main(int argc, char** argv)
{
    CLI::App app{"Wi-Fi/LTE coexistence toolkit"};
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON experiment config");
        sub->add_option("--scenario", opt.scenarios, "scenario name, repeatable (overrides config)");
        sub->add_option("--engine", opt.engine, "analytic | monte-carlo | both");
        sub->add_option("--seed", opt.seed, "simulation seed");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
    };
    CLI::App* analytic = app.add_subcommand("analytic", "evaluate the stochastic-geometry model");
    add_common(analytic);
    CLI::App* simulate = app.add_subcommand("simulate", "run the Monte Carlo simulator");
    add_common(simulate);
    CLI::App* validate = app.add_subcommand("validate", "scenario-reduction and oracle identity suites");
    add_common(validate);

    std::vector<std::string> inputs;
    std::string cmp_engine = "analytic";
    std::string cmp_out;
    double lambda_w = 400.0;
    CLI::App* compare = app.add_subcommand("compare", "ordering report over result CSVs");
    compare->add_option("inputs", inputs, "CSV files or directories")->required();
    compare->add_option("--engine", cmp_engine, "engine column to compare");
    compare->add_option("--lambda-w", lambda_w, "Wi-Fi density per km2 for the DST tolerance");
    compare->add_option("--out", cmp_out, "write the JSON report here");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (analytic->parsed())
        {
            return DoRun(opt, Engine::Analytic);
        }
        if (simulate->parsed())
        {
            return DoRun(opt, Engine::MonteCarlo);
        }
        if (validate->parsed())
        {
            return DoValidate(opt);
        }
        if (compare->parsed())
        {
            return DoCompare(inputs, cmp_engine, lambda_w, cmp_out);
        }
    }
    catch (const ConfigError& e)
    {
        std::fprintf(stderr, "coexsim: config error: %s\n", e.what());
        return kExitValidation;
    }
    catch (const QuadratureError& e)
    {
        std::fprintf(stderr, "coexsim: quadrature did not converge: %s\n", e.what());
        return kExitQuadrature;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "coexsim: %s\n", e.what());
        return kExitError;
    }
    return kExitOk;
}
