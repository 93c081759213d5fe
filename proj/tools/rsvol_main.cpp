// Command-line harness: synthetic data generation, single-sample
// estimation, one-day-ahead forecasting, rolling-window backtests,
// re-evaluation of persisted forecasts, and descriptive statistics.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsvol/rsvol.hpp"

namespace {

using namespace rsvol;

void add_prior_options(CLI::App* app, PriorSpec& prior) {
    app->add_option("--prior-mu-var", prior.mu_var, "variance of the normal prior on mu");
    app->add_option("--prior-phi-a", prior.phi_a, "beta prior a for (phi+1)/2");
    app->add_option("--prior-phi-b", prior.phi_b, "beta prior b for (phi+1)/2");
    app->add_option("--prior-rho-a", prior.rho_a, "beta prior a for (rho+1)/2");
    app->add_option("--prior-rho-b", prior.rho_b, "beta prior b for (rho+1)/2");
    app->add_option("--prior-eta-shape", prior.eta_shape, "IG shape for sigma_eta^2");
    app->add_option("--prior-eta-scale", prior.eta_scale, "IG scale for sigma_eta^2");
    app->add_option("--prior-xi-var", prior.xi_var, "variance of the normal prior on xi");
    app->add_option("--prior-u-shape", prior.u_shape, "IG shape for sigma_u^2");
    app->add_option("--prior-u-scale", prior.u_scale, "IG scale for sigma_u^2");
    app->add_option("--prior-nu-shape", prior.nu_shape, "gamma shape for nu");
    app->add_option("--prior-nu-rate", prior.nu_rate, "gamma rate for nu");
    app->add_option("--prior-beta-var", prior.beta_var, "variance of the normal prior on beta");
    app->add_option("--prior-delta-a", prior.delta_a, "beta prior a for (delta+1)/2");
    app->add_option("--prior-delta-b", prior.delta_b, "beta prior b for (delta+1)/2");
    app->add_option("--prior-gamma-shape", prior.gamma_shape, "gamma shape for gamma");
    app->add_option("--prior-gamma-rate", prior.gamma_rate, "gamma rate for gamma");
}

struct SimulateArgs {
    std::string model = "RSV-N";
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    std::string out = "simulated.csv";
    std::string truth_out;
    ModelParams params;
};

int cmd_simulate(const SimulateArgs& a) {
    const ModelId model = parse_model_id(a.model);
    ModelParams p = a.params;
    p.shape.family = model.family;
    Rng rng(a.seed);
    const SimulationResult sim = simulate(model, p, a.n, rng);
    write_daily_csv(a.out, sim.data);
    if (!a.truth_out.empty()) {
        std::ofstream out(a.truth_out);
        out << "date,h\n";
        for (std::size_t t = 0; t < sim.data.n(); ++t) {
            out << sim.data.dates[t] << ',' << detail::format_double(sim.latent.h[t]) << '\n';
        }
    }
    std::cout << "wrote " << sim.data.n() << " rows to " << a.out << "\n";
    return 0;
}

void print_summary(const std::string& name, const std::vector<double>& v) {
    if (v.empty()) return;
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    double mean = 0.0;
    for (const double x : s) mean += x;
    mean /= double(s.size());
    double sd = 0.0;
    for (const double x : s) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / double(s.size() - 1));
    auto q = [&](double p) { return s[std::size_t(p * double(s.size() - 1))]; };
    std::printf("%-12s %10.5f %10.5f %10.5f %10.5f %10.5f\n", name.c_str(), mean, sd, q(0.025),
                q(0.5), q(0.975));
}

int cmd_estimate(const std::string& input, const std::string& model_str, ChainConfig cc,
                 const PriorSpec& prior, const std::string& draws_out) {
    const ModelId model = parse_model_id(model_str);
    Dataset data = load_daily_csv(input);
    if (model.realized && !data.has_rv()) {
        throw ConfigError("model " + model_str + " requires an rv column");
    }
    if (!model.realized) data.x.reset();
    const PosteriorDraws d = run_chain(model, data, prior, cc);
    std::printf("%-12s %10s %10s %10s %10s %10s\n", "param", "mean", "sd", "q2.5", "median",
                "q97.5");
    print_summary("mu", d.mu);
    print_summary("phi", d.phi);
    print_summary("rho", d.rho);
    print_summary("sigma_eta2", d.sigma_eta2);
    print_summary("xi", d.xi);
    print_summary("sigma_u2", d.sigma_u2);
    print_summary("nu", d.nu);
    print_summary("beta", d.beta);
    print_summary("delta", d.delta);
    print_summary("gamma", d.gamma);
    std::cout << "acceptance rates:";
    for (const auto& [k, v] : d.acceptance) std::printf(" %s=%.2f", k.c_str(), v);
    std::cout << "\n";
    if (d.diag.rw_fallbacks > 0) {
        std::cout << "mode-search fallbacks: " << d.diag.rw_fallbacks << "\n";
    }
    if (!draws_out.empty()) {
        std::ofstream out(draws_out);
        out << "mu,phi,rho,sigma_eta2,xi,sigma_u2,nu,beta,delta,gamma,h_last\n";
        for (std::size_t i = 0; i < d.size(); ++i) {
            auto cell = [&](const std::vector<double>& v) {
                return v.empty() ? std::string() : detail::format_double(v[i]);
            };
            out << cell(d.mu) << ',' << cell(d.phi) << ',' << cell(d.rho) << ','
                << cell(d.sigma_eta2) << ',' << cell(d.xi) << ',' << cell(d.sigma_u2) << ','
                << cell(d.nu) << ',' << cell(d.beta) << ',' << cell(d.delta) << ','
                << cell(d.gamma) << ',' << cell(d.h_last) << '\n';
        }
        std::cout << "wrote draws to " << draws_out << "\n";
    }
    return 0;
}

int cmd_forecast(const std::string& input, const std::string& model_str, ChainConfig cc,
                 const PriorSpec& prior, std::vector<double> alphas, std::size_t m_pred) {
    const ModelId model = parse_model_id(model_str);
    Dataset data = load_daily_csv(input);
    if (model.realized && !data.has_rv()) {
        throw ConfigError("model " + model_str + " requires an rv column");
    }
    if (!model.realized) data.x.reset();
    const PosteriorDraws d = run_chain(model, data, prior, cc);
    Rng rng(derive_seed(cc.seed, 0xfc, 0));
    const auto samples = predict_one_step(d, data.y.back(), m_pred, rng);
    const ForecastRecord r = summarize_forecast(samples, alphas);
    std::printf("one-day-ahead forecast after %s (%s)\n", data.dates.back().c_str(),
                model_str.c_str());
    std::printf("  vol mean   %.6f\n  vol median %.6f\n", r.vol_mean, r.vol_median);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        std::printf("  VaR(%.3g) %.6f   ES(%.3g) %.6f\n", alphas[i], r.var_alpha[i], alphas[i],
                    r.es_alpha[i]);
    }
    return 0;
}

int cmd_backtest(BacktestConfig cfg, const PriorSpec& prior) {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset data = load_daily_csv(cfg.input_csv);
    const BacktestResult result = run_backtest(cfg, data, prior);
    std::vector<ForecastTable> tables(result.models.size());
    for (std::size_t mi = 0; mi < result.models.size(); ++mi) {
        tables[mi].records = result.records[mi];
        tables[mi].alphas = result.alphas;
        tables[mi].proxy_names = result.proxy_names;
    }
    EvalResult eval;
    if (result.models.size() >= 2) {
        eval = evaluate_forecasts(result.models, tables, cfg.vol_point, cfg.mcs_level_vol,
                                  cfg.mcs_level_tail, cfg.mcs_boot, cfg.mcs_block);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_backtest_outputs(cfg, result, eval, wall);
    std::cout << "backtest done: " << result.records[0].size() << " forecasts per model, "
              << result.flagged_windows << " flagged windows, outputs in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& dir, std::vector<std::string> models, const std::string& vol_point,
             double level_vol, double level_tail, std::size_t boot, std::size_t block) {
    namespace fs = std::filesystem;
    if (models.empty()) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("forecasts_", 0) == 0 && name.size() > 14 &&
                name.substr(name.size() - 4) == ".csv") {
                models.push_back(name.substr(10, name.size() - 14));
            }
        }
        std::sort(models.begin(), models.end());
    }
    if (models.size() < 2) throw ConfigError("eval: need at least two forecast tables");
    std::vector<ForecastTable> tables;
    for (const auto& m : models) {
        tables.push_back(read_forecasts_csv((fs::path(dir) / ("forecasts_" + m + ".csv")).string()));
    }
    const EvalResult eval =
        evaluate_forecasts(models, tables, vol_point, level_vol, level_tail, boot, block);
    write_eval_csvs(dir, eval);
    std::cout << "evaluation tables written to " << dir << "\n";
    for (const auto& r : eval.means) {
        std::printf("  %-14s %-12s %.5f\n", r.measure.c_str(), r.model.c_str(), r.mean_loss);
    }
    return 0;
}

int cmd_stats(const std::string& input) {
    const Dataset data = load_daily_csv(input);
    const DescriptiveStats s = descriptive_stats(data.y);
    std::printf("n     %zu\nmean  %.4f\nsd    %.4f\nskew  %.4f\nkurt  %.4f\nmin   %.4f\n"
                "max   %.4f\nJB p  %.4f\nLB p  %.4f (plain Ljung-Box, %zu lags)\n",
                data.n(), s.mean, s.sd, s.skew, s.kurt, s.min, s.max, s.jb_pvalue, s.lb_pvalue,
                s.lb_lags);
    if (data.has_rv()) {
        std::vector<double> x = *data.x;
        const DescriptiveStats sx = descriptive_stats(x);
        std::printf("log rv: mean %.4f sd %.4f skew %.4f kurt %.4f\n", sx.mean, sx.sd, sx.skew,
                    sx.kurt);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian estimation and tail-risk forecasting for realized "
                 "stochastic volatility models"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a config file");

    PriorSpec prior;

    // simulate
    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "generate a synthetic daily csv");
    simulate_cmd->add_option("--model", sim.model, "model id, e.g. RSV-AZ-ST")->capture_default_str();
    simulate_cmd->add_option("--n", sim.n, "series length")->capture_default_str();
    simulate_cmd->add_option("--seed", sim.seed, "rng seed")->capture_default_str();
    simulate_cmd->add_option("--out", sim.out, "output csv path")->capture_default_str();
    simulate_cmd->add_option("--truth-out", sim.truth_out, "optional latent h csv");
    simulate_cmd->add_option("--mu", sim.params.mu)->capture_default_str();
    simulate_cmd->add_option("--phi", sim.params.phi)->capture_default_str();
    simulate_cmd->add_option("--rho", sim.params.rho)->capture_default_str();
    simulate_cmd->add_option("--sigma-eta2", sim.params.sigma_eta2)->capture_default_str();
    simulate_cmd->add_option("--xi", sim.params.xi)->capture_default_str();
    simulate_cmd->add_option("--sigma-u2", sim.params.sigma_u2)->capture_default_str();
    simulate_cmd->add_option("--nu", sim.params.shape.nu)->capture_default_str();
    simulate_cmd->add_option("--beta", sim.params.shape.beta)->capture_default_str();
    simulate_cmd->add_option("--delta", sim.params.shape.delta)->capture_default_str();
    simulate_cmd->add_option("--gamma", sim.params.shape.gamma)->capture_default_str();

    // estimate
    std::string est_input, est_model = "RSV-N", est_draws_out;
    ChainConfig est_cc;
    auto* estimate_cmd = app.add_subcommand("estimate", "run one chain and print a summary");
    estimate_cmd->add_option("--input", est_input, "daily csv")->required();
    estimate_cmd->add_option("--model", est_model)->capture_default_str();
    estimate_cmd->add_option("--iters", est_cc.n_iter)->capture_default_str();
    estimate_cmd->add_option("--burn", est_cc.n_burn)->capture_default_str();
    estimate_cmd->add_option("--thin", est_cc.thin)->capture_default_str();
    estimate_cmd->add_option("--seed", est_cc.seed)->capture_default_str();
    estimate_cmd->add_option("--draws-out", est_draws_out, "optional csv of posterior draws");
    add_prior_options(estimate_cmd, prior);

    // forecast
    std::string fc_input, fc_model = "RSV-N";
    ChainConfig fc_cc;
    std::vector<double> fc_alphas = {0.01, 0.05};
    std::size_t fc_m = 15000;
    auto* forecast_cmd = app.add_subcommand("forecast", "estimate and forecast one day ahead");
    forecast_cmd->add_option("--input", fc_input, "daily csv")->required();
    forecast_cmd->add_option("--model", fc_model)->capture_default_str();
    forecast_cmd->add_option("--iters", fc_cc.n_iter)->capture_default_str();
    forecast_cmd->add_option("--burn", fc_cc.n_burn)->capture_default_str();
    forecast_cmd->add_option("--thin", fc_cc.thin)->capture_default_str();
    forecast_cmd->add_option("--seed", fc_cc.seed)->capture_default_str();
    forecast_cmd->add_option("--alphas", fc_alphas, "VaR levels")->capture_default_str();
    forecast_cmd->add_option("--samples", fc_m, "predictive samples")->capture_default_str();
    add_prior_options(forecast_cmd, prior);

    // backtest
    BacktestConfig bt;
    auto* backtest_cmd = app.add_subcommand("backtest", "rolling-window forecast study");
    backtest_cmd->add_option("--input", bt.input_csv, "daily csv")->required();
    backtest_cmd->add_option("--intraday", bt.intraday_csv, "intraday csv for RK/BV/Med proxies");
    backtest_cmd->add_option("--models", bt.models, "model ids")->required();
    backtest_cmd->add_option("--window", bt.window, "estimation window length")->required();
    backtest_cmd->add_option("--alphas", bt.alphas, "VaR levels")->capture_default_str();
    backtest_cmd->add_option("--samples", bt.m_pred, "predictive samples per date")
        ->capture_default_str();
    backtest_cmd->add_option("--iters", bt.chain.n_iter)->capture_default_str();
    backtest_cmd->add_option("--burn", bt.chain.n_burn)->capture_default_str();
    backtest_cmd->add_option("--thin", bt.chain.thin)->capture_default_str();
    backtest_cmd->add_option("--seed", bt.chain.seed)->capture_default_str();
    backtest_cmd->add_flag("--no-warm-start{false}", bt.warm_start,
                           "disable warm starts between windows");
    backtest_cmd->add_option("--vol-point", bt.vol_point, "median or mean")->capture_default_str();
    backtest_cmd->add_option("--proxies", bt.proxies, "RV RK BV Med");
    backtest_cmd->add_option("--rk-bandwidth", bt.rk_bandwidth)->capture_default_str();
    backtest_cmd->add_option("--out-dir", bt.out_dir)->capture_default_str();
    backtest_cmd->add_option("--threads", bt.threads, "0 = hardware")->capture_default_str();
    backtest_cmd->add_option("--mcs-level-vol", bt.mcs_level_vol)->capture_default_str();
    backtest_cmd->add_option("--mcs-level-tail", bt.mcs_level_tail)->capture_default_str();
    backtest_cmd->add_option("--mcs-boot", bt.mcs_boot)->capture_default_str();
    backtest_cmd->add_option("--mcs-block", bt.mcs_block)->capture_default_str();
    add_prior_options(backtest_cmd, prior);

    // eval
    std::string ev_dir = ".", ev_vol_point = "median";
    std::vector<std::string> ev_models;
    double ev_level_vol = 0.90, ev_level_tail = 0.75;
    std::size_t ev_boot = 1000, ev_block = 10;
    auto* eval_cmd = app.add_subcommand("eval", "recompute evaluation tables from forecasts");
    eval_cmd->add_option("--dir", ev_dir, "directory with forecasts_<model>.csv")
        ->capture_default_str();
    eval_cmd->add_option("--models", ev_models, "model ids (default: every table found)");
    eval_cmd->add_option("--vol-point", ev_vol_point)->capture_default_str();
    eval_cmd->add_option("--mcs-level-vol", ev_level_vol)->capture_default_str();
    eval_cmd->add_option("--mcs-level-tail", ev_level_tail)->capture_default_str();
    eval_cmd->add_option("--mcs-boot", ev_boot)->capture_default_str();
    eval_cmd->add_option("--mcs-block", ev_block)->capture_default_str();

    // stats
    std::string st_input;
    auto* stats_cmd = app.add_subcommand("stats", "descriptive statistics of a daily csv");
    stats_cmd->add_option("--input", st_input, "daily csv")->required();

    try {
        app.parse(argc, argv);
        if (simulate_cmd->parsed()) return cmd_simulate(sim);
        if (estimate_cmd->parsed())
            return cmd_estimate(est_input, est_model, est_cc, prior, est_draws_out);
        if (forecast_cmd->parsed())
            return cmd_forecast(fc_input, fc_model, fc_cc, prior, fc_alphas, fc_m);
        if (backtest_cmd->parsed()) return cmd_backtest(bt, prior);
        if (eval_cmd->parsed())
            return cmd_eval(ev_dir, ev_models, ev_vol_point, ev_level_vol, ev_level_tail, ev_boot,
                            ev_block);
        if (stats_cmd->parsed()) return cmd_stats(st_input);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const rsvol::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const rsvol::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const rsvol::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
