#pragma once

// Rolling-window backtest orchestration: per-date re-estimation, one-day
// forecasts, loss tables, predictive-ability tests, and the model
// confidence set. Windows of one model run sequentially (warm starts);
// models run in a thread pool with independent random streams derived from
// (seed, window index, model index).

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "rsvol/chain.hpp"
#include "rsvol/forecast.hpp"
#include "rsvol/io.hpp"
#include "rsvol/mcmc_fs.hpp"
#include "rsvol/realized.hpp"
#include "rsvol/riskeval.hpp"

namespace rsvol {

struct BacktestConfig {
    std::vector<std::string> models;
    std::size_t window = 0;
    std::vector<double> alphas = {0.01, 0.05};
    std::size_t m_pred = 15000;
    ChainConfig chain;
    bool warm_start = true;
    std::string vol_point = "median";  // "median" or "mean"
    std::vector<std::string> proxies;  // of {RV, RK, BV, Med}; default RV
    std::size_t rk_bandwidth = 10;
    std::string input_csv;
    std::string intraday_csv;
    std::string out_dir = ".";
    std::size_t threads = 0;
    double mcs_level_vol = 0.90;
    double mcs_level_tail = 0.75;
    std::size_t mcs_boot = 1000;
    std::size_t mcs_block = 10;

    void validate(std::size_t series_len) const {
        if (models.empty()) throw ConfigError("backtest: no models requested");
        if (window < 2) throw ConfigError("backtest: window must be at least 2");
        if (window >= series_len)
            throw ConfigError("backtest: window must be below the series length");
        if (m_pred < 1000) throw ConfigError("backtest: need at least 1000 predictive samples");
        for (const double a : alphas) {
            if (!(a > 0.0 && a < 0.5)) throw ConfigError("backtest: alpha outside (0, 0.5)");
        }
        if (vol_point != "median" && vol_point != "mean")
            throw ConfigError("backtest: vol_point must be median or mean");
        chain.validate();
    }
};

struct ProxyPanel {
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;  // per proxy, per date (raw, unadjusted)
};

inline ProxyPanel build_proxy_panel(const BacktestConfig& cfg, const Dataset& daily) {
    ProxyPanel panel;
    std::vector<std::string> wanted = cfg.proxies;
    if (wanted.empty()) wanted = {"RV"};
    if (!cfg.intraday_csv.empty()) {
        const IntradaySeries intraday = load_intraday_csv(cfg.intraday_csv);
        if (intraday.dates != daily.dates) {
            throw DataError("intraday dates do not match the daily dates");
        }
        for (const auto& name : wanted) {
            std::vector<double> v(daily.n());
            for (std::size_t t = 0; t < daily.n(); ++t) {
                const IntradayDay& day = intraday.days[t];
                if (name == "RV") v[t] = realized_variance(day);
                else if (name == "RK") v[t] = realized_kernel(day, cfg.rk_bandwidth);
                else if (name == "BV") v[t] = bipower(day);
                else if (name == "Med") v[t] = med_rv(day);
                else throw ConfigError("unknown proxy: " + name);
            }
            panel.names.push_back(name);
            panel.values.push_back(std::move(v));
        }
        return panel;
    }
    if (!daily.has_rv()) return panel;  // no proxies available
    for (const auto& name : wanted) {
        if (name != "RV") {
            throw ConfigError("proxy " + name + " requires an intraday csv");
        }
    }
    std::vector<double> v(daily.n());
    for (std::size_t t = 0; t < daily.n(); ++t) v[t] = std::exp((*daily.x)[t]);
    panel.names.push_back("RV");
    panel.values.push_back(std::move(v));
    return panel;
}

struct BacktestResult {
    std::vector<std::string> models;
    std::vector<std::vector<ForecastRecord>> records;  // per model, per forecast date
    std::vector<double> alphas;
    std::vector<std::string> proxy_names;
    std::size_t flagged_windows = 0;
};

namespace detail {

inline ModelParams posterior_mean_params(const PosteriorDraws& d) {
    auto mean = [](const std::vector<double>& v) {
        double acc = 0.0;
        for (const double x : v) acc += x;
        return acc / double(v.size());
    };
    ModelParams p;
    p.shape.family = d.model.family;
    p.mu = mean(d.mu);
    p.phi = std::min(0.999, std::max(-0.999, mean(d.phi)));
    p.rho = std::min(0.999, std::max(-0.999, mean(d.rho)));
    p.sigma_eta2 = mean(d.sigma_eta2);
    if (!d.xi.empty()) p.xi = mean(d.xi);
    if (!d.sigma_u2.empty()) p.sigma_u2 = mean(d.sigma_u2);
    if (!d.nu.empty()) p.shape.nu = std::max(mean(d.nu), nu_floor(d.model.family) + 0.05);
    if (!d.beta.empty()) p.shape.beta = mean(d.beta);
    if (!d.delta.empty()) p.shape.delta = std::min(0.999, std::max(-0.999, mean(d.delta)));
    if (!d.gamma.empty()) p.shape.gamma = mean(d.gamma);
    return p;
}

} // namespace detail

// Runs one model across all windows, sequentially (warm starts carry the
// previous window's posterior means; a diverged window resets to defaults).
inline void run_model_windows(const BacktestConfig& cfg, const Dataset& data,
                              const ProxyPanel& panel, const PriorSpec& prior,
                              std::size_t model_idx, BacktestResult& result) {
    const ModelId model = parse_model_id(cfg.models[model_idx]);
    const std::size_t n = data.n();
    const std::size_t n_fc = n - cfg.window;
    std::optional<ModelParams> warm;
    for (std::size_t w = 0; w < n_fc; ++w) {
        const std::size_t fc_t = cfg.window + w;  // forecast date index
        Dataset win = data.window(fc_t - cfg.window, cfg.window);
        if (!model.realized) win.x.reset();
        ChainConfig cc = cfg.chain;
        cc.seed = derive_seed(cfg.chain.seed, w, model_idx);
        if (cfg.warm_start && warm) {
            const std::size_t half = cc.n_burn / 2;
            cc.n_iter = cc.n_iter - cc.n_burn + half;
            cc.n_burn = half;
        }
        ForecastRecord rec;
        rec.date = data.dates[fc_t];
        rec.realized_return = data.y[fc_t];
        for (std::size_t pi = 0; pi < panel.names.size(); ++pi) {
            std::vector<double> wy(data.y.begin() + (fc_t - cfg.window), data.y.begin() + fc_t);
            std::vector<double> wp(panel.values[pi].begin() + (fc_t - cfg.window),
                                   panel.values[pi].begin() + fc_t);
            const double c = hl_factor(wy, wp);
            rec.realized_proxy.push_back(c * panel.values[pi][fc_t]);
        }
        try {
            const PosteriorDraws draws =
                run_chain(model, win, prior, cc, cfg.warm_start ? warm : std::nullopt);
            Rng rng(derive_seed(cfg.chain.seed, w, model_idx, 0x9e3779b9ULL));
            const auto samples = predict_one_step(draws, win.y.back(), cfg.m_pred, rng);
            const ForecastRecord summary = summarize_forecast(samples, cfg.alphas);
            rec.vol_mean = summary.vol_mean;
            rec.vol_median = summary.vol_median;
            rec.var_alpha = summary.var_alpha;
            rec.es_alpha = summary.es_alpha;
            warm = detail::posterior_mean_params(draws);
        } catch (const NumericalError&) {
            rec.flagged = true;
            rec.var_alpha.assign(cfg.alphas.size(), 0.0);
            rec.es_alpha.assign(cfg.alphas.size(), 0.0);
            warm.reset();
            ++result.flagged_windows;
        }
        result.records[model_idx][w] = std::move(rec);
    }
}

inline BacktestResult run_backtest(const BacktestConfig& cfg, const Dataset& data,
                                   const PriorSpec& prior = {}) {
    cfg.validate(data.n());
    for (const auto& ms : cfg.models) {
        const ModelId m = parse_model_id(ms);
        if (m.realized && !data.has_rv()) {
            throw ConfigError("model " + ms + " requires an rv column in the daily csv");
        }
    }
    const ProxyPanel panel = build_proxy_panel(cfg, data);
    BacktestResult result;
    result.models = cfg.models;
    result.alphas = cfg.alphas;
    result.proxy_names = panel.names;
    result.records.assign(cfg.models.size(),
                          std::vector<ForecastRecord>(data.n() - cfg.window));

    std::size_t nthreads = cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads;
    if (nthreads == 0) nthreads = 1;
    nthreads = std::min(nthreads, cfg.models.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.models.size()) return;
            run_model_windows(cfg, data, panel, prior, i, result);
        }
    };
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < nthreads; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return result;
}

// --- evaluation tables ------------------------------------------------------

struct GwRow {
    std::string measure, model_a, model_b;
    double uncond_stat = 0.0, uncond_p = 1.0;
    double cond_stat = 0.0, cond_p = 1.0, cond_indicator = 0.0;
    bool degenerate = false;
};

struct McsRow {
    std::string measure, model;
    double pvalue = 1.0;
    bool in_set = true;
    double level = 0.9;
};

struct DqRow {
    std::string model;
    double alpha = 0.0;
    double violation_rate = 0.0;
    double dq_pvalue = 1.0;
};

struct MeanLossRow {
    std::string measure, model;
    double mean_loss = 0.0;
};

struct PairLossRow {
    std::string measure, model_a, model_b, date;
    double loss_a = 0.0, loss_b = 0.0;
};

struct EvalResult {
    std::vector<GwRow> gw;
    std::vector<McsRow> mcs_rows;
    std::vector<DqRow> dq;
    std::vector<MeanLossRow> means;
    std::vector<PairLossRow> pair_losses;
};

// Evaluation from persisted forecast tables alone. Dates flagged for any
// model are dropped from every comparison so panels stay aligned.
inline EvalResult evaluate_forecasts(const std::vector<std::string>& models,
                                     const std::vector<ForecastTable>& tables,
                                     const std::string& vol_point, double mcs_level_vol,
                                     double mcs_level_tail, std::size_t mcs_boot,
                                     std::size_t mcs_block, std::uint64_t mcs_seed = 20240901) {
    if (models.size() != tables.size() || models.empty()) {
        throw ConfigError("evaluate_forecasts: model/table mismatch");
    }
    const std::size_t n_all = tables[0].records.size();
    const auto& alphas = tables[0].alphas;
    const auto& proxies = tables[0].proxy_names;
    for (const auto& t : tables) {
        if (t.records.size() != n_all || t.alphas != alphas || t.proxy_names != proxies) {
            throw DataError("evaluate_forecasts: tables are not aligned");
        }
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n_all; ++i) {
        bool ok = true;
        for (const auto& t : tables) ok = ok && !t.records[i].flagged;
        if (ok) keep.push_back(i);
    }
    if (keep.size() < 3) throw DataError("evaluate_forecasts: too few usable forecast dates");

    EvalResult out;
    struct Measure {
        std::string name;
        std::vector<std::vector<double>> losses;  // per model, per kept date
        double mcs_level;
    };
    std::vector<Measure> measures;

    for (std::size_t pi = 0; pi < proxies.size(); ++pi) {
        Measure m;
        m.name = "qlike_" + proxies[pi];
        m.mcs_level = mcs_level_vol;
        m.losses.resize(models.size());
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            for (const std::size_t i : keep) {
                const auto& r = tables[mi].records[i];
                const double f = vol_point == "mean" ? r.vol_mean : r.vol_median;
                m.losses[mi].push_back(qlike(r.realized_proxy[pi], f));
            }
        }
        measures.push_back(std::move(m));
    }
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        Measure m;
        m.name = "fz0_" + alpha_tag(alphas[ai]);
        m.mcs_level = mcs_level_tail;
        m.losses.resize(models.size());
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            for (const std::size_t i : keep) {
                const auto& r = tables[mi].records[i];
                m.losses[mi].push_back(
                    fz0(r.realized_return, r.var_alpha[ai], r.es_alpha[ai], alphas[ai]));
            }
        }
        measures.push_back(std::move(m));
    }

    for (const auto& m : measures) {
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            double acc = 0.0;
            for (const double l : m.losses[mi]) acc += l;
            out.means.push_back({m.name, models[mi], acc / double(m.losses[mi].size())});
        }
        for (std::size_t a = 0; a < models.size(); ++a) {
            for (std::size_t b = a + 1; b < models.size(); ++b) {
                std::vector<double> diff(m.losses[a].size());
                for (std::size_t i = 0; i < diff.size(); ++i) {
                    diff[i] = m.losses[a][i] - m.losses[b][i];
                }
                GwRow row;
                row.measure = m.name;
                row.model_a = models[a];
                row.model_b = models[b];
                const GwResult u = gw_unconditional(diff);
                const GwResult c = gw_conditional(diff);
                row.uncond_stat = u.stat;
                row.uncond_p = u.pvalue;
                row.cond_stat = c.stat;
                row.cond_p = c.pvalue;
                row.cond_indicator = c.indicator;
                row.degenerate = u.degenerate || c.degenerate;
                out.gw.push_back(row);
                for (std::size_t i = 0; i < diff.size(); ++i) {
                    out.pair_losses.push_back({m.name, models[a], models[b],
                                               tables[a].records[keep[i]].date,
                                               m.losses[a][i], m.losses[b][i]});
                }
            }
        }
        if (models.size() >= 2) {
            const McsResult mr = mcs(m.losses, m.mcs_level, mcs_boot, mcs_block, mcs_seed);
            for (std::size_t mi = 0; mi < models.size(); ++mi) {
                out.mcs_rows.push_back(
                    {m.name, models[mi], mr.pvalues[mi], mr.in_set[mi], m.mcs_level});
            }
        }
    }

    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
            std::vector<int> hits;
            std::vector<double> vf;
            for (const std::size_t i : keep) {
                const auto& r = tables[mi].records[i];
                hits.push_back(r.realized_return < r.var_alpha[ai] ? 1 : 0);
                vf.push_back(r.var_alpha[ai]);
            }
            DqRow row;
            row.model = models[mi];
            row.alpha = alphas[ai];
            double vr = 0.0;
            for (const int h : hits) vr += h;
            row.violation_rate = vr / double(hits.size());
            row.dq_pvalue = dq_test(hits, vf, alphas[ai]).pvalue;
            out.dq.push_back(row);
        }
    }
    return out;
}

} // namespace rsvol
