#pragma once

// Persistence of backtest outputs: forecasts_<model>.csv, losses_<pair>.csv,
// gw_matrix.csv, mcs.csv and the run manifest.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsvol/backtest.hpp"
#include "rsvol/io.hpp"

namespace rsvol {

inline void write_eval_csvs(const std::string& dir, const EvalResult& eval) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "gw_matrix.csv");
        out << "measure,model_a,model_b,uncond_stat,uncond_p,cond_stat,cond_p,"
               "cond_indicator,degenerate\n";
        for (const auto& r : eval.gw) {
            out << r.measure << ',' << r.model_a << ',' << r.model_b << ','
                << detail::format_double(r.uncond_stat) << ','
                << detail::format_double(r.uncond_p) << ',' << detail::format_double(r.cond_stat)
                << ',' << detail::format_double(r.cond_p) << ','
                << detail::format_double(r.cond_indicator) << ',' << (r.degenerate ? 1 : 0)
                << '\n';
        }
    }
    {
        std::ofstream out(fs::path(dir) / "mcs.csv");
        out << "measure,model,mcs_pvalue,in_set,level\n";
        for (const auto& r : eval.mcs_rows) {
            out << r.measure << ',' << r.model << ',' << detail::format_double(r.pvalue) << ','
                << (r.in_set ? 1 : 0) << ',' << detail::format_double(r.level) << '\n';
        }
    }
    {
        std::ofstream out(fs::path(dir) / "mean_losses.csv");
        out << "measure,model,mean_loss\n";
        for (const auto& r : eval.means) {
            out << r.measure << ',' << r.model << ',' << detail::format_double(r.mean_loss)
                << '\n';
        }
    }
    {
        std::ofstream out(fs::path(dir) / "dq.csv");
        out << "model,alpha,violation_rate,dq_pvalue\n";
        for (const auto& r : eval.dq) {
            out << r.model << ',' << detail::format_double(r.alpha) << ','
                << detail::format_double(r.violation_rate) << ','
                << detail::format_double(r.dq_pvalue) << '\n';
        }
    }
    // one losses_<a>__vs__<b>.csv per model pair, long format over measures
    std::map<std::pair<std::string, std::string>, std::vector<const PairLossRow*>> by_pair;
    for (const auto& r : eval.pair_losses) by_pair[{r.model_a, r.model_b}].push_back(&r);
    for (const auto& [pair, rows] : by_pair) {
        std::ofstream out(fs::path(dir) / ("losses_" + pair.first + "__vs__" + pair.second +
                                           ".csv"));
        out << "date,measure,loss_a,loss_b,diff\n";
        for (const auto* r : rows) {
            out << r->date << ',' << r->measure << ',' << detail::format_double(r->loss_a) << ','
                << detail::format_double(r->loss_b) << ','
                << detail::format_double(r->loss_a - r->loss_b) << '\n';
        }
    }
}

inline std::string backtest_config_canonical(const BacktestConfig& cfg) {
    std::string s;
    s += "models=";
    for (const auto& m : cfg.models) s += m + ";";
    s += "|window=" + std::to_string(cfg.window);
    s += "|alphas=";
    for (const double a : cfg.alphas) s += alpha_tag(a) + ";";
    s += "|m_pred=" + std::to_string(cfg.m_pred);
    s += "|n_iter=" + std::to_string(cfg.chain.n_iter);
    s += "|n_burn=" + std::to_string(cfg.chain.n_burn);
    s += "|thin=" + std::to_string(cfg.chain.thin);
    s += "|seed=" + std::to_string(cfg.chain.seed);
    s += "|warm=" + std::to_string(cfg.warm_start ? 1 : 0);
    s += "|vol_point=" + cfg.vol_point;
    s += "|proxies=";
    for (const auto& p : cfg.proxies) s += p + ";";
    s += "|rk_bandwidth=" + std::to_string(cfg.rk_bandwidth);
    s += "|mcs=" + std::to_string(cfg.mcs_boot) + "/" + std::to_string(cfg.mcs_block);
    return s;
}

inline void write_backtest_outputs(const BacktestConfig& cfg, const BacktestResult& result,
                                   const EvalResult& eval, double wall_seconds) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    std::vector<std::string> files;
    for (std::size_t mi = 0; mi < result.models.size(); ++mi) {
        const std::string name = "forecasts_" + result.models[mi] + ".csv";
        write_forecasts_csv((fs::path(cfg.out_dir) / name).string(), result.records[mi],
                            result.alphas, result.proxy_names);
        files.push_back(name);
    }
    write_eval_csvs(cfg.out_dir, eval);
    files.insert(files.end(), {"gw_matrix.csv", "mcs.csv", "mean_losses.csv", "dq.csv"});

    nlohmann::json manifest;
    manifest["seed"] = cfg.chain.seed;
    manifest["config"] = {
        {"models", cfg.models},
        {"window", cfg.window},
        {"alphas", cfg.alphas},
        {"m_pred", cfg.m_pred},
        {"n_iter", cfg.chain.n_iter},
        {"n_burn", cfg.chain.n_burn},
        {"thin", cfg.chain.thin},
        {"warm_start", cfg.warm_start},
        {"vol_point", cfg.vol_point},
        {"proxies", result.proxy_names},
        {"rk_bandwidth", cfg.rk_bandwidth},
        {"mcs_boot", cfg.mcs_boot},
        {"mcs_block", cfg.mcs_block},
        {"input_csv", cfg.input_csv},
        {"intraday_csv", cfg.intraday_csv},
    };
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(backtest_config_canonical(cfg))));
    manifest["config_hash"] = hash;
    manifest["wall_time_s"] = wall_seconds;
    manifest["n_forecasts"] = result.records.empty() ? 0 : result.records[0].size();
    manifest["flagged_windows"] = result.flagged_windows;
    manifest["outputs"] = files;
    std::ofstream out(fs::path(cfg.out_dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
}

} // namespace rsvol
