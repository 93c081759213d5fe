#pragma once

// One-day-ahead predictive simulation from posterior draws, and VaR / ES
// extraction from the predictive return sample.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rsvol/chain.hpp"
#include "rsvol/errors.hpp"
#include "rsvol/model.hpp"

namespace rsvol {

struct PredictiveSample {
    double h = 0.0;
    double y = 0.0;
};

namespace detail {

inline InnovationSpec spec_from_draw(const PosteriorDraws& d, std::size_t i) {
    InnovationSpec s;
    s.family = d.model.family;
    if (!d.nu.empty()) s.nu = d.nu[i];
    if (!d.beta.empty()) s.beta = d.beta[i];
    if (!d.delta.empty()) s.delta = d.delta[i];
    if (!d.gamma.empty()) s.gamma = d.gamma[i];
    return s;
}

} // namespace detail

// One predictive (h_{n+1}, y_{n+1}) pair per requested sample, cycling
// through the posterior draws in order:
//   h ~ N(mu + phi (h_n - mu) + rho sigma_eta y_n exp(-h_n/2), (1-rho^2) sigma_eta^2)
//   y = eps exp(h/2), eps a fresh innovation (no leverage coupling forward).
inline std::vector<PredictiveSample> predict_one_step(const PosteriorDraws& draws, double y_n,
                                                      std::size_t m, Rng& rng) {
    const std::size_t ndraws = draws.size();
    if (ndraws == 0) throw ConfigError("predict_one_step: no posterior draws");
    std::vector<PredictiveSample> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t i = j % ndraws;
        const double mu = draws.mu[i];
        const double phi = draws.phi[i];
        const double rho = draws.rho[i];
        const double se = std::sqrt(draws.sigma_eta2[i]);
        const double hn = draws.h_last[i];
        const double mean = mu + phi * (hn - mu) + rho * se * y_n * std::exp(-0.5 * hn);
        const double sd = se * std::sqrt(1.0 - rho * rho);
        const double h = rng.normal(mean, sd);
        const InnovationSpec spec = detail::spec_from_draw(draws, i);
        const double eps = draw_innovation(spec, rng).eps;
        out[j] = {h, eps * std::exp(0.5 * h)};
    }
    return out;
}

struct VarEs {
    double var = 0.0;
    double es = 0.0;
};

// VaR = k-th smallest sample with k = ceil(alpha M); ES = mean of those k.
inline VarEs var_es(std::vector<double> samples, double alpha) {
    if (samples.empty()) throw ConfigError("var_es: empty sample set");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("var_es: alpha outside (0,1)");
    const std::size_t m = samples.size();
    std::size_t k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(m)));
    if (k < 1) k = 1;
    if (k > m) k = m;
    std::nth_element(samples.begin(), samples.begin() + (k - 1), samples.end());
    const double var = samples[k - 1];
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += samples[i];
    return {var, acc / static_cast<double>(k)};
}

struct ForecastRecord {
    std::string date;
    double vol_mean = 0.0;    // predictive mean of exp(h_{n+1})
    double vol_median = 0.0;  // predictive median of exp(h_{n+1})
    std::vector<double> var_alpha;
    std::vector<double> es_alpha;
    double realized_return = 0.0;
    std::vector<double> realized_proxy;  // adjusted proxies, one per proxy id
    bool flagged = false;                // chain diverged; record unusable
};

inline ForecastRecord summarize_forecast(const std::vector<PredictiveSample>& samples,
                                         const std::vector<double>& alphas) {
    ForecastRecord r;
    std::vector<double> vol(samples.size()), ret(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        vol[i] = std::exp(samples[i].h);
        ret[i] = samples[i].y;
    }
    double acc = 0.0;
    for (const double v : vol) acc += v;
    r.vol_mean = acc / static_cast<double>(vol.size());
    std::vector<double> vs = vol;
    const std::size_t mid = vs.size() / 2;
    std::nth_element(vs.begin(), vs.begin() + mid, vs.end());
    if (vs.size() % 2 == 1) {
        r.vol_median = vs[mid];
    } else {
        const double hi = vs[mid];
        std::nth_element(vs.begin(), vs.begin() + (mid - 1), vs.begin() + mid);
        r.vol_median = 0.5 * (vs[mid - 1] + hi);
    }
    for (const double a : alphas) {
        const VarEs ve = var_es(ret, a);
        r.var_alpha.push_back(ve.var);
        r.es_alpha.push_back(ve.es);
    }
    return r;
}

} // namespace rsvol
