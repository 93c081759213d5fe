#pragma once

// MCMC for the Fernandez-Steel families (FS-SN, FS-ST), SV and RSV
// variants. eta couples to eps itself, so the innovation density enters the
// h and shape steps through q_T / q_N directly. gamma and nu move by random
// walks on log gamma and log(nu - 2), adapted toward 30% acceptance during
// burn-in and frozen afterwards.
//
// Sweep order: mu, phi, rho, sigma_eta^2, xi, sigma_u^2, gamma, nu, h.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "rsvol/chain.hpp"
#include "rsvol/mcmc_az.hpp"
#include "rsvol/model.hpp"

namespace rsvol::fs {

using az::GibbsNormal;
using az::IgParams;

inline double log_q(double w, const InnovationSpec& s) {
    return s.family == Family::fs_skew_t ? fs_standardized_logdensity(w, s.gamma, s.nu)
                                         : fs_standardized_normal_logdensity(w, s.gamma);
}

// Prior exponents reversed relative to the AZ-side step: (1-phi)^{a-1/2}(1+phi)^{b-1/2}.
inline double phi_log_k(double phi, double a, double b) {
    if (!(std::fabs(phi) < 1.0)) return -std::numeric_limits<double>::infinity();
    return (a - 0.5) * std::log(1.0 - phi) + (b - 0.5) * std::log(1.0 + phi);
}

inline double phi_log_kernel(double phi, const ModelParams& p, const LatentState& lat,
                             const PriorSpec& prior, const std::vector<double>& eps) {
    if (!(std::fabs(phi) < 1.0)) return -std::numeric_limits<double>::infinity();
    const std::size_t n = lat.h.size();
    const double se2 = p.sigma_eta2;
    const double se = std::sqrt(se2);
    const double cv = 1.0 - p.rho * p.rho;
    double quad = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const double r = lat.h[t + 1] - p.mu - phi * (lat.h[t] - p.mu) - p.rho * se * eps[t];
        quad += r * r;
    }
    const double h1c = lat.h[0] - p.mu;
    return (prior.phi_a - 1.0) * std::log(1.0 - phi) + (prior.phi_b - 1.0) * std::log(1.0 + phi) +
           0.5 * std::log(1.0 - phi * phi) - (1.0 - phi * phi) * h1c * h1c / (2.0 * se2) -
           quad / (2.0 * cv * se2);
}

// rho conditional kernel; the sigma_eta^2-only terms are constants here.
inline double rho_log_kernel(double rho, const az::RhoSigmaStats& s, double se2,
                             const PriorSpec& prior) {
    if (!(std::fabs(rho) < 1.0)) return -std::numeric_limits<double>::infinity();
    const double se = std::sqrt(se2);
    const double cv = 1.0 - rho * rho;
    const double quad = s.sdd - 2.0 * rho * se * s.sdz + rho * rho * se2 * s.szz;
    return (prior.rho_a - 1.0) * std::log(1.0 + rho) + (prior.rho_b - 1.0) * std::log(1.0 - rho) -
           0.5 * (s.n - 1) * std::log(cv) - quad / (2.0 * cv * se2);
}

// IG(n1/2, S1/2) proposal for sigma_eta^2.
inline IgParams sigma_eta2_proposal(const az::RhoSigmaStats& s, double rho,
                                    const PriorSpec& prior) {
    const double cv = 1.0 - rho * rho;
    return {prior.eta_shape + 0.5 * double(s.n), prior.eta_scale + 0.5 * (s.h1c2 + s.sdd / cv)};
}

// gamma and nu conditionals: prior plus the innovation density of every
// standardized residual. O(n) per evaluation.
inline double gamma_log_kernel(double gamma, const ModelParams& p, const PriorSpec& prior,
                               const std::vector<double>& u) {
    if (!(gamma > 0.0)) return -std::numeric_limits<double>::infinity();
    InnovationSpec s = p.shape;
    s.gamma = gamma;
    double val = (prior.gamma_shape - 1.0) * std::log(gamma) - prior.gamma_rate * gamma;
    for (const double w : u) val += log_q(w, s);
    return val;
}

inline double nu_log_kernel(double nu, const ModelParams& p, const PriorSpec& prior,
                            const std::vector<double>& u) {
    if (!(nu > kNuFloor)) return -std::numeric_limits<double>::infinity();
    InnovationSpec s = p.shape;
    s.nu = nu;
    double val = (prior.nu_shape - 1.0) * std::log(nu) - prior.nu_rate * nu;
    for (const double w : u) val += log_q(w, s);
    return val;
}

// Site kernel: every joint term involving h_t; eta couples to eps = u.
inline double h_site_kernel(std::size_t t, double hv, const ModelId& model, const ModelParams& p,
                            const LatentState& lat, const Dataset& data,
                            const std::vector<double>& u) {
    const std::size_t n = lat.h.size();
    const double se2 = p.sigma_eta2;
    const double se = std::sqrt(se2);
    const double cv = (1.0 - p.rho * p.rho) * se2;
    const double ut = data.y[t] * std::exp(-0.5 * hv);
    double val = log_q(ut, p.shape) - 0.5 * hv;
    if (t == 0) {
        val += norm_logpdf(hv, p.mu, se2 / (1.0 - p.phi * p.phi));
    } else {
        const double mean = p.mu + p.phi * (lat.h[t - 1] - p.mu) + p.rho * se * u[t - 1];
        val += norm_logpdf(hv, mean, cv);
    }
    if (t + 1 < n) {
        const double mean = p.mu + p.phi * (hv - p.mu) + p.rho * se * ut;
        val += norm_logpdf(lat.h[t + 1], mean, cv);
    }
    if (model.realized) {
        val += norm_logpdf((*data.x)[t], p.xi + hv, p.sigma_u2);
    }
    return val;
}

class FsSampler {
public:
    FsSampler(const ModelId& model, Dataset data, PriorSpec prior, std::uint64_t seed,
              std::optional<ModelParams> init = std::nullopt)
        : model_(model), data_(std::move(data)), prior_(prior), rng_(seed),
          gamma_adapt_(0.1, 0.3), nu_adapt_(0.1, 0.3) {
        if (!family_is_fs(model.family)) throw ConfigError("FsSampler: needs an FS family");
        if (model_.realized && !data_.has_rv())
            throw DataError("FsSampler: realized model requires an rv series");
        p_ = init ? *init : az::default_init(model_, data_, prior_);
        p_.shape.family = model_.family;
        if (!p_.in_support(model_.realized)) throw ConfigError("FsSampler: init out of support");
        init_h_path();
        u_ = az::compute_u(data_.y, lat_.h);
    }

    void sweep() {
        step_mu();
        step_phi();
        step_rho();
        step_sigma_eta2();
        if (model_.realized) {
            step_xi();
            step_sigma_u2();
        }
        if (sample_gamma_) step_gamma();
        if (model_.family == Family::fs_skew_t) step_nu();
        sweep_h();
    }

    // Holds gamma at its current value (skew fixed; used by reduction checks).
    void set_sample_gamma(bool on) { sample_gamma_ = on; }

    void freeze_adaptation() {
        gamma_adapt_.freeze();
        nu_adapt_.freeze();
    }

    // eps_t | eta_t by independence MH from the innovation law; leaves the
    // conditional data distribution invariant for the getting-it-right test.
    void redraw_data() {
        const std::size_t n = data_.n();
        const double se = std::sqrt(p_.sigma_eta2);
        const double cv = (1.0 - p_.rho * p_.rho) * p_.sigma_eta2;
        for (std::size_t t = 0; t < n; ++t) {
            double eps;
            if (t + 1 < n) {
                const double eta = lat_.h[t + 1] - p_.mu - p_.phi * (lat_.h[t] - p_.mu);
                eps = u_[t];
                for (int rep = 0; rep < 5; ++rep) {
                    const double cand = draw_innovation(p_.shape, rng_).eps;
                    const double la = norm_logpdf(eta, p_.rho * se * cand, cv) -
                                      norm_logpdf(eta, p_.rho * se * eps, cv);
                    if (std::log(rng_.uniform()) < la) eps = cand;
                }
            } else {
                eps = draw_innovation(p_.shape, rng_).eps;
            }
            data_.y[t] = eps * std::exp(0.5 * lat_.h[t]);
            if (model_.realized) {
                (*data_.x)[t] = p_.xi + lat_.h[t] + rng_.normal() * std::sqrt(p_.sigma_u2);
            }
            u_[t] = eps;
        }
    }

    void set_state(const ModelParams& p, const LatentState& lat, Dataset data) {
        p_ = p;
        lat_ = lat;
        data_ = std::move(data);
        u_ = az::compute_u(data_.y, lat_.h);
    }

    const ModelParams& params() const { return p_; }
    const LatentState& latent() const { return lat_; }
    const Dataset& data() const { return data_; }
    Rng& rng() { return rng_; }
    const ChainDiagnostics& diagnostics() const { return diag_; }

    std::map<std::string, double> acceptance_rates() const {
        std::map<std::string, double> r;
        r["phi"] = acc_phi_.rate();
        r["rho"] = acc_rho_.rate();
        r["sigma_eta2"] = acc_sigma_.rate();
        r["gamma"] = acc_gamma_.rate();
        if (model_.family == Family::fs_skew_t) r["nu"] = acc_nu_.rate();
        r["h"] = acc_h_.rate();
        return r;
    }

    double current_log_joint() const {
        LatentState lat = lat_;
        lat.lambda.clear();
        lat.z0.clear();
        return log_joint(model_, p_, lat, data_, prior_);
    }

private:
    void init_h_path() {
        const std::size_t n = data_.n();
        lat_.h.assign(n, 0.0);
        std::vector<double> raw(n);
        for (std::size_t t = 0; t < n; ++t) {
            raw[t] = std::log(std::max(data_.y[t] * data_.y[t], 1e-8));
        }
        for (std::size_t t = 0; t < n; ++t) {
            double acc = 0.0;
            std::size_t cnt = 0;
            for (std::ptrdiff_t k = -2; k <= 2; ++k) {
                const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) + k;
                if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n)) {
                    acc += raw[idx];
                    ++cnt;
                }
            }
            lat_.h[t] = acc / double(cnt);
        }
    }

    void step_mu() {
        const auto g = az::mu_conditional(p_, lat_, prior_, u_);
        p_.mu = rng_.normal(g.mean, std::sqrt(g.var));
    }

    void step_phi() {
        const auto prop = az::phi_proposal(p_, lat_, u_);
        if (!prop.ok) {
            ++diag_.rw_fallbacks;
            const double cand = p_.phi + 0.1 * rng_.normal();
            if (std::fabs(cand) < 1.0) {
                const double la = phi_log_kernel(cand, p_, lat_, prior_, u_) -
                                  phi_log_kernel(p_.phi, p_, lat_, prior_, u_);
                if (std::log(rng_.uniform()) < la) {
                    p_.phi = cand;
                    acc_phi_.record(true);
                    return;
                }
            }
            acc_phi_.record(false);
            return;
        }
        const double cand = rng_.normal(prop.mean, std::sqrt(prop.var));
        if (!(std::fabs(cand) < 1.0)) {
            acc_phi_.record(false);
            return;
        }
        const double la = phi_log_kernel(cand, p_, lat_, prior_, u_) -
                          phi_log_kernel(p_.phi, p_, lat_, prior_, u_) +
                          norm_logpdf(p_.phi, prop.mean, prop.var) -
                          norm_logpdf(cand, prop.mean, prop.var);
        const bool acc = std::log(rng_.uniform()) < la;
        if (acc) p_.phi = cand;
        acc_phi_.record(acc);
    }

    void step_rho() {
        const auto stats = az::make_rho_sigma_stats(p_, lat_, u_);
        auto target = [&](double r) { return rho_log_kernel(r, stats, p_.sigma_eta2, prior_); };
        // moment start (regression of the transition residual on eps) keeps
        // the proposal independent of the current rho
        double r0 = stats.sdz / ((stats.szz + 1e-300) * std::sqrt(p_.sigma_eta2));
        if (!std::isfinite(r0)) r0 = 0.0;
        r0 = std::min(std::max(r0, -0.9), 0.9);
        const auto mode = find_mode_1d(target, r0, -1.0 + 1e-9, 1.0 - 1e-9);
        double cand, la;
        if (mode.ok) {
            const double sd = std::sqrt(mode.var);
            do {
                cand = mode.mode + sd * rng_.student_t(kProposalDof);
            } while (!(std::fabs(cand) < 1.0));
            la = target(cand) - target(p_.rho) + t_proposal_logpdf(p_.rho, mode.mode, sd) -
                 t_proposal_logpdf(cand, mode.mode, sd);
        } else {
            ++diag_.rw_fallbacks;
            cand = rng_.trunc_normal(p_.rho, 0.1, -1.0, 1.0);
            const double zc = std::log(norm_cdf((1.0 - p_.rho) / 0.1) -
                                       norm_cdf((-1.0 - p_.rho) / 0.1));
            const double zp = std::log(norm_cdf((1.0 - cand) / 0.1) -
                                       norm_cdf((-1.0 - cand) / 0.1));
            la = target(cand) - target(p_.rho) + zp - zc;
        }
        const bool acc = std::log(rng_.uniform()) < la;
        if (acc) p_.rho = cand;
        acc_rho_.record(acc);
    }

    void step_sigma_eta2() {
        const auto stats = az::make_rho_sigma_stats(p_, lat_, u_);
        const auto ig = sigma_eta2_proposal(stats, p_.rho, prior_);
        const double cand = rng_.inv_gamma(ig.shape, ig.scale);
        const double la = az::rho_sigma_log_kernel(cand, p_.rho, stats, prior_) -
                          az::rho_sigma_log_kernel(p_.sigma_eta2, p_.rho, stats, prior_) +
                          detail::log_ig_pdf(p_.sigma_eta2, ig.shape, ig.scale) -
                          detail::log_ig_pdf(cand, ig.shape, ig.scale);
        const bool acc = std::log(rng_.uniform()) < la;
        if (acc) p_.sigma_eta2 = cand;
        acc_sigma_.record(acc);
    }

    void step_xi() {
        const auto g = az::xi_conditional(p_, lat_, data_, prior_);
        p_.xi = rng_.normal(g.mean, std::sqrt(g.var));
    }

    void step_sigma_u2() {
        const auto ig = az::sigma_u2_conditional(p_, lat_, data_, prior_);
        p_.sigma_u2 = rng_.inv_gamma(ig.shape, ig.scale);
    }

    void step_gamma() {
        const double wold = std::log(p_.shape.gamma);
        const double wnew = wold + gamma_adapt_.step() * rng_.normal();
        const double cand = std::exp(wnew);
        const double la = gamma_log_kernel(cand, p_, prior_, u_) -
                          gamma_log_kernel(p_.shape.gamma, p_, prior_, u_) + wnew - wold;
        const bool acc = std::log(rng_.uniform()) < la;
        if (acc) p_.shape.gamma = cand;
        acc_gamma_.record(acc);
        gamma_adapt_.update(acc ? 1.0 : 0.0);
    }

    void step_nu() {
        const double wold = std::log(p_.shape.nu - 2.0);
        const double wnew = wold + nu_adapt_.step() * rng_.normal();
        const double cand = 2.0 + std::exp(wnew);
        const double la = nu_log_kernel(cand, p_, prior_, u_) -
                          nu_log_kernel(p_.shape.nu, p_, prior_, u_) + wnew - wold;
        const bool acc = std::log(rng_.uniform()) < la;
        if (acc) p_.shape.nu = cand;
        acc_nu_.record(acc);
        nu_adapt_.update(acc ? 1.0 : 0.0);
    }

    void sweep_h() {
        const std::size_t n = data_.n();
        std::size_t accepts = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const auto prop = az::h_proposal(t, model_, p_, lat_, data_, u_);
            const double cand = rng_.normal(prop.mean, std::sqrt(prop.var));
            const double la = h_site_kernel(t, cand, model_, p_, lat_, data_, u_) -
                              h_site_kernel(t, lat_.h[t], model_, p_, lat_, data_, u_) +
                              norm_logpdf(lat_.h[t], prop.mean, prop.var) -
                              norm_logpdf(cand, prop.mean, prop.var);
            if (std::log(rng_.uniform()) < la) {
                lat_.h[t] = cand;
                u_[t] = data_.y[t] * std::exp(-0.5 * cand);
                ++accepts;
            }
        }
        acc_h_.record_many(accepts, n);
    }

    ModelId model_;
    Dataset data_;
    PriorSpec prior_;
    Rng rng_;
    ModelParams p_;
    LatentState lat_;
    std::vector<double> u_;
    ChainDiagnostics diag_;
    StepAdapter gamma_adapt_, nu_adapt_;
    AcceptCounter acc_phi_, acc_rho_, acc_sigma_, acc_gamma_, acc_nu_, acc_h_;
    bool sample_gamma_ = true;
};

inline PosteriorDraws run_chain_fs(const ModelId& model, const Dataset& data,
                                   const PriorSpec& prior, const ChainConfig& cfg,
                                   std::optional<ModelParams> init = std::nullopt) {
    cfg.validate();
    FsSampler s(model, data, prior, cfg.seed, init);
    PosteriorDraws out;
    out.model = model;
    for (std::size_t it = 0; it < cfg.n_iter; ++it) {
        if (it == cfg.n_burn) s.freeze_adaptation();
        s.sweep();
        if ((it & 0xff) == 0xff || it + 1 == cfg.n_iter) {
            const double lj = s.current_log_joint();
            if (!std::isfinite(lj)) {
                std::ostringstream os;
                os << "chain diverged at iteration " << it << " (model " << to_string(model)
                   << "): log joint " << lj << "; mu=" << s.params().mu
                   << " phi=" << s.params().phi << " gamma=" << s.params().shape.gamma;
                throw NumericalError(os.str());
            }
        }
        if (it >= cfg.n_burn && (it - cfg.n_burn) % cfg.thin == 0) {
            const auto& p = s.params();
            out.mu.push_back(p.mu);
            out.phi.push_back(p.phi);
            out.rho.push_back(p.rho);
            out.sigma_eta2.push_back(p.sigma_eta2);
            if (model.realized) {
                out.xi.push_back(p.xi);
                out.sigma_u2.push_back(p.sigma_u2);
            }
            out.gamma.push_back(p.shape.gamma);
            if (model.family == Family::fs_skew_t) out.nu.push_back(p.shape.nu);
            out.h_last.push_back(s.latent().h.back());
        }
    }
    out.acceptance = s.acceptance_rates();
    out.diag = s.diagnostics();
    return out;
}

// Family dispatch over both sampler modules.
inline PosteriorDraws run_chain(const ModelId& model, const Dataset& data, const PriorSpec& prior,
                                const ChainConfig& cfg,
                                std::optional<ModelParams> init = std::nullopt) {
    return family_is_fs(model.family) ? run_chain_fs(model, data, prior, cfg, init)
                                      : az::run_chain_az(model, data, prior, cfg, init);
}

} // namespace rsvol::fs

namespace rsvol {
using fs::run_chain;
}
