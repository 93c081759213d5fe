#pragma once

// Model definitions for the SV / realized-SV family:
//   x_t = xi + h_t + u_t                  (realized measurement, RSV only)
//   y_t = eps_t exp(h_t / 2)
//   h_{t+1} = mu + phi (h_t - mu) + eta_t
//   h_1 ~ N(mu, sigma_eta^2 / (1 - phi^2))
// with eta_t | z_t ~ N(rho sigma_eta z_t, (1-rho^2) sigma_eta^2), where z_t
// is the innovation's normal component (eps_t itself for the FS families).
//
// Everything here evaluates or simulates the exact joint density the MCMC
// modules target; samplers are tested against log_joint differences.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsvol/innovations.hpp"
#include "rsvol/prob.hpp"
#include "rsvol/rng.hpp"

namespace rsvol {

inline constexpr double kNuFloor = 2.001;    // t-based families
inline constexpr double kNuFloorGh = 4.001;  // GH skew-t (needs nu > 4)

inline double nu_floor(Family f) { return f == Family::gh_skew_t ? kNuFloorGh : kNuFloor; }

struct ModelId {
    bool realized = true;  // false: plain SV (x equation disabled)
    Family family = Family::normal;

    bool operator==(const ModelId&) const = default;
};

inline std::string family_code(Family f) {
    switch (f) {
    case Family::normal: return "N";
    case Family::student_t: return "T";
    case Family::gh_skew_t: return "GH-ST";
    case Family::az_skew_normal: return "AZ-SN";
    case Family::az_skew_t: return "AZ-ST";
    case Family::fs_skew_normal: return "FS-SN";
    case Family::fs_skew_t: return "FS-ST";
    }
    return "?";
}

inline std::string to_string(const ModelId& m) {
    return (m.realized ? std::string("RSV-") : std::string("SV-")) + family_code(m.family);
}

inline ModelId parse_model_id(const std::string& s) {
    ModelId m;
    std::string rest;
    if (s.rfind("RSV-", 0) == 0) {
        m.realized = true;
        rest = s.substr(4);
    } else if (s.rfind("SV-", 0) == 0) {
        m.realized = false;
        rest = s.substr(3);
    } else {
        throw std::invalid_argument("unknown model id: " + s);
    }
    if (rest == "N") m.family = Family::normal;
    else if (rest == "T") m.family = Family::student_t;
    else if (rest == "GH-ST") m.family = Family::gh_skew_t;
    else if (rest == "AZ-SN") m.family = Family::az_skew_normal;
    else if (rest == "AZ-ST") m.family = Family::az_skew_t;
    else if (rest == "FS-SN") m.family = Family::fs_skew_normal;
    else if (rest == "FS-ST") m.family = Family::fs_skew_t;
    else throw std::invalid_argument("unknown model id: " + s);
    return m;
}

inline const std::vector<std::string>& all_model_ids() {
    static const std::vector<std::string> ids = {
        "SV-N",  "SV-T",  "SV-GH-ST",  "SV-AZ-SN",  "SV-AZ-ST",  "SV-FS-SN",  "SV-FS-ST",
        "RSV-N", "RSV-T", "RSV-GH-ST", "RSV-AZ-SN", "RSV-AZ-ST", "RSV-FS-SN", "RSV-FS-ST"};
    return ids;
}

struct ModelParams {
    double mu = 0.0;
    double phi = 0.95;
    double rho = 0.0;
    double sigma_eta2 = 0.04;
    double xi = 0.0;         // RV bias adjustment (log scale)
    double sigma_u2 = 0.04;  // measurement noise variance
    InnovationSpec shape;

    bool in_support(bool realized) const {
        if (!(std::fabs(phi) < 1.0)) return false;
        if (!(std::fabs(rho) < 1.0)) return false;
        if (!(sigma_eta2 > 0.0)) return false;
        if (realized && !(sigma_u2 > 0.0)) return false;
        switch (shape.family) {
        case Family::student_t:
        case Family::az_skew_t:
        case Family::fs_skew_t:
            if (!(shape.nu > kNuFloor)) return false;
            break;
        case Family::gh_skew_t:
            if (!(shape.nu > kNuFloorGh)) return false;
            break;
        default:
            break;
        }
        if (family_has_z0(shape.family) && !(std::fabs(shape.delta) < 1.0)) return false;
        if (family_is_fs(shape.family) && !(shape.gamma > 0.0)) return false;
        return true;
    }
};

// Priors as in the estimation setup: normal for mu and xi, transformed beta
// for phi, rho and delta, inverse gamma for the variances, gamma for nu and
// gamma(FS), normal for beta(GH).
struct PriorSpec {
    double mu_mean = 0.0, mu_var = 100.0;
    double phi_a = 1.0, phi_b = 1.0;
    double rho_a = 1.0, rho_b = 1.0;
    double eta_shape = 0.05, eta_scale = 0.05;  // IG(n_eta/2, S_eta/2)
    double xi_mean = 0.0, xi_var = 10.0;
    double u_shape = 2.5, u_scale = 0.1;        // IG(n_u/2, S_u/2)
    double nu_shape = 5.0, nu_rate = 0.5;
    double beta_var = 1.0;                      // N(0, s_beta^2)
    double delta_a = 1.0, delta_b = 1.0;
    double gamma_shape = 1.0, gamma_rate = 1.0;
};

struct Dataset {
    std::vector<std::string> dates;
    std::vector<double> y;                     // daily returns
    std::optional<std::vector<double>> x;      // log realized measure

    std::size_t n() const { return y.size(); }
    bool has_rv() const { return x.has_value(); }

    Dataset window(std::size_t begin, std::size_t len) const {
        Dataset w;
        w.dates.assign(dates.begin() + begin, dates.begin() + begin + len);
        w.y.assign(y.begin() + begin, y.begin() + begin + len);
        if (x) w.x.emplace(x->begin() + begin, x->begin() + begin + len);
        return w;
    }
};

struct LatentState {
    std::vector<double> h;
    std::vector<double> lambda;  // per-t IG mixing variables (t families)
    std::vector<double> z0;      // per-t truncated normals (AZ families)
};

namespace detail {

struct AB {
    double a;
    double b;
};

// eps_t = A + B z_t given the latent mixing variables; covers every
// non-FS family.
inline AB innovation_ab(const InnovationSpec& s, double lambda, double z0) {
    switch (s.family) {
    case Family::normal:
        return {0.0, 1.0};
    case Family::student_t:
        return {0.0, std::sqrt(lambda / mu_lambda(s.nu))};
    case Family::az_skew_normal: {
        const double c = half_normal_mean();
        const double denom = std::sqrt(1.0 - c * c * s.delta * s.delta);
        return {s.delta * (z0 - c) / denom, az_k(s.delta)};
    }
    case Family::az_skew_t: {
        const double c = half_normal_mean();
        const double denom = std::sqrt(1.0 - c * c * s.delta * s.delta);
        const double r = std::sqrt(lambda / mu_lambda(s.nu));
        return {s.delta * (z0 - c) / denom * r, az_k(s.delta) * r};
    }
    case Family::gh_skew_t: {
        const double ml = mu_lambda(s.nu);
        const double sc = std::sqrt(s.beta * s.beta * sigma_lambda2(s.nu) + ml);
        return {s.beta * (lambda - ml) / sc, std::sqrt(lambda) / sc};
    }
    default:
        throw std::logic_error("innovation_ab: FS family has no mixture form");
    }
}

inline double log_ig_pdf(double x, double shape, double scale) {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) -
           scale / x;
}

inline double log_gamma_pdf(double x, double shape, double rate) {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) -
           rate * x;
}

// log density of v where (v+1)/2 ~ Beta(a, b); orientation (1+v)^{a-1}(1-v)^{b-1}.
inline double log_beta_transformed_pdf(double v, double a, double b) {
    if (!(std::fabs(v) < 1.0)) return -std::numeric_limits<double>::infinity();
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return -lbeta + (a - 1.0) * std::log(0.5 * (1.0 + v)) +
           (b - 1.0) * std::log(0.5 * (1.0 - v)) - std::log(2.0);
}

} // namespace detail

// Log prior of the parameter block, exact constants included. The FS
// samplers carry the phi exponents in the opposite orientation; see
// fs_phi_prior_reversed.
inline double log_prior(const ModelId& model, const ModelParams& p, const PriorSpec& pr) {
    if (!p.in_support(model.realized)) return -std::numeric_limits<double>::infinity();
    const bool fs = family_is_fs(p.shape.family);
    double lp = norm_logpdf(p.mu, pr.mu_mean, pr.mu_var);
    lp += fs ? detail::log_beta_transformed_pdf(p.phi, pr.phi_b, pr.phi_a)
             : detail::log_beta_transformed_pdf(p.phi, pr.phi_a, pr.phi_b);
    lp += detail::log_beta_transformed_pdf(p.rho, pr.rho_a, pr.rho_b);
    lp += detail::log_ig_pdf(p.sigma_eta2, pr.eta_shape, pr.eta_scale);
    if (model.realized) {
        lp += norm_logpdf(p.xi, pr.xi_mean, pr.xi_var);
        lp += detail::log_ig_pdf(p.sigma_u2, pr.u_shape, pr.u_scale);
    }
    switch (p.shape.family) {
    case Family::student_t:
    case Family::az_skew_t:
    case Family::fs_skew_t:
    case Family::gh_skew_t:
        lp += detail::log_gamma_pdf(p.shape.nu, pr.nu_shape, pr.nu_rate);
        break;
    default:
        break;
    }
    if (p.shape.family == Family::gh_skew_t) lp += norm_logpdf(p.shape.beta, 0.0, pr.beta_var);
    if (family_has_z0(p.shape.family))
        lp += detail::log_beta_transformed_pdf(p.shape.delta, pr.delta_a, pr.delta_b);
    if (fs) lp += detail::log_gamma_pdf(p.shape.gamma, pr.gamma_shape, pr.gamma_rate);
    return lp;
}

struct LogJointParts {
    double likelihood = 0.0;  // data + latent densities given theta
    double prior = 0.0;
    double total() const { return likelihood + prior; }
};

// Joint log density log f(y, x, h, lambda, z0 | theta) + log pi(theta),
// family dispatched. Out-of-support parameters or latents give -inf.
inline LogJointParts log_joint_parts(const ModelId& model, const ModelParams& p,
                                     const LatentState& lat, const Dataset& data,
                                     const PriorSpec& prior) {
    LogJointParts out;
    const double neg_inf = -std::numeric_limits<double>::infinity();
    const std::size_t n = data.n();
    if (n == 0 || lat.h.size() != n) throw std::invalid_argument("log_joint: dimension mismatch");
    if (model.realized && (!data.x || data.x->size() != n))
        throw std::invalid_argument("log_joint: realized model needs x series");
    const bool has_lam = family_has_lambda(p.shape.family);
    const bool has_z0 = family_has_z0(p.shape.family);
    if (has_lam && lat.lambda.size() != n)
        throw std::invalid_argument("log_joint: lambda path size mismatch");
    if (has_z0 && lat.z0.size() != n)
        throw std::invalid_argument("log_joint: z0 path size mismatch");

    out.prior = log_prior(model, p, prior);
    if (!std::isfinite(out.prior)) {
        out.likelihood = 0.0;
        out.prior = neg_inf;
        return out;
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (has_lam && !(lat.lambda[t] > 0.0)) { out.likelihood = neg_inf; return out; }
        if (has_z0 && !(lat.z0[t] > 0.0)) { out.likelihood = neg_inf; return out; }
    }

    const double se2 = p.sigma_eta2;
    const double se = std::sqrt(se2);
    const double cvar = (1.0 - p.rho * p.rho) * se2;
    const bool fs = family_is_fs(p.shape.family);
    double ll = 0.0;

    // h_1 from its stationary law.
    ll += norm_logpdf(lat.h[0], p.mu, se2 / (1.0 - p.phi * p.phi));

    for (std::size_t t = 0; t < n; ++t) {
        const double h = lat.h[t];
        const double u = data.y[t] * std::exp(-0.5 * h);
        double zt;
        if (fs) {
            const double lq = (p.shape.family == Family::fs_skew_t)
                                  ? fs_standardized_logdensity(u, p.shape.gamma, p.shape.nu)
                                  : fs_standardized_normal_logdensity(u, p.shape.gamma);
            ll += lq - 0.5 * h;
            zt = u;  // eta couples to eps directly
        } else {
            const double lam = has_lam ? lat.lambda[t] : 1.0;
            const double z0 = has_z0 ? lat.z0[t] : 0.0;
            const auto ab = detail::innovation_ab(p.shape, lam, z0);
            zt = (u - ab.a) / ab.b;
            ll += -0.5 * kLog2Pi - std::log(ab.b) - 0.5 * zt * zt - 0.5 * h;
        }
        if (t + 1 < n) {
            const double mean = p.mu + p.phi * (lat.h[t] - p.mu) + p.rho * se * zt;
            ll += norm_logpdf(lat.h[t + 1], mean, cvar);
        }
        if (model.realized) {
            ll += norm_logpdf((*data.x)[t], p.xi + h, p.sigma_u2);
        }
        if (has_lam) {
            ll += detail::log_ig_pdf(lat.lambda[t], 0.5 * p.shape.nu, 0.5 * p.shape.nu);
        }
        if (has_z0) {
            ll += std::log(2.0) - 0.5 * kLog2Pi - 0.5 * lat.z0[t] * lat.z0[t];
        }
    }
    out.likelihood = ll;
    return out;
}

inline double log_joint(const ModelId& model, const ModelParams& p, const LatentState& lat,
                        const Dataset& data, const PriorSpec& prior) {
    return log_joint_parts(model, p, lat, data, prior).total();
}

struct SimulationResult {
    Dataset data;
    LatentState latent;
};

// Forward simulation; returns the data and the true latent paths.
inline SimulationResult simulate(const ModelId& model, const ModelParams& p, std::size_t n,
                                 Rng& rng) {
    if (n < 2) throw std::invalid_argument("simulate: n must be at least 2");
    if (!p.in_support(model.realized)) throw std::invalid_argument("simulate: invalid params");
    p.shape.validate();

    SimulationResult r;
    r.data.dates.resize(n);
    r.data.y.resize(n);
    if (model.realized) r.data.x.emplace(n);
    r.latent.h.resize(n);
    const bool has_lam = family_has_lambda(p.shape.family);
    const bool has_z0 = family_has_z0(p.shape.family);
    if (has_lam) r.latent.lambda.resize(n);
    if (has_z0) r.latent.z0.resize(n);

    const double se = std::sqrt(p.sigma_eta2);
    const double csd = se * std::sqrt(1.0 - p.rho * p.rho);
    const bool fs = family_is_fs(p.shape.family);

    double h = p.mu + rng.normal() * se / std::sqrt(1.0 - p.phi * p.phi);
    for (std::size_t t = 0; t < n; ++t) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%06zu", t + 1);
        r.data.dates[t] = buf;
        r.latent.h[t] = h;
        const InnovationDraw d = draw_innovation(p.shape, rng);
        if (has_lam) r.latent.lambda[t] = *d.lambda;
        if (has_z0) r.latent.z0[t] = *d.z0;
        r.data.y[t] = d.eps * std::exp(0.5 * h);
        if (model.realized) {
            (*r.data.x)[t] = p.xi + h + rng.normal() * std::sqrt(p.sigma_u2);
        }
        const double couple = fs ? d.eps : *d.z;
        h = p.mu + p.phi * (h - p.mu) + p.rho * se * couple + csd * rng.normal();
    }
    return r;
}

} // namespace rsvol
