#pragma once

// Standardized return innovations: normal, Student t, GH skew-t,
// Azzalini-type skew normal/t (hidden truncation), Fernandez-Steel skew
// normal/t (two-piece). Densities, samplers and moment identities.
//
// Every family is standardized to mean 0, variance 1:
//   t:      eps = z sqrt(lambda / mu_lambda)
//   GH-ST:  eps = (beta (lambda - mu_lambda) + sqrt(lambda) z) / s,
//           s^2 = beta^2 sigma_lambda^2 + mu_lambda
//   AZ:     eps = (delta (z0 - c) + sqrt(1-delta^2) z) / sqrt(1 - c^2 delta^2)
//           (times sqrt(lambda / mu_lambda) for the t version)
//   FS:     eps = (w - mu_star) / sigma_star, w two-piece t (or normal)
// with lambda ~ IG(nu/2, nu/2), z ~ N(0,1), z0 ~ half-normal, c = E[z0].

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "rsvol/prob.hpp"
#include "rsvol/rng.hpp"

namespace rsvol {

enum class Family {
    normal,
    student_t,
    gh_skew_t,
    az_skew_normal,
    az_skew_t,
    fs_skew_normal,
    fs_skew_t,
};

inline bool family_has_lambda(Family f) {
    return f == Family::student_t || f == Family::gh_skew_t || f == Family::az_skew_t;
}

inline bool family_has_z0(Family f) {
    return f == Family::az_skew_normal || f == Family::az_skew_t;
}

inline bool family_is_fs(Family f) {
    return f == Family::fs_skew_normal || f == Family::fs_skew_t;
}

// c = E[z0] for z0 ~ half-normal.
inline double half_normal_mean() { return std::sqrt(2.0 / M_PI); }

// E[lambda] = nu/(nu-2) for lambda ~ IG(nu/2, nu/2).
inline double mu_lambda(double nu) {
    if (!(nu > 2.0)) throw std::domain_error("mu_lambda: requires nu > 2");
    return nu / (nu - 2.0);
}

// Var[lambda] = 2 nu^2 / ((nu-2)^2 (nu-4)).
inline double sigma_lambda2(double nu) {
    if (!(nu > 4.0)) throw std::domain_error("sigma_lambda2: requires nu > 4");
    return 2.0 * nu * nu / ((nu - 2.0) * (nu - 2.0) * (nu - 4.0));
}

// E[lambda^{m/2}] = (nu/2)^{m/2} Gamma((nu-m)/2) / Gamma(nu/2), nu > m.
inline double inv_gamma_half_moment(double nu, int m) {
    if (!(nu > static_cast<double>(m))) {
        throw std::domain_error("inv_gamma_half_moment: requires nu > m");
    }
    return std::exp(0.5 * m * std::log(0.5 * nu) + std::lgamma(0.5 * (nu - m)) -
                    std::lgamma(0.5 * nu));
}

// k(delta) = sqrt((1-delta^2)/(1-c^2 delta^2)), the AZ scale factor.
inline double az_k(double delta) {
    const double c2 = 2.0 / M_PI;
    return std::sqrt((1.0 - delta * delta) / (1.0 - c2 * delta * delta));
}

// --- Fernandez-Steel machinery ------------------------------------------

// Normalizing constant of the standard Student t density.
inline double fs_cnu(double nu) {
    return std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)) /
           (std::sqrt(M_PI) * std::sqrt(nu));
}

inline double student_t_pdf(double x, double nu) {
    return fs_cnu(nu) * std::pow(1.0 + x * x / nu, -0.5 * (nu + 1.0));
}

inline double student_t_logpdf(double x, double nu) {
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(M_PI * nu) -
           0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

// M1 = 2 c_nu nu / (nu - 1); M2 = nu / (nu - 2). Normal limits: sqrt(2/pi), 1.
inline double fs_m1(double nu) { return 2.0 * fs_cnu(nu) * nu / (nu - 1.0); }
inline double fs_m2(double nu) { return nu / (nu - 2.0); }
inline double fs_m1_normal() { return std::sqrt(2.0 / M_PI); }
inline double fs_m2_normal() { return 1.0; }

struct FsMoments {
    double mean;   // mu_star
    double sd;     // sigma_star
};

inline FsMoments fs_moments(double gamma, double nu) {
    if (!(gamma > 0.0)) throw std::domain_error("fs_moments: gamma <= 0");
    if (!(nu > 2.0)) throw std::domain_error("fs_moments: nu <= 2");
    const double gi = 1.0 / gamma;
    const double m1 = fs_m1(nu);
    const double mean = m1 * (gamma - gi);
    const double var = fs_m2(nu) * (gamma * gamma * gamma + gi * gi * gi) / (gamma + gi) -
                       mean * mean;
    return {mean, std::sqrt(var)};
}

inline FsMoments fs_moments_normal(double gamma) {
    if (!(gamma > 0.0)) throw std::domain_error("fs_moments_normal: gamma <= 0");
    const double gi = 1.0 / gamma;
    const double mean = fs_m1_normal() * (gamma - gi);
    const double var = (gamma * gamma * gamma + gi * gi * gi) / (gamma + gi) - mean * mean;
    return {mean, std::sqrt(var)};
}

// Two-piece skew-t density p_T(w | gamma, nu).
inline double fs_density(double w, double gamma, double nu) {
    if (!(gamma > 0.0)) throw std::domain_error("fs_density: gamma <= 0");
    if (!(nu > 2.0)) throw std::domain_error("fs_density: nu <= 2");
    const double scale = 2.0 / (gamma + 1.0 / gamma);
    return scale * (w >= 0.0 ? student_t_pdf(w / gamma, nu) : student_t_pdf(gamma * w, nu));
}

// Standardized two-piece skew-t density q_T(w* | gamma, nu).
inline double fs_standardized_density(double wstar, double gamma, double nu) {
    const FsMoments m = fs_moments(gamma, nu);
    const double w = m.sd * wstar + m.mean;
    return m.sd * fs_density(w, gamma, nu);
}

inline double fs_standardized_logdensity(double wstar, double gamma, double nu) {
    const FsMoments m = fs_moments(gamma, nu);
    const double w = m.sd * wstar + m.mean;
    const double arg = (w >= 0.0) ? w / gamma : gamma * w;
    return std::log(m.sd) + std::log(2.0 / (gamma + 1.0 / gamma)) + student_t_logpdf(arg, nu);
}

// q_N: f_T replaced by the standard normal density.
inline double fs_normal_density(double w, double gamma) {
    if (!(gamma > 0.0)) throw std::domain_error("fs_normal_density: gamma <= 0");
    const double scale = 2.0 / (gamma + 1.0 / gamma);
    return scale * (w >= 0.0 ? norm_pdf(w / gamma) : norm_pdf(gamma * w));
}

inline double fs_standardized_normal_density(double wstar, double gamma) {
    const FsMoments m = fs_moments_normal(gamma);
    const double w = m.sd * wstar + m.mean;
    return m.sd * fs_normal_density(w, gamma);
}

inline double fs_standardized_normal_logdensity(double wstar, double gamma) {
    const FsMoments m = fs_moments_normal(gamma);
    const double w = m.sd * wstar + m.mean;
    const double arg = (w >= 0.0) ? w / gamma : gamma * w;
    return std::log(m.sd) + std::log(2.0 / (gamma + 1.0 / gamma)) - 0.5 * kLog2Pi -
           0.5 * arg * arg;
}

// --- Specification -------------------------------------------------------

struct InnovationSpec {
    Family family = Family::normal;
    double nu = 10.0;      // dof, t-based families (> 2; > 4 for GH)
    double beta = 0.0;     // GH skewness
    double delta = 0.0;    // AZ skewness, |delta| < 1
    double gamma = 1.0;    // FS skewness, > 0

    void validate() const {
        switch (family) {
        case Family::normal:
        case Family::az_skew_normal:
        case Family::fs_skew_normal:
            break;
        case Family::student_t:
        case Family::az_skew_t:
        case Family::fs_skew_t:
            if (!(nu > 2.0)) throw std::domain_error("InnovationSpec: nu must exceed 2");
            break;
        case Family::gh_skew_t:
            if (!(nu > 4.0)) throw std::domain_error("InnovationSpec: GH skew-t needs nu > 4");
            break;
        }
        if (family == Family::az_skew_normal || family == Family::az_skew_t) {
            if (!(std::fabs(delta) < 1.0))
                throw std::domain_error("InnovationSpec: |delta| must be below 1");
        }
        if (family_is_fs(family)) {
            if (!(gamma > 0.0)) throw std::domain_error("InnovationSpec: gamma must be positive");
        }
    }
};

struct InnovationDraw {
    double eps = 0.0;
    std::optional<double> z;       // normal component, when one exists
    std::optional<double> lambda;  // IG mixing variable
    std::optional<double> z0;      // half-normal truncation variable
};

// Draws eps with the auxiliaries used in its construction, so the caller
// can couple eta to the same z.
inline InnovationDraw draw_innovation(const InnovationSpec& spec, Rng& rng) {
    spec.validate();
    InnovationDraw d;
    switch (spec.family) {
    case Family::normal: {
        d.z = rng.normal();
        d.eps = *d.z;
        break;
    }
    case Family::student_t: {
        d.z = rng.normal();
        d.lambda = rng.inv_gamma(0.5 * spec.nu, 0.5 * spec.nu);
        d.eps = *d.z * std::sqrt(*d.lambda / mu_lambda(spec.nu));
        break;
    }
    case Family::gh_skew_t: {
        d.z = rng.normal();
        d.lambda = rng.inv_gamma(0.5 * spec.nu, 0.5 * spec.nu);
        const double ml = mu_lambda(spec.nu);
        const double s = std::sqrt(spec.beta * spec.beta * sigma_lambda2(spec.nu) + ml);
        d.eps = (spec.beta * (*d.lambda - ml) + std::sqrt(*d.lambda) * *d.z) / s;
        break;
    }
    case Family::az_skew_normal:
    case Family::az_skew_t: {
        d.z = rng.normal();
        d.z0 = rng.half_normal();
        const double c = half_normal_mean();
        const double denom = std::sqrt(1.0 - c * c * spec.delta * spec.delta);
        double eps = (spec.delta * (*d.z0 - c) +
                      std::sqrt(1.0 - spec.delta * spec.delta) * *d.z) / denom;
        if (spec.family == Family::az_skew_t) {
            d.lambda = rng.inv_gamma(0.5 * spec.nu, 0.5 * spec.nu);
            eps *= std::sqrt(*d.lambda / mu_lambda(spec.nu));
        }
        d.eps = eps;
        break;
    }
    case Family::fs_skew_normal:
    case Family::fs_skew_t: {
        const bool is_t = spec.family == Family::fs_skew_t;
        double mag;
        if (is_t) {
            const double lam = rng.inv_gamma(0.5 * spec.nu, 0.5 * spec.nu);
            mag = std::fabs(rng.normal() * std::sqrt(lam));
        } else {
            mag = rng.half_normal();
        }
        const double g2 = spec.gamma * spec.gamma;
        const double w = (rng.uniform() < g2 / (1.0 + g2)) ? mag * spec.gamma
                                                           : -mag / spec.gamma;
        const FsMoments m = is_t ? fs_moments(spec.gamma, spec.nu)
                                 : fs_moments_normal(spec.gamma);
        d.eps = (w - m.mean) / m.sd;
        break;
    }
    }
    return d;
}

// Closed-form E[eps^3], E[eps^4] for the AZ skew-t (delta, nu).
struct AzMoments {
    double m3;
    double m4;
};

inline AzMoments az_moments(double delta, double nu) {
    if (!(nu > 4.0)) throw std::domain_error("az_moments: fourth moment needs nu > 4");
    if (!(std::fabs(delta) < 1.0)) throw std::domain_error("az_moments: |delta| >= 1");
    const double c = half_normal_mean();
    const double c2 = c * c;
    const double d2 = delta * delta;
    const double denom = 1.0 - c2 * d2;
    const double m3 = 0.5 * (4.0 - M_PI) * (c2 * c) * (d2 * delta) / std::pow(denom, 1.5) *
                      std::pow(0.5 * (nu - 2.0), 1.5) *
                      std::exp(std::lgamma(0.5 * (nu - 3.0)) - std::lgamma(0.5 * nu));
    const double m4 = (3.0 + 2.0 * (M_PI - 3.0) * c2 * c2 * d2 * d2 / (denom * denom)) *
                      (nu - 2.0) / (nu - 4.0);
    return {m3, m4};
}

inline double az_third_moment(double delta, double nu) {
    if (!(nu > 3.0)) throw std::domain_error("az_third_moment: needs nu > 3");
    const double c = half_normal_mean();
    const double c2 = c * c;
    const double d2 = delta * delta;
    const double denom = 1.0 - c2 * d2;
    return 0.5 * (4.0 - M_PI) * (c2 * c) * (d2 * delta) / std::pow(denom, 1.5) *
           std::pow(0.5 * (nu - 2.0), 1.5) *
           std::exp(std::lgamma(0.5 * (nu - 3.0)) - std::lgamma(0.5 * nu));
}

// Family-specific Corr[eps_t, eta_t] implied by leverage parameter rho.
inline double corr_eps_eta(const InnovationSpec& spec, double rho) {
    spec.validate();
    if (!(std::fabs(rho) < 1.0)) throw std::domain_error("corr_eps_eta: |rho| >= 1");
    switch (spec.family) {
    case Family::normal:
        return rho;
    case Family::student_t:
        return inv_gamma_half_moment(spec.nu, 1) / std::sqrt(mu_lambda(spec.nu)) * rho;
    case Family::gh_skew_t: {
        const double s2 = spec.beta * spec.beta * sigma_lambda2(spec.nu) + mu_lambda(spec.nu);
        return inv_gamma_half_moment(spec.nu, 1) / std::sqrt(s2) * rho;
    }
    case Family::az_skew_normal:
        return az_k(spec.delta) * rho;
    case Family::az_skew_t: {
        const double c2 = 2.0 / M_PI;
        const double d2 = spec.delta * spec.delta;
        return std::sqrt((1.0 - d2) / ((1.0 - c2 * d2) * mu_lambda(spec.nu))) *
               inv_gamma_half_moment(spec.nu, 1) * rho;
    }
    case Family::fs_skew_normal:
    case Family::fs_skew_t:
        return rho;
    }
    return rho;
}

// Monte Carlo density of the standardized GH skew-t by averaging the
// conditional normal over IG(nu/2, nu/2) mixing draws. Diagnostics only.
inline double gh_density_mc(double x, double beta, double nu, std::size_t ndraw, Rng& rng) {
    if (!(nu > 4.0)) throw std::domain_error("gh_density_mc: needs nu > 4");
    const double ml = mu_lambda(nu);
    const double s = std::sqrt(beta * beta * sigma_lambda2(nu) + ml);
    double acc = 0.0;
    for (std::size_t i = 0; i < ndraw; ++i) {
        const double lam = rng.inv_gamma(0.5 * nu, 0.5 * nu);
        const double mean = beta * (lam - ml) / s;
        const double sd = std::sqrt(lam) / s;
        acc += std::exp(norm_logpdf(x, mean, sd * sd));
    }
    return acc / static_cast<double>(ndraw);
}

} // namespace rsvol
