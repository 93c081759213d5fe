#pragma once

// Test-side oracles: quadrature, numeric mixture densities, grid CDFs,
// Kolmogorov-Smirnov and chi-square goodness-of-fit checks, and moment
// summaries with Monte Carlo standard errors. These stay independent of the
// library code paths they are used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "rsvol/innovations.hpp"
#include "rsvol/prob.hpp"

namespace testutil {

// --- adaptive Simpson -------------------------------------------------------

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                           double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

// Pre-panelled adaptive Simpson: the initial split keeps narrow features
// from being skipped over on wide intervals.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int depth = 48, int panels = 32) {
    double total = 0.0;
    const double step = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
        const double lo = a + k * step;
        const double hi = (k + 1 == panels) ? b : lo + step;
        const double fa = f(lo);
        const double fb = f(hi);
        const double fm = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += detail::simpson_step(f, lo, hi, fa, fm, fb, whole, tol / panels, depth);
    }
    return total;
}

// --- Gauss-Legendre ----------------------------------------------------------

struct GaussLegendre {
    std::vector<double> x, w;  // nodes and weights on (-1, 1)

    explicit GaussLegendre(std::size_t n) : x(n), w(n) {
        for (std::size_t i = 0; i < n; ++i) {
            double z = std::cos(M_PI * (double(i) + 0.75) / (double(n) + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * z * p1 - double(j) * p2) / double(j + 1);
                }
                const double dp = double(n) * (z * p0 - p1) / (z * z - 1.0);
                const double z1 = z;
                z = z1 - p0 / dp;
                if (std::fabs(z - z1) < 1e-15) break;
            }
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - double(j) * p2) / double(j + 1);
            }
            const double dp = double(n) * (z * p0 - p1) / (z * z - 1.0);
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }

    double integrate(const std::function<double(double)>& f, double a, double b) const {
        const double c = 0.5 * (b - a);
        const double d = 0.5 * (b + a);
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * f(c * x[i] + d);
        return c * acc;
    }
};

// --- numeric mixture densities ----------------------------------------------

// Azzalini skew-normal component of the AZ construction (standardized
// hidden-truncation form, before the IG scale mixing).
inline double az_sn_density(double w, double delta) {
    const double c = rsvol::half_normal_mean();
    const double c2 = c * c;
    const double scale = std::sqrt(1.0 - c2 * delta * delta);
    const double v = w * scale + delta * c;
    const double alpha =
        std::fabs(delta) < 1e-14 ? 0.0 : delta / std::sqrt(1.0 - delta * delta);
    return scale * 2.0 * rsvol::norm_pdf(v) * rsvol::norm_cdf(alpha * v);
}

// Gamma(nu/2, rate nu/2) precision integration grid for the IG mixture:
// lambda = 1/g.
struct IgMixture {
    std::vector<double> g, w;  // nodes and gamma-density weights

    IgMixture(double nu, std::size_t nodes = 400) {
        const GaussLegendre gl(nodes);
        const double shape = 0.5 * nu;
        const double rate = 0.5 * nu;
        const double sd = std::sqrt(shape) / rate;
        const double hi = shape / rate + 14.0 * sd + 10.0 / nu;
        const double lo = std::max(1e-10, shape / rate - 14.0 * sd);
        g.resize(nodes);
        w.resize(nodes);
        const double c = 0.5 * (hi - lo);
        const double d = 0.5 * (hi + lo);
        for (std::size_t i = 0; i < nodes; ++i) {
            const double gi = c * gl.x[i] + d;
            g[i] = gi;
            const double logpdf = shape * std::log(rate) - std::lgamma(shape) +
                                  (shape - 1.0) * std::log(gi) - rate * gi;
            w[i] = c * gl.w[i] * std::exp(logpdf);
        }
    }
};

// Standardized AZ skew-t density by quadrature over the mixing variable.
inline double az_st_density(double x, double delta, double nu, const IgMixture& mix) {
    const double ml = rsvol::mu_lambda(nu);
    double acc = 0.0;
    for (std::size_t i = 0; i < mix.g.size(); ++i) {
        const double scale = std::sqrt(ml * mix.g[i]);  // 1/sqrt(lambda/mu_lambda)
        acc += mix.w[i] * scale * az_sn_density(x * scale, delta);
    }
    return acc;
}

// Standardized GH skew-t density by quadrature over the mixing variable.
inline double gh_st_density(double x, double beta, double nu, const IgMixture& mix) {
    const double ml = rsvol::mu_lambda(nu);
    const double s2 = beta * beta * rsvol::sigma_lambda2(nu) + ml;
    const double s = std::sqrt(s2);
    double acc = 0.0;
    for (std::size_t i = 0; i < mix.g.size(); ++i) {
        const double lam = 1.0 / mix.g[i];
        const double mean = beta * (lam - ml) / s;
        const double var = lam / s2;
        acc += mix.w[i] * std::exp(rsvol::norm_logpdf(x, mean, var));
    }
    return acc;
}

// Standardized Student t density.
inline double t_std_density(double x, double nu) {
    const double s = std::sqrt(rsvol::mu_lambda(nu));
    return s * rsvol::student_t_pdf(x * s, nu);
}

// --- grid CDF ----------------------------------------------------------------

struct GridCdf {
    std::vector<double> x, cdf;

    GridCdf(const std::function<double(double)>& pdf, double lo, double hi, std::size_t n = 8192) {
        x.resize(n);
        cdf.resize(n);
        const double step = (hi - lo) / double(n - 1);
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = lo + step * double(i);
            p[i] = pdf(x[i]);
        }
        cdf[0] = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            cdf[i] = cdf[i - 1] + 0.5 * (p[i] + p[i - 1]) * step;
        }
        const double total = cdf[n - 1];
        for (auto& c : cdf) c /= total;
    }

    double operator()(double v) const {
        if (v <= x.front()) return 0.0;
        if (v >= x.back()) return 1.0;
        const auto it = std::upper_bound(x.begin(), x.end(), v);
        const std::size_t i = std::size_t(it - x.begin());
        const double t = (v - x[i - 1]) / (x[i] - x[i - 1]);
        return cdf[i - 1] + t * (cdf[i] - cdf[i - 1]);
    }

    double quantile(double p) const {
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), p);
        if (it == cdf.begin()) return x.front();
        if (it == cdf.end()) return x.back();
        const std::size_t i = std::size_t(it - cdf.begin());
        const double t = (p - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
        return x[i - 1] + t * (x[i] - x[i - 1]);
    }
};

// --- KS tests ------------------------------------------------------------------

inline double ks_statistic(std::vector<double> draws, const std::function<double(double)>& cdf) {
    std::sort(draws.begin(), draws.end());
    const double n = double(draws.size());
    double d = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const double f = cdf(draws[i]);
        d = std::max(d, std::fabs(double(i + 1) / n - f));
        d = std::max(d, std::fabs(f - double(i) / n));
    }
    return d;
}

inline double ks_pvalue_one_sample(double d, std::size_t n) {
    return rsvol::kolmogorov_sf(d * std::sqrt(double(n)));
}

inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        d = std::max(d, std::fabs(double(i) / double(a.size()) - double(j) / double(b.size())));
    }
    const double ne = double(a.size()) * double(b.size()) / double(a.size() + b.size());
    return rsvol::kolmogorov_sf(d * std::sqrt(ne));
}

// --- chi-square goodness of fit -------------------------------------------------

// Equiprobable-bin chi-square p-value of draws against a grid CDF.
inline double chi2_gof_pvalue(const std::vector<double>& draws, const GridCdf& cdf,
                              std::size_t bins = 20) {
    std::vector<double> edges(bins - 1);
    for (std::size_t k = 1; k < bins; ++k) {
        edges[k - 1] = cdf.quantile(double(k) / double(bins));
    }
    std::vector<std::size_t> count(bins, 0);
    for (const double v : draws) {
        const std::size_t b =
            std::size_t(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
        ++count[b];
    }
    const double expected = double(draws.size()) / double(bins);
    double stat = 0.0;
    for (const std::size_t c : count) {
        stat += (double(c) - expected) * (double(c) - expected) / expected;
    }
    return rsvol::chi2_sf(stat, double(bins - 1));
}

// --- moment summaries ------------------------------------------------------------

struct Moments {
    double mean = 0.0, var = 0.0, m3 = 0.0, m4 = 0.0;  // raw third/fourth moments
    double se_mean = 0.0, se_var = 0.0, se_m3 = 0.0, se_m4 = 0.0;
    std::size_t n = 0;
};

inline Moments moments(const std::vector<double>& v) {
    Moments m;
    m.n = v.size();
    const double n = double(v.size());
    double s1 = 0.0;
    for (const double x : v) s1 += x;
    m.mean = s1 / n;
    double s2 = 0.0, s3 = 0.0, s4 = 0.0, s6 = 0.0, s8 = 0.0;
    for (const double x : v) {
        const double d = x - m.mean;
        s2 += d * d;
        s3 += x * x * x;
        s4 += x * x * x * x;
        s6 += x * x * x * x * x * x;
        s8 += x * x * x * x * x * x * x * x;
    }
    m.var = s2 / (n - 1.0);
    m.m3 = s3 / n;
    m.m4 = s4 / n;
    double sd2 = 0.0;
    for (const double x : v) {
        const double d = x - m.mean;
        sd2 += (d * d - m.var) * (d * d - m.var);
    }
    m.se_mean = std::sqrt(m.var / n);
    m.se_var = std::sqrt(sd2 / n / n);
    m.se_m3 = std::sqrt(std::max(s6 / n - m.m3 * m.m3, 0.0) / n);
    m.se_m4 = std::sqrt(std::max(s8 / n - m.m4 * m.m4, 0.0) / n);
    return m;
}

} // namespace testutil
