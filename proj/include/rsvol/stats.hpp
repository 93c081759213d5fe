#pragma once

// Descriptive statistics of a return series: moments, Jarque-Bera and
// Ljung-Box p-values. The Ljung-Box statistic is the plain (not
// heteroskedasticity-adjusted) form.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rsvol/errors.hpp"
#include "rsvol/prob.hpp"

namespace rsvol {

struct DescriptiveStats {
    double mean = 0.0;
    double sd = 0.0;
    double skew = 0.0;
    double kurt = 0.0;
    double min = 0.0;
    double max = 0.0;
    double jb_pvalue = 1.0;
    double lb_pvalue = 1.0;  // plain Ljung-Box, lb_lags lags
    std::size_t lb_lags = 10;
};

inline DescriptiveStats descriptive_stats(const std::vector<double>& y, std::size_t lb_lags = 10) {
    const std::size_t n = y.size();
    if (n < 8) throw DataError("descriptive_stats: need at least 8 observations");
    DescriptiveStats s;
    s.lb_lags = lb_lags;
    s.mean = 0.0;
    for (const double v : y) s.mean += v;
    s.mean /= double(n);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    s.min = y[0];
    s.max = y[0];
    for (const double v : y) {
        const double d = v - s.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    m2 /= double(n);
    m3 /= double(n);
    m4 /= double(n);
    if (!(m2 > 0.0)) throw DataError("descriptive_stats: degenerate (constant) series");
    s.sd = std::sqrt(m2 * double(n) / double(n - 1));
    s.skew = m3 / std::pow(m2, 1.5);
    s.kurt = m4 / (m2 * m2);
    const double jb = double(n) * (s.skew * s.skew / 6.0 +
                                   (s.kurt - 3.0) * (s.kurt - 3.0) / 24.0);
    s.jb_pvalue = chi2_sf(jb, 2.0);
    double q = 0.0;
    for (std::size_t k = 1; k <= lb_lags && k < n; ++k) {
        double g = 0.0;
        for (std::size_t t = k; t < n; ++t) g += (y[t] - s.mean) * (y[t - k] - s.mean);
        const double rho = g / (m2 * double(n));
        q += rho * rho / double(n - k);
    }
    q *= double(n) * double(n + 2);
    s.lb_pvalue = chi2_sf(q, double(lb_lags));
    return s;
}

} // namespace rsvol
