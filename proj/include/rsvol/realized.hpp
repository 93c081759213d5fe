#pragma once

// Daily realized-volatility estimators from intraday returns, plus the
// scaling adjustment that matches the window mean of a proxy to the window
// return variance.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rsvol/errors.hpp"

namespace rsvol {

struct IntradayDay {
    std::vector<double> returns;
};

// RV = sum of squared intraday returns.
inline double realized_variance(const IntradayDay& day) {
    if (day.returns.empty()) throw DataError("realized_variance: empty day");
    double acc = 0.0;
    for (const double r : day.returns) acc += r * r;
    return acc;
}

// Tukey-Hanning_2 weight, k(0) = 1, k(1) = 0.
inline double tukey_hanning2(double x) {
    const double s = std::sin(0.5 * M_PI * (1.0 - x) * (1.0 - x));
    return s * s;
}

// RK = sum_{h=-H}^{H} k(h/(H+1)) gamma_h, with gamma_{-h} = gamma_h handled
// by symmetric summation. H = 0 reduces to RV exactly.
inline double realized_kernel(const IntradayDay& day, std::size_t bandwidth) {
    const std::size_t m = day.returns.size();
    if (m == 0) throw DataError("realized_kernel: empty day");
    if (bandwidth >= m) throw DataError("realized_kernel: bandwidth must be below m");
    double rk = 0.0;
    for (const double r : day.returns) rk += r * r;  // gamma_0, k(0) = 1
    for (std::size_t h = 1; h <= bandwidth; ++h) {
        double g = 0.0;
        for (std::size_t i = h; i < m; ++i) g += day.returns[i] * day.returns[i - h];
        rk += 2.0 * tukey_hanning2(static_cast<double>(h) / static_cast<double>(bandwidth + 1)) * g;
    }
    return rk;
}

// BV = (pi/2) (m/(m-1)) sum |r_i||r_{i-1}|.
inline double bipower(const IntradayDay& day) {
    const std::size_t m = day.returns.size();
    if (m < 2) throw DataError("bipower: needs at least 2 returns");
    double acc = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
        acc += std::fabs(day.returns[i]) * std::fabs(day.returns[i - 1]);
    }
    return 0.5 * M_PI * (static_cast<double>(m) / static_cast<double>(m - 1)) * acc;
}

// MedRV = (pi/(6 - 4 sqrt(3) + pi)) (m/(m-2)) sum med(|r_{i-1}|,|r_i|,|r_{i+1}|)^2.
inline double med_rv(const IntradayDay& day) {
    const std::size_t m = day.returns.size();
    if (m < 3) throw DataError("med_rv: needs at least 3 returns");
    double acc = 0.0;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        double a = std::fabs(day.returns[i - 1]);
        double b = std::fabs(day.returns[i]);
        double c = std::fabs(day.returns[i + 1]);
        const double med = std::max(std::min(a, b), std::min(std::max(a, b), c));
        acc += med * med;
    }
    const double coef = M_PI / (6.0 - 4.0 * std::sqrt(3.0) + M_PI);
    return coef * (static_cast<double>(m) / static_cast<double>(m - 2)) * acc;
}

// c_HL = sum (y - ybar)^2 / sum proxy over the window.
inline double hl_factor(const std::vector<double>& y, const std::vector<double>& proxy) {
    if (y.size() != proxy.size() || y.empty()) throw DataError("hl_factor: length mismatch");
    double ybar = 0.0;
    for (const double v : y) ybar += v;
    ybar /= static_cast<double>(y.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (y[i] - ybar) * (y[i] - ybar);
        den += proxy[i];
    }
    if (!(den > 0.0)) throw DataError("hl_factor: proxy sum must be positive");
    return num / den;
}

inline std::vector<double> hl_adjust(const std::vector<double>& proxy,
                                     const std::vector<double>& y) {
    const double c = hl_factor(y, proxy);
    std::vector<double> out(proxy.size());
    for (std::size_t i = 0; i < proxy.size(); ++i) out[i] = c * proxy[i];
    return out;
}

} // namespace rsvol
