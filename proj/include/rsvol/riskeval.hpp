#pragma once

// Loss functions and tests for comparing volatility and tail-risk
// forecasts: QLIKE, the joint VaR/ES FZ0 loss, unconditional and
// conditional predictive-ability tests, the dynamic quantile test, and the
// model confidence set by block-bootstrap elimination.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rsvol/errors.hpp"
#include "rsvol/prob.hpp"
#include "rsvol/rng.hpp"

namespace rsvol {

struct LossSeries {
    std::string model_a, model_b;
    std::vector<double> loss_a, loss_b;

    std::vector<double> diff() const {
        if (loss_a.size() != loss_b.size()) throw DataError("LossSeries: length mismatch");
        std::vector<double> d(loss_a.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = loss_a[i] - loss_b[i];
        return d;
    }
};

// QLIKE(x, f) = x/f - log(x/f) - 1 >= 0, zero iff x == f.
inline double qlike(double proxy, double forecast) {
    if (!(proxy > 0.0) || !(forecast > 0.0)) throw DataError("qlike: inputs must be positive");
    const double r = proxy / forecast;
    return r - std::log(r) - 1.0;
}

// FZ0(y, v, e; alpha) = -1{y<=v}(v-y)/(alpha e) + v/e + log(-e) - 1.
inline double fz0(double y, double v, double e, double alpha) {
    if (!(e < 0.0)) throw DataError("fz0: expected shortfall must be negative");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("fz0: alpha outside (0,1)");
    double loss = v / e + std::log(-e) - 1.0;
    if (y <= v) loss -= (v - y) / (alpha * e);
    return loss;
}

struct GwResult {
    double stat = 0.0;
    double pvalue = 1.0;
    double indicator = 0.0;  // conditional test only
    bool degenerate = false;
};

// Unconditional predictive-ability (Diebold-Mariano form) on one-step loss
// differences; plain sample variance by default, Newey-West when hac_lags > 0.
inline GwResult gw_unconditional(const std::vector<double>& diff, std::size_t hac_lags = 0) {
    const std::size_t n = diff.size();
    if (n < 2) throw DataError("gw_unconditional: need at least 2 observations");
    const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / double(n);
    double var = 0.0;
    for (const double d : diff) var += (d - mean) * (d - mean);
    var /= double(n - 1);
    if (hac_lags > 0) {
        double lrv = var * double(n - 1) / double(n);
        for (std::size_t l = 1; l <= hac_lags && l < n; ++l) {
            double g = 0.0;
            for (std::size_t t = l; t < n; ++t) g += (diff[t] - mean) * (diff[t - l] - mean);
            g /= double(n);
            lrv += 2.0 * (1.0 - double(l) / double(hac_lags + 1)) * g;
        }
        var = lrv * double(n) / double(n - 1);
    }
    GwResult r;
    if (!(var > 1e-300)) {
        r.degenerate = true;
        r.stat = 0.0;
        r.pvalue = 1.0;
        return r;
    }
    r.stat = mean / std::sqrt(var / double(n));
    r.pvalue = 2.0 * norm_sf(std::fabs(r.stat));
    return r;
}

// Conditional predictive-ability test with test function h_t = (1, dL_t)':
// Z_{t+1} = h_t dL_{t+1}, T = m Zbar' Omega^{-1} Zbar ~ chi2_2, where m is
// the number of usable pairs. Also reports the share of dates where the
// fitted loss difference is positive.
inline GwResult gw_conditional(const std::vector<double>& diff) {
    const std::size_t nf = diff.size();
    if (nf < 3) throw DataError("gw_conditional: need at least 3 observations");
    const std::size_t m = nf - 1;
    double z1 = 0.0, z2 = 0.0;
    double o11 = 0.0, o12 = 0.0, o22 = 0.0;
    for (std::size_t t = 0; t + 1 < nf; ++t) {
        const double a = diff[t + 1];
        const double b = diff[t] * diff[t + 1];
        z1 += a;
        z2 += b;
        o11 += a * a;
        o12 += a * b;
        o22 += b * b;
    }
    z1 /= double(m);
    z2 /= double(m);
    o11 /= double(m);
    o12 /= double(m);
    o22 /= double(m);
    GwResult r;
    const double det = o11 * o22 - o12 * o12;
    if (!(det > 1e-14 * std::max(o11 * o22, 1e-300))) {
        r.degenerate = true;
        r.pvalue = 1.0;
        return r;
    }
    r.stat = double(m) * (z1 * (o22 * z1 - o12 * z2) + z2 * (o11 * z2 - o12 * z1)) / det;
    r.pvalue = chi2_sf(r.stat, 2.0);

    // regression of dL_{t+1} on (1, dL_t); indicator of fitted > 0
    double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
    for (std::size_t t = 0; t + 1 < nf; ++t) {
        sx += diff[t];
        sxx += diff[t] * diff[t];
        sy += diff[t + 1];
        sxy += diff[t] * diff[t + 1];
    }
    const double dm = double(m) * sxx - sx * sx;
    double b0, b1;
    if (std::fabs(dm) > 1e-300) {
        b1 = (double(m) * sxy - sx * sy) / dm;
        b0 = (sy - b1 * sx) / double(m);
    } else {
        b1 = 0.0;
        b0 = sy / double(m);
    }
    std::size_t pos = 0;
    for (std::size_t t = 0; t + 1 < nf; ++t) {
        if (b0 + b1 * diff[t] > 0.0) ++pos;
    }
    r.indicator = double(pos) / double(m);
    return r;
}

struct DqResult {
    double stat = 0.0;
    double pvalue = 1.0;
    std::size_t dof = 0;
    bool degenerate = false;
};

// Dynamic quantile test: regress (hit_t - alpha) on (1, VaR_t, hit_{t-1});
// DQ = b'X'Xb / (alpha(1-alpha)) ~ chi2 with rank degrees of freedom.
// Collinear columns are dropped (flagged degenerate when rank < 3).
inline DqResult dq_test(const std::vector<int>& hits, const std::vector<double>& var_forecasts,
                        double alpha) {
    const std::size_t n = hits.size();
    if (n != var_forecasts.size()) throw DataError("dq_test: length mismatch");
    if (n < 10) throw DataError("dq_test: need at least 10 observations");
    const std::size_t m = n - 1;  // rows t = 1..n-1
    // Build X'X and X'e for columns (1, VaR_t, hit_{t-1}).
    double xtx[3][3] = {};
    double xte[3] = {};
    for (std::size_t t = 1; t < n; ++t) {
        const double row[3] = {1.0, var_forecasts[t], double(hits[t - 1])};
        const double e = double(hits[t]) - alpha;
        for (int i = 0; i < 3; ++i) {
            for (int j = i; j < 3; ++j) xtx[i][j] += row[i] * row[j];
            xte[i] += row[i] * e;
        }
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < i; ++j) xtx[i][j] = xtx[j][i];

    // Greedy column selection by pivoted Cholesky.
    std::vector<int> used;
    double L[3][3] = {};
    for (int col = 0; col < 3; ++col) {
        std::vector<int> cand = used;
        cand.push_back(col);
        // Cholesky on the candidate submatrix
        const std::size_t k = cand.size();
        bool ok = true;
        for (std::size_t i = 0; i < k && ok; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = xtx[cand[i]][cand[j]];
                for (std::size_t q = 0; q < j; ++q) s -= L[i][q] * L[j][q];
                if (i == j) {
                    if (s < 1e-10 * (xtx[cand[i]][cand[i]] + 1.0)) {
                        ok = false;
                        break;
                    }
                    L[i][i] = std::sqrt(s);
                } else {
                    L[i][j] = s / L[j][j];
                }
            }
        }
        if (ok) used = cand;
    }
    DqResult r;
    r.dof = used.size();
    r.degenerate = used.size() < 3;
    if (used.empty()) return r;
    // Solve (X'X) b = X'e on the used columns via the Cholesky factors.
    const std::size_t k = used.size();
    double yv[3];
    for (std::size_t i = 0; i < k; ++i) {
        double s = xte[used[i]];
        for (std::size_t q = 0; q < i; ++q) s -= L[i][q] * yv[q];
        yv[i] = s / L[i][i];
    }
    // stat = b'X'Xb / (a(1-a)) = y'y / (a(1-a)) with y = L^{-1} X'e
    double quad = 0.0;
    for (std::size_t i = 0; i < k; ++i) quad += yv[i] * yv[i];
    (void)m;
    r.stat = quad / (alpha * (1.0 - alpha));
    r.pvalue = chi2_sf(r.stat, double(r.dof));
    return r;
}

struct McsResult {
    std::vector<double> pvalues;             // per model
    std::vector<std::size_t> elimination;    // worst-first order
    std::vector<bool> in_set;                // member of the level-conf set
    double level = 0.9;
};

// Model confidence set, Tmax variant: iterated elimination with
// moving-block bootstrap p-values. losses[i] holds model i's per-date loss.
inline McsResult mcs(const std::vector<std::vector<double>>& losses, double level,
                     std::size_t n_boot, std::size_t block, std::uint64_t seed = 7777) {
    const std::size_t nm = losses.size();
    if (nm < 2) throw ConfigError("mcs: need at least 2 models");
    const std::size_t n = losses[0].size();
    for (const auto& l : losses) {
        if (l.size() != n) throw DataError("mcs: ragged loss matrix");
    }
    if (n < block) throw DataError("mcs: fewer dates than the block size");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("mcs: level outside (0,1)");

    // prefix sums per model for fast block means
    std::vector<std::vector<double>> prefix(nm, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < nm; ++i) {
        for (std::size_t t = 0; t < n; ++t) prefix[i][t + 1] = prefix[i][t] + losses[i][t];
    }
    const std::size_t nblocks = (n + block - 1) / block;
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> starts(n_boot, std::vector<std::size_t>(nblocks));
    for (auto& row : starts) {
        for (auto& s : row) {
            s = static_cast<std::size_t>(rng.uniform() * double(n - block + 1));
            if (s > n - block) s = n - block;
        }
    }
    // bootstrap mean of model i in resample b
    auto boot_mean = [&](std::size_t i, std::size_t b) {
        double acc = 0.0;
        std::size_t left = n;
        for (std::size_t blk = 0; blk < nblocks; ++blk) {
            const std::size_t take = std::min(block, left);
            const std::size_t s = starts[b][blk];
            acc += prefix[i][s + take] - prefix[i][s];
            left -= take;
            if (left == 0) break;
        }
        return acc / double(n);
    };

    std::vector<double> full_mean(nm);
    for (std::size_t i = 0; i < nm; ++i) full_mean[i] = prefix[i][n] / double(n);
    std::vector<std::vector<double>> bmeans(nm, std::vector<double>(n_boot));
    for (std::size_t i = 0; i < nm; ++i) {
        for (std::size_t b = 0; b < n_boot; ++b) bmeans[i][b] = boot_mean(i, b);
    }

    McsResult res;
    res.level = level;
    res.pvalues.assign(nm, 1.0);
    res.in_set.assign(nm, true);
    std::vector<std::size_t> active(nm);
    std::iota(active.begin(), active.end(), 0);
    double running_p = 0.0;

    while (active.size() > 1) {
        const std::size_t k = active.size();
        // observed relative means and bootstrap variances of d_i.
        double grand = 0.0;
        for (const std::size_t i : active) grand += full_mean[i];
        grand /= double(k);
        std::vector<double> d(k), sd(k);
        std::vector<std::vector<double>> dboot(k, std::vector<double>(n_boot));
        for (std::size_t a = 0; a < k; ++a) d[a] = full_mean[active[a]] - grand;
        for (std::size_t b = 0; b < n_boot; ++b) {
            double bg = 0.0;
            for (const std::size_t i : active) bg += bmeans[i][b];
            bg /= double(k);
            for (std::size_t a = 0; a < k; ++a) {
                dboot[a][b] = bmeans[active[a]][b] - bg;
            }
        }
        for (std::size_t a = 0; a < k; ++a) {
            double v = 0.0;
            for (std::size_t b = 0; b < n_boot; ++b) {
                const double c = dboot[a][b] - d[a];
                v += c * c;
            }
            sd[a] = std::sqrt(std::max(v / double(n_boot), 1e-24));
        }
        double tmax = -std::numeric_limits<double>::infinity();
        std::size_t worst = 0;
        for (std::size_t a = 0; a < k; ++a) {
            const double t = (std::fabs(d[a]) < 1e-14) ? 0.0 : d[a] / sd[a];
            if (t > tmax) {
                tmax = t;
                worst = a;
            }
        }
        std::size_t exceed = 0;
        for (std::size_t b = 0; b < n_boot; ++b) {
            double tb = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < k; ++a) {
                tb = std::max(tb, (dboot[a][b] - d[a]) / sd[a]);
            }
            if (tb >= tmax) ++exceed;
        }
        const double pstep = double(exceed) / double(n_boot);
        running_p = std::max(running_p, pstep);
        const std::size_t victim = active[worst];
        res.pvalues[victim] = running_p;
        res.elimination.push_back(victim);
        active.erase(active.begin() + worst);
    }
    res.pvalues[active[0]] = 1.0;
    res.elimination.push_back(active[0]);
    for (std::size_t i = 0; i < nm; ++i) res.in_set[i] = res.pvalues[i] >= 1.0 - level;
    return res;
}

} // namespace rsvol
