#pragma once

// Shared MCMC plumbing: chain configuration, recorded draws, acceptance
// bookkeeping, mode finding for the mode-centered proposals, and the
// Robbins-Monro step-size adapter used by the random-walk blocks.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rsvol/errors.hpp"
#include "rsvol/model.hpp"

namespace rsvol {

struct ChainConfig {
    std::size_t n_iter = 20000;
    std::size_t n_burn = 5000;
    std::size_t thin = 1;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_burn >= n_iter) throw ConfigError("chain: n_burn must be below n_iter");
        if (thin < 1) throw ConfigError("chain: thin must be >= 1");
    }
};

struct ChainDiagnostics {
    std::size_t rw_fallbacks = 0;   // mode search failures handled by random walks
    bool diverged = false;
    std::string divergence_note;
};

struct PosteriorDraws {
    ModelId model;
    std::vector<double> mu, phi, rho, sigma_eta2, xi, sigma_u2;
    std::vector<double> nu, beta, delta, gamma;
    std::vector<double> h_last;
    std::map<std::string, double> acceptance;  // per-block acceptance rates
    ChainDiagnostics diag;

    std::size_t size() const { return h_last.size(); }
};

class AcceptCounter {
public:
    void record(bool accepted) {
        ++attempts_;
        if (accepted) ++accepts_;
    }
    void record_many(std::size_t accepts, std::size_t attempts) {
        accepts_ += accepts;
        attempts_ += attempts;
    }
    double rate() const {
        return attempts_ == 0 ? 1.0 : static_cast<double>(accepts_) / attempts_;
    }

private:
    std::size_t accepts_ = 0;
    std::size_t attempts_ = 0;
};

// Mode-centered proposals use Student-t tails: a normal proposal this sharp
// deadlocks whenever the current point leaves its envelope (the reverse
// density underflows), while polynomial tails always let the chain re-enter.
inline constexpr double kProposalDof = 5.0;

inline double t_proposal_logpdf(double x, double mode, double sd) {
    const double z = (x - mode) / sd;
    return std::lgamma(0.5 * (kProposalDof + 1.0)) - std::lgamma(0.5 * kProposalDof) -
           0.5 * std::log(M_PI * kProposalDof) - std::log(sd) -
           0.5 * (kProposalDof + 1.0) * std::log1p(z * z / kProposalDof);
}

struct ModeResult1d {
    double mode = 0.0;
    double var = 1.0;
    bool ok = false;
};

// Safeguarded Newton on a log-density over (lo, hi): numeric derivatives,
// 20-iteration cap, gradient-sign steps when curvature is unusable,
// curvature floored at 1e-8.
template <class F>
ModeResult1d find_mode_1d(F&& logf, double x0, double lo, double hi, int max_iter = 20) {
    const double curv_floor = 1e-8;
    double x = std::min(std::max(x0, lo + 1e-12), hi - 1e-12);
    double step_cap = 0.25 * (hi - lo);
    if (!std::isfinite(step_cap) || step_cap <= 0.0) step_cap = 1.0;

    auto deriv = [&](double at, double& g, double& h2) {
        double eps = 1e-5 * (1.0 + std::fabs(at));
        if (at - eps <= lo || at + eps >= hi) eps = 0.49 * std::min(at - lo, hi - at);
        const double fp = logf(at + eps);
        const double fm = logf(at - eps);
        const double f0 = logf(at);
        g = (fp - fm) / (2.0 * eps);
        h2 = (fp - 2.0 * f0 + fm) / (eps * eps);
    };

    double g = 0.0, h2 = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        deriv(x, g, h2);
        if (!std::isfinite(g) || !std::isfinite(h2)) return {x, 1.0, false};
        double step;
        if (h2 < -curv_floor) {
            step = -g / h2;
        } else {
            step = (g > 0.0 ? 1.0 : -1.0) * 0.5 * step_cap;  // uphill bisection move
        }
        if (step > step_cap) step = step_cap;
        if (step < -step_cap) step = -step_cap;
        double xn = x + step;
        if (xn <= lo) xn = 0.5 * (x + lo);
        if (xn >= hi) xn = 0.5 * (x + hi);
        if (std::fabs(xn - x) < 1e-10 * (1.0 + std::fabs(x))) {
            x = xn;
            break;
        }
        x = xn;
    }
    deriv(x, g, h2);
    if (!std::isfinite(g) || !std::isfinite(h2)) return {x, 1.0, false};
    const double curv = std::max(-h2, curv_floor);
    const bool ok = std::fabs(g) < std::sqrt(curv) * 2.0 + 1e-3 * (1.0 + std::fabs(g));
    return {x, 1.0 / curv, ok};
}

struct ModeResult2d {
    double mode[2] = {0.0, 0.0};
    // Proposal covariance = inverse of the (floored) negative Hessian.
    double cov[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    bool ok = false;
};

template <class F>
ModeResult2d find_mode_2d(F&& logf, double x0, double y0, int max_iter = 20) {
    double x = x0, y = y0;
    const double eps0 = 1e-5;

    auto grad_hess = [&](double ax, double ay, double g[2], double H[2][2]) {
        const double ex = eps0 * (1.0 + std::fabs(ax));
        const double ey = eps0 * (1.0 + std::fabs(ay));
        const double f0 = logf(ax, ay);
        const double fxp = logf(ax + ex, ay), fxm = logf(ax - ex, ay);
        const double fyp = logf(ax, ay + ey), fym = logf(ax, ay - ey);
        const double fpp = logf(ax + ex, ay + ey), fmm = logf(ax - ex, ay - ey);
        const double fpm = logf(ax + ex, ay - ey), fmp = logf(ax - ex, ay + ey);
        g[0] = (fxp - fxm) / (2.0 * ex);
        g[1] = (fyp - fym) / (2.0 * ey);
        H[0][0] = (fxp - 2.0 * f0 + fxm) / (ex * ex);
        H[1][1] = (fyp - 2.0 * f0 + fym) / (ey * ey);
        H[0][1] = H[1][0] = (fpp - fpm - fmp + fmm) / (4.0 * ex * ey);
    };

    double g[2], H[2][2];
    for (int it = 0; it < max_iter; ++it) {
        grad_hess(x, y, g, H);
        if (!std::isfinite(g[0]) || !std::isfinite(g[1])) return {};
        // Solve (-H) step = g with the negative Hessian floored to PD.
        double A = -H[0][0], B = -H[0][1], C = -H[1][1];
        const double floor_ = 1e-8;
        if (A < floor_) A = floor_;
        if (C < floor_) C = floor_;
        double det = A * C - B * B;
        if (det < 1e-12 * A * C) {
            B *= 0.9;
            det = A * C - B * B;
            if (det <= 0.0) { B = 0.0; det = A * C; }
        }
        const double sx = (C * g[0] - B * g[1]) / det;
        const double sy = (A * g[1] - B * g[0]) / det;
        double scale = 1.0;
        const double norm = std::sqrt(sx * sx + sy * sy);
        if (norm > 2.0) scale = 2.0 / norm;
        const double xn = x + scale * sx;
        const double yn = y + scale * sy;
        if (!std::isfinite(logf(xn, yn))) break;
        if (std::fabs(xn - x) + std::fabs(yn - y) < 1e-10 * (1.0 + std::fabs(x) + std::fabs(y))) {
            x = xn; y = yn;
            break;
        }
        x = xn; y = yn;
    }
    grad_hess(x, y, g, H);
    ModeResult2d r;
    r.mode[0] = x;
    r.mode[1] = y;
    double A = -H[0][0], B = -H[0][1], C = -H[1][1];
    const double floor_ = 1e-8;
    if (!std::isfinite(A) || !std::isfinite(B) || !std::isfinite(C)) return r;
    if (A < floor_) A = floor_;
    if (C < floor_) C = floor_;
    double det = A * C - B * B;
    if (det < 1e-10 * A * C) {
        B = 0.0;
        det = A * C;
    }
    r.cov[0][0] = C / det;
    r.cov[0][1] = r.cov[1][0] = -B / det;
    r.cov[1][1] = A / det;
    const double gn = std::sqrt(g[0] * g[0] + g[1] * g[1]);
    r.ok = std::isfinite(gn) && gn < 1.0;
    return r;
}

// Decaying Robbins-Monro adaptation toward a target acceptance rate;
// frozen once freeze() is called (end of burn-in).
class StepAdapter {
public:
    StepAdapter(double initial, double target) : log_step_(std::log(initial)), target_(target) {}

    void update(double accepted) {
        if (frozen_) return;
        ++count_;
        const double gain = 1.0 / std::pow(10.0 + count_, 0.6);
        log_step_ += gain * (accepted - target_);
        if (log_step_ > 3.0) log_step_ = 3.0;
        if (log_step_ < -8.0) log_step_ = -8.0;
    }

    void freeze() { frozen_ = true; }
    double step() const { return std::exp(log_step_); }

private:
    double log_step_;
    double target_;
    std::size_t count_ = 0;
    bool frozen_ = false;
};

} // namespace rsvol
