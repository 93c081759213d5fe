#pragma once

// Random stream with self-contained draws. All transformations are written
// here rather than taken from <random> distributions so a fixed seed gives
// the same sequence on every build of the same binary and across sweeps.

#include <cstdint>
#include <random>
#include <stdexcept>

#include "rsvol/prob.hpp"

namespace rsvol {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent substream seed from a base seed and tags
// (window index, model index, replication, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(base ^ 0x6a09e667f3bcc908ULL);
    s = splitmix64(s ^ splitmix64(a + 1));
    s = splitmix64(s ^ splitmix64(b + 2));
    s = splitmix64(s ^ splitmix64(c + 3));
    return s;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : gen_(seed) {}

    // U(0,1) on (0,1): 53-bit mantissa, shifted off zero.
    double uniform() {
        const std::uint64_t r = gen_();
        return (static_cast<double>(r >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() { return norm_quantile(uniform()); }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

    // Gamma(shape, rate), Marsaglia-Tsang.
    double gamma(double shape, double rate = 1.0) {
        if (shape <= 0.0 || rate <= 0.0) throw std::domain_error("Rng::gamma: bad parameters");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    // IG(shape, scale): density proportional to x^{-shape-1} exp(-scale/x).
    double inv_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

    double chisq(double dof) { return gamma(0.5 * dof, 0.5); }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    double student_t(double dof) { return normal() / std::sqrt(chisq(dof) / dof); }

    // |N(0,1)| by inverse CDF.
    double half_normal() { return norm_quantile(0.5 + 0.5 * uniform()); }

    // N(mean, sd^2) truncated to (lo, hi). Inverse-CDF with complementary
    // tails; exponential rejection once the window sits past z = 12.
    double trunc_normal(double mean, double sd, double lo, double hi) {
        if (!(lo < hi)) throw std::domain_error("Rng::trunc_normal: empty interval");
        const double a = (lo - mean) / sd;
        const double b = (hi - mean) / sd;
        return mean + sd * trunc_std_normal(a, b);
    }

    std::uint64_t raw() { return gen_(); }

    std::mt19937_64& engine() { return gen_; }

private:
    double trunc_std_normal(double a, double b) {
        if (a >= 12.0) return robert_tail(a, b);
        if (b <= -12.0) return -robert_tail(-b, -a);
        if (a >= 0.0) {
            const double qa = norm_sf(a);
            const double qb = std::isinf(b) ? 0.0 : norm_sf(b);
            const double u = qb + (qa - qb) * uniform();
            return -norm_quantile(u);
        }
        if (b <= 0.0) {
            const double pa = std::isinf(a) ? 0.0 : norm_cdf(a);
            const double pb = norm_cdf(b);
            const double u = pa + (pb - pa) * uniform();
            return norm_quantile(u);
        }
        const double pa = std::isinf(a) ? 0.0 : norm_cdf(a);
        const double pb = std::isinf(b) ? 1.0 : norm_cdf(b);
        const double u = pa + (pb - pa) * uniform();
        return norm_quantile(u);
    }

    // Robert (1995) one-sided tail sampler, with the upper bound enforced
    // by rejection (the window is far in the tail, so b-a is effectively wide).
    double robert_tail(double a, double b) {
        const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
        for (;;) {
            const double z = a + exponential(alpha);
            if (z > b) continue;
            const double rho = std::exp(-0.5 * (z - alpha) * (z - alpha));
            if (uniform() <= rho) return z;
        }
    }

    std::mt19937_64 gen_;
};

} // namespace rsvol
