#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "rsvol/mcmc_az.hpp"

using namespace rsvol;

namespace {

struct Scene {
    ModelId model;
    ModelParams p;
    LatentState lat;
    Dataset data;
    PriorSpec prior;
    std::vector<double> u, z;
};

Scene make_scene(Family family, std::size_t n, std::uint64_t seed, bool realized = true) {
    Scene s;
    s.model = {realized, family};
    s.p.shape.family = family;
    s.p.mu = -0.4;
    s.p.phi = 0.92;
    s.p.rho = -0.35;
    s.p.sigma_eta2 = 0.06;
    s.p.xi = 0.1;
    s.p.sigma_u2 = 0.05;
    s.p.shape.nu = 9.0;
    s.p.shape.beta = -0.8;
    s.p.shape.delta = -0.5;
    s.prior.phi_a = 18.0;
    s.prior.phi_b = 1.5;
    s.prior.rho_a = 2.0;
    s.prior.rho_b = 2.5;
    s.prior.eta_shape = 3.0;
    s.prior.eta_scale = 0.2;
    s.prior.delta_a = 1.7;
    s.prior.delta_b = 2.1;
    Rng rng(seed);
    auto sim = simulate(s.model, s.p, n, rng);
    s.data = std::move(sim.data);
    if (!realized) s.data.x.reset();
    s.lat = std::move(sim.latent);
    if (s.lat.lambda.empty()) s.lat.lambda.assign(n, 1.0);
    if (s.lat.z0.empty()) s.lat.z0.assign(n, half_normal_mean());
    // jitter the state away from the generating values
    for (auto& h : s.lat.h) h += 0.15 * rng.normal();
    s.p.mu += 0.1;
    s.p.phi = 0.9;
    s.u = az::compute_u(s.data.y, s.lat.h);
    s.z = az::compute_z(s.p.shape, s.u, s.lat);
    return s;
}

// log_joint evaluated with only the latents the family carries
double joint_of(const Scene& s, const ModelParams& p, const LatentState& lat) {
    LatentState use = lat;
    if (!family_has_lambda(p.shape.family)) use.lambda.clear();
    if (!family_has_z0(p.shape.family)) use.z0.clear();
    return log_joint(s.model, p, use, s.data, s.prior);
}

} // namespace

TEST_CASE("az conditionals match log-joint differences") {
    const double tol = 1e-10;
    for (const Family family :
         {Family::normal, Family::student_t, Family::az_skew_normal, Family::az_skew_t,
          Family::gh_skew_t}) {
        Scene s = make_scene(family, 60, 1000 + int(family));
        Rng rng(77 + int(family));
        INFO("family " << to_string(s.model));

        // mu: Gibbs normal
        for (int rep = 0; rep < 20; ++rep) {
            const auto g = az::mu_conditional(s.p, s.lat, s.prior, s.z);
            const double v1 = s.p.mu + rng.normal();
            const double v2 = s.p.mu + rng.normal();
            ModelParams p1 = s.p, p2 = s.p;
            p1.mu = v1;
            p2.mu = v2;
            const double lhs = norm_logpdf(v2, g.mean, g.var) - norm_logpdf(v1, g.mean, g.var);
            const double rhs = joint_of(s, p2, s.lat) - joint_of(s, p1, s.lat);
            REQUIRE(lhs == Catch::Approx(rhs).epsilon(0).margin(tol));
        }
        // phi kernel
        for (int rep = 0; rep < 20; ++rep) {
            const double v1 = rng.uniform(-0.95, 0.99);
            const double v2 = rng.uniform(-0.95, 0.99);
            ModelParams p1 = s.p, p2 = s.p;
            p1.phi = v1;
            p2.phi = v2;
            const double lhs = az::phi_log_kernel(v2, s.p, s.lat, s.prior, s.z) -
                               az::phi_log_kernel(v1, s.p, s.lat, s.prior, s.z);
            const double rhs = joint_of(s, p2, s.lat) - joint_of(s, p1, s.lat);
            REQUIRE(lhs == Catch::Approx(rhs).epsilon(0).margin(tol));
        }
        // joint (rho, sigma_eta2) kernel
        const auto rs = az::make_rho_sigma_stats(s.p, s.lat, s.z);
        for (int rep = 0; rep < 20; ++rep) {
            const double se1 = rng.uniform(0.01, 0.3), se2v = rng.uniform(0.01, 0.3);
            const double r1 = rng.uniform(-0.9, 0.9), r2 = rng.uniform(-0.9, 0.9);
            ModelParams p1 = s.p, p2 = s.p;
            p1.sigma_eta2 = se1;
            p1.rho = r1;
            p2.sigma_eta2 = se2v;
            p2.rho = r2;
            const double lhs = az::rho_sigma_log_kernel(se2v, r2, rs, s.prior) -
                               az::rho_sigma_log_kernel(se1, r1, rs, s.prior);
            const double rhs = joint_of(s, p2, s.lat) - joint_of(s, p1, s.lat);
            REQUIRE(lhs == Catch::Approx(rhs).epsilon(0).margin(tol));
        }
        // xi and sigma_u2 (RSV only)
        for (int rep = 0; rep < 10; ++rep) {
            const auto g = az::xi_conditional(s.p, s.lat, s.data, s.prior);
            const double v1 = s.p.xi + rng.normal(), v2 = s.p.xi + rng.normal();
            ModelParams p1 = s.p, p2 = s.p;
            p1.xi = v1;
            p2.xi = v2;
            REQUIRE(norm_logpdf(v2, g.mean, g.var) - norm_logpdf(v1, g.mean, g.var) ==
                    Catch::Approx(joint_of(s, p2, s.lat) - joint_of(s, p1, s.lat)).epsilon(0).margin(tol));

            const auto ig = az::sigma_u2_conditional(s.p, s.lat, s.data, s.prior);
            const double w1 = rng.uniform(0.01, 0.4), w2 = rng.uniform(0.01, 0.4);
            ModelParams q1 = s.p, q2 = s.p;
            q1.sigma_u2 = w1;
            q2.sigma_u2 = w2;
            REQUIRE(detail::log_ig_pdf(w2, ig.shape, ig.scale) -
                        detail::log_ig_pdf(w1, ig.shape, ig.scale) ==
                    Catch::Approx(joint_of(s, q2, s.lat) - joint_of(s, q1, s.lat)).epsilon(0).margin(tol));
        }
        // h sites
        for (int rep = 0; rep < 20; ++rep) {
            const std::size_t t = std::size_t(rng.uniform() * double(s.data.n()));
            const double v1 = s.lat.h[t] + rng.normal();
            const double v2 = s.lat.h[t] + rng.normal();
            LatentState l1 = s.lat, l2 = s.lat;
            l1.h[t] = v1;
            l2.h[t] = v2;
            const double lhs = az::h_site_kernel(t, v2, s.model, s.p, s.lat, s.data, s.z) -
                               az::h_site_kernel(t, v1, s.model, s.p, s.lat, s.data, s.z);
            const double rhs = joint_of(s, s.p, l2) - joint_of(s, s.p, l1);
            REQUIRE(lhs == Catch::Approx(rhs).epsilon(0).margin(tol));
        }
        // family-specific steps
        if (family_has_z0(family)) {
            for (int rep = 0; rep < 20; ++rep) {
                const double v1 = rng.uniform(-0.95, 0.95);
                const double v2 = rng.uniform(-0.95, 0.95);
                const auto st = az::make_delta_stats(s.p, s.lat, s.u);
                ModelParams p1 = s.p, p2 = s.p;
                p1.shape.delta = v1;
                p2.shape.delta = v2;
                const double lhs = az::delta_log_kernel(v2, s.p, s.prior, st) -
                                   az::delta_log_kernel(v1, s.p, s.prior, st);
                const double rhs = joint_of(s, p2, s.lat) - joint_of(s, p1, s.lat);
                REQUIRE(lhs == Catch::Approx(rhs).epsilon(0).margin(tol));

                const std::size_t t = std::size_t(rng.uniform() * double(s.data.n()));
                const double z1 = rng.uniform(0.05, 3.0), z2 = rng.uniform(0.05, 3.0);
                const auto gz = az::z0_conditional(t, s.p, s.lat, s.u);
                LatentState l1 = s.lat, l2 = s.lat;
                l1.z0[t] = z1;
                l2.z0[t] = z2;
                REQUIRE(norm_logpdf(z2, gz.mean, gz.var) - norm_logpdf(z1, gz.mean, gz.var) ==
                        Catch::Approx(joint_of(s, s.p, l2) - joint_of(s, s.p, l1)).epsilon(0).margin(tol));
            }
        }
        if (family_has_lambda(family)) {
            for (int rep = 0; rep < 20; ++rep) {
                const double floor_ = nu_floor(family);
                const double v1 = floor_ + rng.uniform(0.5, 30.0);
                const double v2 = floor_ + rng.uniform(0.5, 30.0);
                const auto st = az::make_nu_stats(s.p, s.lat, s.u);
                ModelParams p1 = s.p, p2 = s.p;
                p1.shape.nu = v1;
                p2.shape.nu = v2;
                const double lhs = az::nu_log_kernel(v2, s.p, s.prior, st) -
                                   az::nu_log_kernel(v1, s.p, s.prior, st);
                const double rhs = joint_of(s, p2, s.lat) - joint_of(s, p1, s.lat);
                REQUIRE(lhs == Catch::Approx(rhs).epsilon(0).margin(tol));

                const std::size_t t = std::size_t(rng.uniform() * double(s.data.n()));
                const double l1v = rng.uniform(0.1, 5.0), l2v = rng.uniform(0.1, 5.0);
                LatentState l1 = s.lat, l2 = s.lat;
                l1.lambda[t] = l1v;
                l2.lambda[t] = l2v;
                const double lhs2 = az::lambda_site_kernel(t, l2v, s.p, s.lat, s.u) -
                                    az::lambda_site_kernel(t, l1v, s.p, s.lat, s.u);
                const double rhs2 = joint_of(s, s.p, l2) - joint_of(s, s.p, l1);
                REQUIRE(lhs2 == Catch::Approx(rhs2).epsilon(0).margin(tol));
            }
        }
        if (family == Family::gh_skew_t) {
            for (int rep = 0; rep < 20; ++rep) {
                const double v1 = rng.normal(0.0, 1.5), v2 = rng.normal(0.0, 1.5);
                const auto st = az::make_beta_stats(s.p, s.lat, s.u);
                ModelParams p1 = s.p, p2 = s.p;
                p1.shape.beta = v1;
                p2.shape.beta = v2;
                const double lhs = az::beta_log_kernel(v2, s.p, s.prior, st) -
                                   az::beta_log_kernel(v1, s.p, s.prior, st);
                const double rhs = joint_of(s, p2, s.lat) - joint_of(s, p1, s.lat);
                REQUIRE(lhs == Catch::Approx(rhs).epsilon(0).margin(tol));
            }
        }
    }
}

TEST_CASE("mu conditional reduces to the AR(1) GLS mean under a diffuse prior") {
    Scene s = make_scene(Family::student_t, 5, 21);
    s.p.rho = 0.0;
    s.prior.mu_var = 1e12;
    s.prior.mu_mean = 0.0;
    const auto g = az::mu_conditional(s.p, s.lat, s.prior, s.z);
    const auto& h = s.lat.h;
    const double phi = s.p.phi;
    double num = (1.0 - phi * phi) * h[0];
    double den = (1.0 - phi * phi);
    for (std::size_t t = 0; t + 1 < h.size(); ++t) {
        num += (1.0 - phi) * (h[t + 1] - phi * h[t]);
        den += (1.0 - phi) * (1.0 - phi);
    }
    REQUIRE(g.mean == Catch::Approx(num / den).epsilon(0).margin(1e-8));
}

TEST_CASE("mu precision limits") {
    SECTION("single observation") {
        Scene s = make_scene(Family::normal, 2, 23);
        s.lat.h.resize(1);
        s.lat.lambda.resize(1);
        s.lat.z0.resize(1);
        s.data.y.resize(1);
        s.data.x->resize(1);
        s.data.dates.resize(1);
        s.u.resize(1);
        s.z.resize(1);
        const auto g = az::mu_conditional(s.p, s.lat, s.prior, s.z);
        const double prec = 1.0 / s.prior.mu_var + (1.0 - s.p.phi * s.p.phi) / s.p.sigma_eta2;
        REQUIRE(1.0 / g.var == Catch::Approx(prec).epsilon(1e-12));
    }
    SECTION("rho = 0, phi = 0") {
        Scene s = make_scene(Family::normal, 40, 25);
        s.p.rho = 0.0;
        s.p.phi = 0.0;
        const auto g = az::mu_conditional(s.p, s.lat, s.prior, s.z);
        const double prec = 1.0 / s.prior.mu_var + double(s.data.n()) / s.p.sigma_eta2;
        REQUIRE(1.0 / g.var == Catch::Approx(prec).epsilon(1e-12));
    }
}

TEST_CASE("xi conditional limits") {
    Scene s = make_scene(Family::student_t, 40, 26);
    SECTION("diffuse prior gives the residual mean") {
        s.prior.xi_var = 1e14;
        const auto g = az::xi_conditional(s.p, s.lat, s.data, s.prior);
        double acc = 0.0;
        for (std::size_t t = 0; t < s.data.n(); ++t) acc += (*s.data.x)[t] - s.lat.h[t];
        REQUIRE(g.mean == Catch::Approx(acc / double(s.data.n())).epsilon(0).margin(1e-8));
    }
    SECTION("x identical to h gives zero under a diffuse prior") {
        s.prior.xi_var = 1e14;
        s.data.x = s.lat.h;
        const auto g = az::xi_conditional(s.p, s.lat, s.data, s.prior);
        REQUIRE(g.mean == Catch::Approx(0.0).epsilon(0).margin(1e-10));
    }
}

TEST_CASE("sigma_u2 conditional") {
    Scene s = make_scene(Family::student_t, 40, 28);
    SECTION("zero residuals leave the prior scale") {
        std::vector<double> x(s.data.n());
        for (std::size_t t = 0; t < s.data.n(); ++t) x[t] = s.p.xi + s.lat.h[t];
        s.data.x = x;
        const auto ig = az::sigma_u2_conditional(s.p, s.lat, s.data, s.prior);
        REQUIRE(ig.scale == Catch::Approx(s.prior.u_scale).epsilon(1e-12));
        REQUIRE(ig.shape == Catch::Approx(s.prior.u_shape + 0.5 * double(s.data.n())));
    }
    SECTION("posterior draws match the analytic inverse-gamma mean") {
        const auto ig = az::sigma_u2_conditional(s.p, s.lat, s.data, s.prior);
        Rng rng(30);
        std::vector<double> draws(400000);
        for (auto& d : draws) d = rng.inv_gamma(ig.shape, ig.scale);
        const auto m = testutil::moments(draws);
        REQUIRE(std::fabs(m.mean - ig.scale / (ig.shape - 1.0)) < 4.0 * m.se_mean);
    }
}

TEST_CASE("phi helpers") {
    REQUIRE(az::phi_log_g(0.5, 1.0, 1.0) - az::phi_log_g(0.0, 1.0, 1.0) ==
            Catch::Approx(0.5 * std::log(0.75)).epsilon(0).margin(1e-14));
    // proposal variance positive whenever the denominator is
    Scene s = make_scene(Family::az_skew_t, 50, 27);
    const auto prop = az::phi_proposal(s.p, s.lat, s.z);
    REQUIRE(prop.ok);
    REQUIRE(prop.var > 0.0);
    // the displayed g-ratio acceptance equals the kernel + proposal correction:
    // kernel(phi) - logN(phi; prop) - log g(phi) is constant in phi
    std::vector<double> c;
    for (const double v : {-0.3, 0.0, 0.4, 0.9}) {
        c.push_back(az::phi_log_kernel(v, s.p, s.lat, s.prior, s.z) -
                    norm_logpdf(v, prop.mean, prop.var) -
                    az::phi_log_g(v, s.prior.phi_a, s.prior.phi_b));
    }
    for (std::size_t i = 1; i < c.size(); ++i) {
        REQUIRE(c[i] == Catch::Approx(c[0]).epsilon(0).margin(1e-8));
    }
}

TEST_CASE("rho-sigma transform facts") {
    // omega2(rho = 0) = 0 and round trip
    REQUIRE(2.0 * std::atanh(0.0) == 0.0);
    for (const double rho : {-0.7, -0.1, 0.0, 0.5}) {
        REQUIRE(std::tanh(0.5 * (std::log(1.0 + rho) - std::log(1.0 - rho))) ==
                Catch::Approx(rho).epsilon(0).margin(1e-14));
    }
    // transform derivatives at (sigma_eta = 1, rho = 0): 1 and 1/2
    const double eps = 1e-6;
    const double dsig = (std::exp(0.0 + eps) - std::exp(0.0 - eps)) / (2.0 * eps);
    REQUIRE(dsig == Catch::Approx(1.0).epsilon(0).margin(1e-6));
    const double drho = (std::tanh(0.5 * eps) - std::tanh(-0.5 * eps)) / (2.0 * eps);
    REQUIRE(drho == Catch::Approx(0.5).epsilon(0).margin(1e-6));
}

TEST_CASE("delta conditional is symmetric with a mode at zero on symmetric data") {
    Scene s = make_scene(Family::az_skew_t, 30, 29);
    for (auto& y : s.data.y) y = 0.0;
    s.p.rho = 0.0;
    s.prior.delta_a = 2.0;
    s.prior.delta_b = 2.0;
    // fix the truncation path so its spread around c keeps the conditional
    // unimodal (a low-spread z0 path genuinely bifurcates the mode)
    for (std::size_t t = 0; t < s.lat.z0.size(); ++t) {
        s.lat.z0[t] = half_normal_mean() + (t % 2 == 0 ? 0.7 : -0.7);
    }
    s.u = az::compute_u(s.data.y, s.lat.h);
    const auto st = az::make_delta_stats(s.p, s.lat, s.u);
    double best = -1e300;
    double best_d = -2.0;
    for (double d = -0.9; d <= 0.9001; d += 0.05) {
        const double v = az::delta_log_kernel(d, s.p, s.prior, st);
        const double vm = az::delta_log_kernel(-d, s.p, s.prior, st);
        REQUIRE(v == Catch::Approx(vm).epsilon(0).margin(1e-9));
        if (v > best) {
            best = v;
            best_d = d;
        }
    }
    REQUIRE(std::fabs(best_d) < 1e-9);
    REQUIRE(az_k(0.0) == Catch::Approx(1.0).epsilon(0).margin(1e-15));
}

TEST_CASE("z0 conditional facts") {
    Scene s = make_scene(Family::az_skew_t, 25, 31);
    SECTION("delta = 0 gives the prior half-normal") {
        s.p.shape.delta = 0.0;
        for (const std::size_t t : {std::size_t(0), std::size_t(10), s.data.n() - 1}) {
            const auto g = az::z0_conditional(t, s.p, s.lat, s.u);
            REQUIRE(g.var == Catch::Approx(1.0).epsilon(0).margin(1e-13));
            REQUIRE(g.mean == Catch::Approx(0.0).epsilon(0).margin(1e-13));
        }
    }
    SECTION("terminal precision drops the coupling term") {
        const double d = s.p.shape.delta;
        const auto g = az::z0_conditional(s.data.n() - 1, s.p, s.lat, s.u);
        REQUIRE(1.0 / g.var == Catch::Approx(1.0 / (1.0 - d * d)).epsilon(1e-10));
        const auto gm = az::z0_conditional(0, s.p, s.lat, s.u);
        REQUIRE(1.0 / gm.var ==
                Catch::Approx(1.0 + d * d / ((1.0 - d * d) * (1.0 - s.p.rho * s.p.rho)))
                    .epsilon(1e-10));
    }
    SECTION("draws stay positive") {
        Rng rng(33);
        for (int rep = 0; rep < 2000; ++rep) {
            const std::size_t t = std::size_t(rng.uniform() * double(s.data.n()));
            const auto g = az::z0_conditional(t, s.p, s.lat, s.u);
            const double draw = rng.trunc_normal(g.mean, std::sqrt(g.var), 0.0,
                                                 std::numeric_limits<double>::infinity());
            REQUIRE(draw > 0.0);
        }
    }
}

TEST_CASE("lambda proposal facts") {
    Scene s = make_scene(Family::az_skew_t, 25, 35);
    const double nu = s.p.shape.nu;
    const double k = az_k(s.p.shape.delta);
    const double ml = mu_lambda(nu);
    // interior b carries the (1 - rho^2) divisor, the terminal one does not
    const std::size_t t = 5;
    const auto ig_mid = az::lambda_proposal(t, s.p, s.lat, s.u);
    const double expect_mid =
        nu + ml * s.u[t] * s.u[t] / (k * k * (1.0 - s.p.rho * s.p.rho));
    REQUIRE(2.0 * ig_mid.scale == Catch::Approx(expect_mid).epsilon(1e-12));
    const std::size_t last = s.data.n() - 1;
    const auto ig_end = az::lambda_proposal(last, s.p, s.lat, s.u);
    REQUIRE(2.0 * ig_end.scale ==
            Catch::Approx(nu + ml * s.u[last] * s.u[last] / (k * k)).epsilon(1e-12));
    REQUIRE(2.0 * ig_mid.shape == Catch::Approx(nu + 1.0).epsilon(1e-14));

    // delta = 0 and rho = 0: the site kernel equals the IG proposal kernel
    // up to a constant (exact Gibbs, acceptance one)
    s.p.shape.delta = 0.0;
    s.p.rho = 0.0;
    std::vector<double> c;
    const auto ig = az::lambda_proposal(t, s.p, s.lat, s.u);
    for (const double lam : {0.3, 0.8, 1.5, 4.0}) {
        c.push_back(az::lambda_site_kernel(t, lam, s.p, s.lat, s.u) -
                    detail::log_ig_pdf(lam, ig.shape, ig.scale));
    }
    for (std::size_t i = 1; i < c.size(); ++i) {
        REQUIRE(c[i] == Catch::Approx(c[0]).epsilon(0).margin(1e-10));
    }
}

TEST_CASE("nu kernel drifts upward when the mixing path is one") {
    Scene s = make_scene(Family::student_t, 60, 37);
    std::fill(s.lat.lambda.begin(), s.lat.lambda.end(), 1.0);
    std::fill(s.data.y.begin(), s.data.y.end(), 0.0);
    s.u = az::compute_u(s.data.y, s.lat.h);
    s.prior.nu_shape = 1.0;
    s.prior.nu_rate = 0.001;  // nearly flat prior
    const auto st = az::make_nu_stats(s.p, s.lat, s.u);
    // mini random-walk chain on the nu conditional
    Rng rng(39);
    double nu = 5.0;
    std::vector<double> trace;
    for (int it = 0; it < 4000; ++it) {
        const double w = std::log(nu - 2.0) + 0.4 * rng.normal();
        const double cand = 2.0 + std::exp(w);
        const double la = az::nu_log_kernel(cand, s.p, s.prior, st) -
                          az::nu_log_kernel(nu, s.p, s.prior, st) + w - std::log(nu - 2.0);
        if (std::log(rng.uniform()) < la) nu = cand;
        trace.push_back(nu);
    }
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 1000; ++i) early += trace[i];
    for (int i = 3000; i < 4000; ++i) late += trace[i];
    REQUIRE(late / 1000.0 > early / 1000.0);
    REQUIRE(late / 1000.0 > 20.0);
}

TEST_CASE("h proposal concentrates on x - xi when measurement noise vanishes") {
    Scene s = make_scene(Family::normal, 30, 41);
    s.p.sigma_u2 = 1e-10;
    for (std::size_t t = 0; t < s.data.n(); ++t) {
        const auto prop = az::h_proposal(t, s.model, s.p, s.lat, s.data, s.z);
        REQUIRE(prop.mean == Catch::Approx((*s.data.x)[t] - s.p.xi).epsilon(0).margin(2e-5));
        REQUIRE(prop.var < 1.1e-10);
    }
}

TEST_CASE("frozen-state conditional distributions match grid densities (chi-square)") {
    Scene s = make_scene(Family::az_skew_t, 24, 43);
    Rng rng(45);

    SECTION("lambda site") {
        const std::size_t t = 7;
        auto kernel = [&](double lam) { return az::lambda_site_kernel(t, lam, s.p, s.lat, s.u); };
        const testutil::GridCdf cdf([&](double x) { return std::exp(kernel(x)); }, 1e-4, 60.0,
                                    20000);
        const auto ig = az::lambda_proposal(t, s.p, s.lat, s.u);
        double lam = s.lat.lambda[t];
        std::vector<double> draws;
        for (int it = 0; it < 60000; ++it) {
            const double cand = rng.inv_gamma(ig.shape, ig.scale);
            const double la = kernel(cand) - kernel(lam) +
                              detail::log_ig_pdf(lam, ig.shape, ig.scale) -
                              detail::log_ig_pdf(cand, ig.shape, ig.scale);
            if (std::log(rng.uniform()) < la) lam = cand;
            if (it % 5 == 4) draws.push_back(lam);
        }
        REQUIRE(testutil::chi2_gof_pvalue(draws, cdf, 20) > 0.01);
    }
    SECTION("h site") {
        const std::size_t t = 11;
        auto kernel = [&](double hv) {
            return az::h_site_kernel(t, hv, s.model, s.p, s.lat, s.data, s.z);
        };
        const double center = s.lat.h[t];
        const testutil::GridCdf cdf([&](double x) { return std::exp(kernel(x) - kernel(center)); },
                                    center - 4.0, center + 4.0, 20000);
        const auto prop = az::h_proposal(t, s.model, s.p, s.lat, s.data, s.z);
        double h = s.lat.h[t];
        std::vector<double> draws;
        for (int it = 0; it < 60000; ++it) {
            const double cand = rng.normal(prop.mean, std::sqrt(prop.var));
            const double la = kernel(cand) - kernel(h) + norm_logpdf(h, prop.mean, prop.var) -
                              norm_logpdf(cand, prop.mean, prop.var);
            if (std::log(rng.uniform()) < la) h = cand;
            if (it % 5 == 4) draws.push_back(h);
        }
        REQUIRE(testutil::chi2_gof_pvalue(draws, cdf, 20) > 0.01);
    }
}

TEST_CASE("run_chain_az: determinism and support") {
    ModelParams gen;
    gen.shape.family = Family::az_skew_t;
    gen.mu = -0.5;
    gen.phi = 0.95;
    gen.rho = -0.4;
    gen.sigma_eta2 = 0.05;
    gen.xi = -0.1;
    gen.sigma_u2 = 0.05;
    gen.shape.nu = 12.0;
    gen.shape.delta = -0.5;
    Rng rng(47);
    const auto sim = simulate({true, Family::az_skew_t}, gen, 150, rng);
    ChainConfig cfg;
    cfg.n_iter = 600;
    cfg.n_burn = 200;
    cfg.seed = 4711;
    const auto d1 = az::run_chain_az({true, Family::az_skew_t}, sim.data, PriorSpec{}, cfg);
    const auto d2 = az::run_chain_az({true, Family::az_skew_t}, sim.data, PriorSpec{}, cfg);
    REQUIRE(d1.mu == d2.mu);
    REQUIRE(d1.phi == d2.phi);
    REQUIRE(d1.delta == d2.delta);
    REQUIRE(d1.h_last == d2.h_last);
    REQUIRE(d1.size() == 400);
    for (std::size_t i = 0; i < d1.size(); ++i) {
        REQUIRE(std::fabs(d1.phi[i]) < 1.0);
        REQUIRE(std::fabs(d1.rho[i]) < 1.0);
        REQUIRE(std::fabs(d1.delta[i]) < 1.0);
        REQUIRE(d1.sigma_eta2[i] > 0.0);
        REQUIRE(d1.sigma_u2[i] > 0.0);
        REQUIRE(d1.nu[i] > 2.0);
    }
    for (const auto& [name, rate] : d1.acceptance) {
        INFO(name);
        REQUIRE(rate >= 0.0);
        REQUIRE(rate <= 1.0);
    }
}

TEST_CASE("short chains run for the remaining mixture families") {
    for (const auto& id : {"SV-GH-ST", "RSV-AZ-SN", "RSV-GH-ST"}) {
        const ModelId model = parse_model_id(id);
        ModelParams gen;
        gen.shape.family = model.family;
        gen.mu = -0.4;
        gen.phi = 0.95;
        gen.rho = -0.3;
        gen.sigma_eta2 = 0.05;
        gen.xi = -0.1;
        gen.sigma_u2 = 0.05;
        gen.shape.nu = 12.0;
        gen.shape.beta = -0.7;
        gen.shape.delta = -0.4;
        Rng rng(49 + std::size_t(model.family));
        const auto sim = simulate({true, model.family}, gen, 120, rng);
        Dataset data = sim.data;
        if (!model.realized) data.x.reset();
        ChainConfig cfg;
        cfg.n_iter = 300;
        cfg.n_burn = 100;
        cfg.seed = 51;
        const auto d = az::run_chain_az(model, data, PriorSpec{}, cfg);
        INFO(id);
        REQUIRE(d.size() == 200);
        for (std::size_t i = 0; i < d.size(); ++i) {
            REQUIRE(std::fabs(d.phi[i]) < 1.0);
            REQUIRE(d.sigma_eta2[i] > 0.0);
        }
        if (model.family == Family::gh_skew_t) REQUIRE(d.beta.size() == 200);
    }
}

namespace {

// Independently coded RSV-T sampler: per-coordinate random-walk Metropolis
// with local targets written from the model equations. Used only to
// cross-check the library sampler's posterior.
struct IndependentRsvT {
    std::vector<double> y, x;
    PriorSpec prior;
    double mu = 0.0, phi = 0.9, rho = -0.2, se2 = 0.05, xi = 0.0, su2 = 0.05, nu = 10.0;
    std::vector<double> h, lam;
    Rng rng;

    explicit IndependentRsvT(const Dataset& data, std::uint64_t seed)
        : y(data.y), x(*data.x), rng(seed) {
        h.assign(y.size(), -0.5);
        lam.assign(y.size(), 1.0);
    }

    double ml() const { return nu / (nu - 2.0); }

    double local_y(std::size_t t, double hv, double lamv) const {
        const double var = std::exp(hv) * lamv / ml();
        return -0.5 * (std::log(2.0 * M_PI * var) + y[t] * y[t] / var);
    }
    double local_trans(std::size_t t, double h0, double h1v, double lamv) const {
        // h_{t+1} | h_t, z_t
        const double z = y[t] * std::exp(-0.5 * h0) * std::sqrt(ml() / lamv);
        const double cv = (1.0 - rho * rho) * se2;
        const double d = h1v - mu - phi * (h0 - mu) - rho * std::sqrt(se2) * z;
        return -0.5 * (std::log(2.0 * M_PI * cv) + d * d / cv);
    }
    double local_x(std::size_t t, double hv) const {
        const double d = x[t] - xi - hv;
        return -0.5 * (std::log(2.0 * M_PI * su2) + d * d / su2);
    }
    double local_h1(double h1v) const {
        const double v = se2 / (1.0 - phi * phi);
        const double d = h1v - mu;
        return -0.5 * (std::log(2.0 * M_PI * v) + d * d / v);
    }
    double local_lam_prior(double lamv) const {
        return -(0.5 * nu + 1.0) * std::log(lamv) - 0.5 * nu / lamv +
               0.5 * nu * std::log(0.5 * nu) - std::lgamma(0.5 * nu);
    }

    double full() const {
        double v = local_h1(h[0]);
        for (std::size_t t = 0; t < y.size(); ++t) {
            v += local_y(t, h[t], lam[t]) + local_x(t, h[t]) + local_lam_prior(lam[t]);
            if (t + 1 < y.size()) v += local_trans(t, h[t], h[t + 1], lam[t]);
        }
        v += norm_logpdf(mu, prior.mu_mean, prior.mu_var);
        v += (prior.phi_a - 1.0) * std::log(1.0 + phi) + (prior.phi_b - 1.0) * std::log(1.0 - phi);
        v += (prior.rho_a - 1.0) * std::log(1.0 + rho) + (prior.rho_b - 1.0) * std::log(1.0 - rho);
        v += -(prior.eta_shape + 1.0) * std::log(se2) - prior.eta_scale / se2;
        v += norm_logpdf(xi, prior.xi_mean, prior.xi_var);
        v += -(prior.u_shape + 1.0) * std::log(su2) - prior.u_scale / su2;
        v += (prior.nu_shape - 1.0) * std::log(nu) - prior.nu_rate * nu;
        return v;
    }

    template <class Setter>
    void rw_param(double& value, double step, Setter&& in_support) {
        const double old = value;
        const double lp0 = full();
        value = old + step * rng.normal();
        if (!in_support(value)) {
            value = old;
            return;
        }
        const double lp1 = full();
        if (std::log(rng.uniform()) >= lp1 - lp0) value = old;
    }

    void sweep() {
        rw_param(mu, 0.1, [](double) { return true; });
        rw_param(phi, 0.02, [](double v) { return std::fabs(v) < 1.0; });
        rw_param(rho, 0.08, [](double v) { return std::fabs(v) < 1.0; });
        rw_param(se2, 0.01, [](double v) { return v > 0.0; });
        rw_param(xi, 0.05, [](double) { return true; });
        rw_param(su2, 0.01, [](double v) { return v > 0.0; });
        rw_param(nu, 1.5, [](double v) { return v > 2.001; });
        // latents: local random walks
        for (std::size_t t = 0; t < y.size(); ++t) {
            const double old = h[t];
            auto local = [&](double hv) {
                double v = local_y(t, hv, lam[t]) + local_x(t, hv);
                if (t == 0) v += local_h1(hv);
                else v += local_trans(t - 1, h[t - 1], hv, lam[t - 1]);
                if (t + 1 < y.size()) v += local_trans(t, hv, h[t + 1], lam[t]);
                return v;
            };
            const double lp0 = local(old);
            const double cand = old + 0.35 * rng.normal();
            if (std::log(rng.uniform()) < local(cand) - lp0) h[t] = cand;

            const double lold = lam[t];
            auto local_l = [&](double lv) {
                double v = local_y(t, h[t], lv) + local_lam_prior(lv);
                if (t + 1 < y.size()) v += local_trans(t, h[t], h[t + 1], lv);
                return v;
            };
            const double cand_l = lold * std::exp(0.6 * rng.normal());
            // log-scale walk: include the Jacobian
            if (std::log(rng.uniform()) <
                local_l(cand_l) - local_l(lold) + std::log(cand_l) - std::log(lold)) {
                lam[t] = cand_l;
            }
        }
    }
};

} // namespace

TEST_CASE("library RSV-T posterior matches an independent sampler (KS)") {
    ModelParams gen;
    gen.shape.family = Family::student_t;
    gen.mu = -0.6;
    gen.phi = 0.93;
    gen.rho = -0.4;
    gen.sigma_eta2 = 0.06;
    gen.xi = -0.1;
    gen.sigma_u2 = 0.06;
    gen.shape.nu = 8.0;
    Rng rng(51);
    const auto sim = simulate({true, Family::student_t}, gen, 120, rng);

    PriorSpec prior;
    prior.eta_shape = 2.5;
    prior.eta_scale = 0.15;
    prior.u_shape = 2.5;
    prior.u_scale = 0.15;

    ChainConfig cfg;
    cfg.n_iter = 305000;
    cfg.n_burn = 5000;
    cfg.thin = 60;
    cfg.seed = 53;
    const auto lib = az::run_chain_az({true, Family::student_t}, sim.data, prior, cfg);

    IndependentRsvT ind(sim.data, 55);
    ind.prior = prior;
    std::vector<double> imu, iphi, irho, ise2, ixi, isu2, inu;
    for (int it = 0; it < 610000; ++it) {
        ind.sweep();
        if (it >= 10000 && it % 120 == 0) {
            imu.push_back(ind.mu);
            iphi.push_back(ind.phi);
            irho.push_back(ind.rho);
            ise2.push_back(ind.se2);
            ixi.push_back(ind.xi);
            isu2.push_back(ind.su2);
            inu.push_back(ind.nu);
        }
    }
    REQUIRE(lib.size() >= 5000);
    REQUIRE(imu.size() >= 5000);
    const auto check = [&](const std::vector<double>& a, const std::vector<double>& b,
                           const char* name) {
        const double p = testutil::ks_two_sample_pvalue(a, b);
        INFO(name << " ks p = " << p);
        REQUIRE(p > 0.01);
    };
    check(lib.mu, imu, "mu");
    check(lib.phi, iphi, "phi");
    check(lib.rho, irho, "rho");
    check(lib.sigma_eta2, ise2, "sigma_eta2");
    check(lib.xi, ixi, "xi");
    check(lib.sigma_u2, isu2, "sigma_u2");
    check(lib.nu, inu, "nu");
}
