#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rsvol/riskeval.hpp"

using namespace rsvol;

TEST_CASE("qlike hand values") {
    REQUIRE(qlike(1.7, 1.7) == 0.0);
    REQUIRE(qlike(2.0, 1.0) == Catch::Approx(1.0 - std::log(2.0)).epsilon(0).margin(1e-10));
    REQUIRE(qlike(0.5, 1.0) == Catch::Approx(std::log(2.0) - 0.5).epsilon(0).margin(1e-10));
    REQUIRE_THROWS_AS(qlike(-1.0, 1.0), DataError);
    REQUIRE_THROWS_AS(qlike(1.0, 0.0), DataError);
    // nonnegative with equality only at x == f
    for (const double x : {0.2, 0.9, 1.0, 3.7}) {
        for (const double f : {0.3, 1.0, 2.2}) {
            const double l = qlike(x, f);
            if (x == f) REQUIRE(l == 0.0);
            else REQUIRE(l > 0.0);
        }
    }
}

TEST_CASE("fz0 hand values") {
    REQUIRE(fz0(1.0, -1.0, -1.5, 0.05) ==
            Catch::Approx(2.0 / 3.0 + std::log(1.5) - 1.0).epsilon(0).margin(1e-10));
    // reference figures quoted to five decimals (the second is truncated,
    // not rounded: the exact value is 13.4054651...)
    REQUIRE(fz0(1.0, -1.0, -1.5, 0.05) == Catch::Approx(0.07213).epsilon(0).margin(1e-5));
    REQUIRE(fz0(-2.0, -1.0, -1.5, 0.05) == Catch::Approx(13.40546).epsilon(0).margin(1e-5));
    // y == v: the indicator fires but contributes nothing
    REQUIRE(fz0(-1.0, -1.0, -1.5, 0.05) == fz0(1.0, -1.0, -1.5, 0.05));
    REQUIRE_THROWS_AS(fz0(0.0, -1.0, 0.5, 0.05), DataError);
}

TEST_CASE("fz0 loss differences are homogeneous of degree zero") {
    const double y = -1.3, v1 = -1.1, e1 = -1.9, v2 = -0.9, e2 = -1.4;
    const double d = fz0(y, v1, e1, 0.05) - fz0(y, v2, e2, 0.05);
    for (const double c : {2.0, 0.5}) {
        const double dc = fz0(c * y, c * v1, c * e1, 0.05) - fz0(c * y, c * v2, c * e2, 0.05);
        REQUIRE(std::fabs(dc - d) <= 4.0 * std::fabs(d) * 1e-16 + 1e-15);
    }
}

TEST_CASE("gw unconditional") {
    SECTION("identical losses flag degeneracy") {
        const GwResult r = gw_unconditional({0.0, 0.0, 0.0, 0.0});
        REQUIRE(r.degenerate);
        REQUIRE(r.stat == 0.0);
        REQUIRE(r.pvalue == 1.0);
    }
    SECTION("hand arithmetic") {
        const GwResult r = gw_unconditional({1.0, 1.0, 1.0, -1.0});
        REQUIRE(r.stat == Catch::Approx(1.0).epsilon(0).margin(1e-12));
    }
    SECTION("antisymmetry under model swap") {
        const std::vector<double> d = {0.3, -0.2, 0.8, 0.1, -0.4, 0.6};
        std::vector<double> neg(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) neg[i] = -d[i];
        const GwResult a = gw_unconditional(d);
        const GwResult b = gw_unconditional(neg);
        REQUIRE(a.stat == Catch::Approx(-b.stat).epsilon(0).margin(1e-12));
        REQUIRE(a.pvalue == Catch::Approx(b.pvalue).epsilon(0).margin(1e-12));
    }
}

TEST_CASE("gw conditional") {
    SECTION("zero differences flag degeneracy") {
        const GwResult r = gw_conditional(std::vector<double>(20, 0.0));
        REQUIRE(r.degenerate);
    }
    SECTION("statistic invariant under model swap") {
        Rng rng(3);
        std::vector<double> d(300);
        for (auto& x : d) x = rng.normal(0.05, 1.0);
        std::vector<double> neg(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) neg[i] = -d[i];
        const GwResult a = gw_conditional(d);
        const GwResult b = gw_conditional(neg);
        REQUIRE(a.stat == Catch::Approx(b.stat).epsilon(0).margin(1e-9));
        REQUIRE(a.indicator == Catch::Approx(1.0 - b.indicator).epsilon(0).margin(1e-12));
    }
    SECTION("size under an iid null") {
        Rng rng(5);
        const int nsim = 2000;
        int reject = 0;
        for (int s = 0; s < nsim; ++s) {
            std::vector<double> d(600);
            for (auto& x : d) x = rng.normal();
            if (gw_conditional(d).pvalue < 0.05) ++reject;
        }
        const double rate = double(reject) / double(nsim);
        REQUIRE(rate > 0.03);
        REQUIRE(rate < 0.07);
    }
}

TEST_CASE("dq test") {
    SECTION("size under an iid Bernoulli null") {
        Rng rng(7);
        const double alpha = 0.05;
        const int nsim = 2000;
        int reject = 0;
        for (int s = 0; s < nsim; ++s) {
            std::vector<int> hits(600);
            std::vector<double> vf(600);
            for (std::size_t t = 0; t < hits.size(); ++t) {
                hits[t] = rng.uniform() < alpha ? 1 : 0;
                vf[t] = -2.0 + 0.1 * rng.normal();
            }
            if (dq_test(hits, vf, alpha).pvalue < 0.05) ++reject;
        }
        const double rate = double(reject) / double(nsim);
        REQUIRE(rate > 0.03);
        REQUIRE(rate < 0.07);
    }
    SECTION("all-zero hits still produce a finite statistic") {
        std::vector<int> hits(600, 0);
        std::vector<double> vf(600);
        Rng rng(9);
        for (auto& v : vf) v = -3.0 + 0.05 * rng.normal();
        const DqResult r = dq_test(hits, vf, 0.01);
        REQUIRE(std::isfinite(r.stat));
        REQUIRE(r.degenerate);  // lagged-hit column is empty
        REQUIRE(r.dof < 3);
    }
    SECTION("clustered violations are detected") {
        // hit_t = hit_{t-1}: long runs of violations
        std::vector<int> hits(600, 0);
        for (std::size_t t = 100; t < 160; ++t) hits[t] = 1;
        std::vector<double> vf(600, -2.0);
        const DqResult r = dq_test(hits, vf, 0.05);
        REQUIRE(r.pvalue < 0.01);
    }
}

TEST_CASE("mcs") {
    Rng rng(11);
    SECTION("identical columns both survive") {
        std::vector<double> base(300);
        for (auto& x : base) x = rng.uniform(0.5, 1.5);
        const McsResult r = mcs({base, base}, 0.9, 500, 10);
        REQUIRE(r.in_set[0]);
        REQUIRE(r.in_set[1]);
        REQUIRE(r.pvalues[0] >= 0.5);
    }
    SECTION("a clearly worse model is eliminated") {
        std::vector<std::vector<double>> losses(3, std::vector<double>(400));
        for (std::size_t t = 0; t < 400; ++t) {
            const double common = rng.normal();
            losses[0][t] = 1.0 + common + 0.1 * rng.normal();
            losses[1][t] = 1.0 + common + 0.1 * rng.normal();
            losses[2][t] = 11.0 + common + 0.1 * rng.normal();  // +10 sd shift
        }
        const McsResult r = mcs(losses, 0.9, 1000, 10);
        REQUIRE_FALSE(r.in_set[2]);
        REQUIRE(r.pvalues[2] < 0.01);
        REQUIRE(r.in_set[0]);
        REQUIRE(r.in_set[1]);
        REQUIRE(r.elimination.front() == 2);
    }
    SECTION("higher confidence keeps more models and p-values are monotone") {
        std::vector<std::vector<double>> losses(4, std::vector<double>(300));
        for (std::size_t t = 0; t < 300; ++t) {
            for (std::size_t m = 0; m < 4; ++m) {
                losses[m][t] = 1.0 + 0.05 * double(m) + rng.normal();
            }
        }
        const McsResult r90 = mcs(losses, 0.90, 800, 10, 333);
        const McsResult r75 = mcs(losses, 0.75, 800, 10, 333);
        for (std::size_t m = 0; m < 4; ++m) {
            if (r75.in_set[m]) REQUIRE(r90.in_set[m]);  // 75% set inside the 90% set
        }
        // p-values nondecreasing along the worst-first elimination order
        for (std::size_t i = 1; i < r90.elimination.size(); ++i) {
            REQUIRE(r90.pvalues[r90.elimination[i]] >= r90.pvalues[r90.elimination[i - 1]]);
        }
    }
    SECTION("errors") {
        REQUIRE_THROWS_AS(mcs({std::vector<double>(5, 1.0)}, 0.9, 100, 10), ConfigError);
        REQUIRE_THROWS_AS(
            mcs({std::vector<double>(5, 1.0), std::vector<double>(5, 1.0)}, 0.9, 100, 10),
            DataError);
    }
}

TEST_CASE("loss series diff") {
    LossSeries s;
    s.model_a = "A";
    s.model_b = "B";
    s.loss_a = {1.0, 2.0, 3.0};
    s.loss_b = {0.5, 2.5, 1.0};
    REQUIRE(s.diff() == std::vector<double>{0.5, -0.5, 2.0});
    s.loss_b.pop_back();
    REQUIRE_THROWS_AS(s.diff(), DataError);
}
