#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "safesgd/privacy.hpp"

using namespace safesgd;
using privacy::PrivacyParams;

namespace {

// Reference operating point: K=8000, zeta=16/1122, L'=0.84, G=9.2, delta=1e-5.
PrivacyParams reference_params(double sigma = 2.0, double r = 0.0) {
    return {8000.0, 16.0 / 1122.0, sigma, 0.84, 9.2, 1e-5, r};
}

}  // namespace

TEST_CASE("subsampled Gaussian Renyi bound") {
    SECTION("zeta -> 0 gives zero") {
        CHECK(privacy::rdp_subsampled_gaussian(2.0, 0.0, 1.0, 2.0) == 0.0);
    }
    SECTION("direct substitution") {
        CHECK_THAT(privacy::rdp_subsampled_gaussian(2.0, 0.01, 1.0, 2.0),
                   Catch::Matchers::WithinRel(2.5e-4, 1e-12));
    }
    SECTION("doubling sigma divides the bound by four") {
        const double a = privacy::rdp_subsampled_gaussian(3.0, 0.05, 2.0, 2.0);
        const double b = privacy::rdp_subsampled_gaussian(3.0, 0.05, 2.0, 4.0);
        CHECK_THAT(a / b, Catch::Matchers::WithinRel(4.0, 1e-12));
    }
    SECTION("validity flags are recorded, value still computed") {
        std::vector<std::string> flags;
        const double v = privacy::rdp_subsampled_gaussian(2.0, 0.5, 2.0, 1.0, &flags);
        CHECK(v > 0.0);
        CHECK(flags.size() == 2);
    }
    SECTION("domain errors") {
        CHECK_THROWS_AS(privacy::rdp_subsampled_gaussian(2.0, 0.1, -1.0, 2.0), std::domain_error);
        CHECK_THROWS_AS(privacy::rdp_subsampled_gaussian(2.0, 0.1, 1.0, 0.0), std::domain_error);
    }
}

TEST_CASE("composed CGP budget") {
    SECTION("reference configuration") {
        // 5 * 8000 * (16/1122)^2 * 0.84^2 / 4, evaluated independently.
        const double zeta = 16.0 / 1122.0;
        const double expect = 5.0 * 8000.0 * zeta * zeta * 0.84 * 0.84 / 4.0;
        CHECK_THAT(privacy::cgp_budget(8000, zeta, 0.84, 2.0),
                   Catch::Matchers::WithinRel(expect, 1e-12));
        CHECK_THAT(expect, Catch::Matchers::WithinAbs(1.4349, 5e-4));
    }
    SECTION("unit substitution") {
        CHECK_THAT(privacy::cgp_budget(1, 1.0, 1.0, std::sqrt(5.0)),
                   Catch::Matchers::WithinRel(1.0, 1e-12));
    }
    SECTION("composition is exactly linear in K") {
        const double base = privacy::cgp_budget(1, 0.013, 0.9, 1.7);
        for (double K : {2.0, 10.0, 8000.0, 123456.0}) {
            CHECK(privacy::cgp_budget(K, 0.013, 0.9, 1.7) == K * base);
        }
    }
    SECTION("domain error on nonpositive sigma") {
        CHECK_THROWS_AS(privacy::cgp_budget(10, 0.1, 1.0, 0.0), std::domain_error);
    }
}

TEST_CASE("geo budget from the CGP budget") {
    SECTION("hand evaluation at rho = 1.435, delta = 1e-5, r = 0") {
        CHECK_THAT(privacy::gp_from_cgp(1.435, 1e-5, 0.0),
                   Catch::Matchers::WithinAbs(8.1292, 2e-4));
    }
    SECTION("rho = 0 gives 0") { CHECK(privacy::gp_from_cgp(0.0, 1e-5, 3.0) == 0.0); }
    SECTION("reference configuration with the back-solved radius") {
        const double rho = privacy::cgp_budget(8000, 16.0 / 1122.0, 0.84, 2.0);
        const double r = privacy::backsolve_radius(rho, 1e-5, 36.2);
        CHECK_THAT(r, Catch::Matchers::WithinAbs(19.6, 0.1));
        CHECK_THAT(privacy::gp_from_cgp(rho, 1e-5, r), Catch::Matchers::WithinRel(36.2, 1e-12));
    }
    SECTION("delta domain") {
        CHECK_THROWS_AS(privacy::gp_from_cgp(1.0, 0.0, 0.0), std::domain_error);
        CHECK_THROWS_AS(privacy::gp_from_cgp(1.0, 1.0, 0.0), std::domain_error);
    }
}

TEST_CASE("classic accountant") {
    SECTION("reference configuration lands at 865 +- 5") {
        const double eps = privacy::dp_epsilon(8000, 16.0 / 1122.0, 9.2, 2.0, 1e-5);
        CHECK(eps > 860.0);
        CHECK(eps < 870.0);
    }
    SECTION("G -> 0 gives 0") { CHECK(privacy::dp_epsilon(8000, 0.01, 0.0, 2.0, 1e-5) == 0.0); }
    SECTION("term structure: sigma^-2 and sigma^-1 components") {
        const double K = 500, zeta = 0.02, G = 3.0, delta = 1e-5;
        const double A = 20.0 * G * G * zeta * zeta * K;
        const double B = 2.0 * G * zeta * std::sqrt(20.0 * K * std::log(1.0 / delta));
        for (double sigma : {1.0, 2.0, 3.5}) {
            CHECK_THAT(privacy::dp_epsilon(K, zeta, G, sigma, delta),
                       Catch::Matchers::WithinRel(A / (sigma * sigma) + B / sigma, 1e-12));
        }
    }
}

TEST_CASE("trade-off derivatives") {
    SECTION("reference configuration: d rho / d(-sigma^2) = rho / sigma^2") {
        const auto d = privacy::tradeoff_derivatives(reference_params());
        const double rho = privacy::cgp_budget(8000, 16.0 / 1122.0, 0.84, 2.0);
        CHECK_THAT(d.d_rho, Catch::Matchers::WithinRel(rho / 4.0, 1e-12));
        CHECK_THAT(d.d_rho, Catch::Matchers::WithinAbs(0.359, 1e-3));
    }
    SECTION("ordering d_eps_dp > d_eps_geo > d_rho across sigma in [1, 5]") {
        const double rho2 = privacy::cgp_budget(8000, 16.0 / 1122.0, 0.84, 2.0);
        const double r = privacy::backsolve_radius(rho2, 1e-5, 36.2);
        for (int i = 0; i <= 40; ++i) {
            const double sigma = 1.0 + 4.0 * i / 40.0;
            const auto d = privacy::tradeoff_derivatives(reference_params(sigma, r));
            CHECK(d.d_eps_dp > d.d_eps_geo);
            CHECK(d.d_eps_geo > d.d_rho);
        }
    }
    SECTION("matches central finite differences of the budgets in sigma^2") {
        const double r = 19.6;
        for (double sigma : {1.0, 1.7, 2.0, 3.0, 4.8}) {
            const auto d = privacy::tradeoff_derivatives(reference_params(sigma, r));
            const double s2 = sigma * sigma;
            const double h = 1e-4 * s2;
            auto at = [&](double s2v) {
                const PrivacyParams p = reference_params(std::sqrt(s2v), r);
                const double rho = privacy::cgp_budget(p.K, p.zeta, p.L_prime, p.sigma);
                return std::array<double, 3>{rho, privacy::gp_from_cgp(rho, p.delta, p.r),
                                             privacy::dp_epsilon(p.K, p.zeta, p.G, p.sigma, p.delta)};
            };
            const auto hi = at(s2 + h);
            const auto lo = at(s2 - h);
            const double fd_rho = -(hi[0] - lo[0]) / (2.0 * h);
            const double fd_geo = -(hi[1] - lo[1]) / (2.0 * h);
            const double fd_dp = -(hi[2] - lo[2]) / (2.0 * h);
            CHECK_THAT(d.d_rho, Catch::Matchers::WithinRel(fd_rho, 1e-6));
            CHECK_THAT(d.d_eps_geo, Catch::Matchers::WithinRel(fd_geo, 1e-6));
            CHECK_THAT(d.d_eps_dp, Catch::Matchers::WithinRel(fd_dp, 1e-6));
        }
    }
}

TEST_CASE("budget monotonicity over randomized grids") {
    Rng rng(31);
    for (int t = 0; t < 200; ++t) {
        const double K = 1.0 + rng.index(10000);
        const double zeta = rng.uniform(1e-4, 0.2);
        const double L = rng.uniform(0.1, 3.0);
        const double G = rng.uniform(0.5, 15.0);
        const double sigma = rng.uniform(0.5, 5.0);
        const double delta = 1e-5;
        const double r = rng.uniform(0.0, 30.0);
        const double drho = privacy::cgp_budget(K, zeta, L, sigma);

        CHECK(privacy::cgp_budget(K, zeta, L, sigma * 1.1) <= drho);
        CHECK(privacy::cgp_budget(K + 50, zeta, L, sigma) >= drho);
        CHECK(privacy::cgp_budget(K, zeta * 1.1, L, sigma) >= drho);
        CHECK(privacy::cgp_budget(K, zeta, L * 1.1, sigma) >= drho);

        const double geo = privacy::gp_from_cgp(drho, delta, r);
        CHECK(privacy::gp_from_cgp(privacy::cgp_budget(K, zeta, L, sigma * 1.1), delta, r) <= geo);

        const double dp = privacy::dp_epsilon(K, zeta, G, sigma, delta);
        CHECK(privacy::dp_epsilon(K, zeta, G, sigma * 1.1, delta) <= dp);
        CHECK(privacy::dp_epsilon(K + 50, zeta, G, sigma, delta) >= dp);
        CHECK(privacy::dp_epsilon(K, zeta, G * 1.1, sigma, delta) >= dp);
    }
}

TEST_CASE("algebraic consistency of the two geo-budget forms") {
    Rng rng(32);
    for (int t = 0; t < 100; ++t) {
        const double K = 1.0 + rng.index(20000);
        const double zeta = rng.uniform(1e-4, 0.5);
        const double L = rng.uniform(0.05, 4.0);
        const double sigma = rng.uniform(0.3, 6.0);
        const double delta = rng.uniform(1e-9, 0.5);
        const double r = rng.uniform(0.0, 50.0);
        const double composite = 5.0 * K * zeta * zeta * L * L * r / (sigma * sigma) +
                                 (zeta * L / sigma) * std::sqrt(20.0 * K * std::log(1.0 / delta));
        const double via_rho = privacy::gp_from_cgp(privacy::cgp_budget(K, zeta, L, sigma), delta, r);
        CHECK_THAT(via_rho, Catch::Matchers::WithinRel(composite, 1e-9));
    }
}

TEST_CASE("report carries validity flags instead of throwing") {
    PrivacyParams p = reference_params();
    p.sigma = 0.5;  // sigma^2 / L'^2 = 0.354 < 1.5
    const auto rep = privacy::evaluate(p);
    CHECK(rep.rho > 0.0);
    REQUIRE_FALSE(rep.validity_flags.empty());
    CHECK(rep.validity_flags[0].find("1.5") != std::string::npos);

    const auto clean = privacy::evaluate(reference_params());
    CHECK(clean.validity_flags.empty());
}

TEST_CASE("sensitivity estimators") {
    const auto shards =
        data::partition({48}, {0}, data::SynthesisConfig{}, 77);
    const auto& shard = shards[0];

    SECTION("gradient-norm estimate: running max, prefix-consistent, positive") {
        privacy::EstimateOptions opt{6, 8, 0.01, 0.5};
        Rng a = Rng::stream(5, StreamTag::kEstimator, 0);
        const auto full = privacy::estimate_G(shard, opt, a);
        REQUIRE(full.trace.size() == 6);
        for (std::size_t i = 1; i < full.trace.size(); ++i) {
            CHECK(full.trace[i] >= full.trace[i - 1]);
        }
        CHECK(full.value == full.trace.back());
        CHECK(full.value > 0.0);

        privacy::EstimateOptions shorter{3, 8, 0.01, 0.5};
        Rng b = Rng::stream(5, StreamTag::kEstimator, 0);
        const auto half = privacy::estimate_G(shard, shorter, b);
        CHECK(full.value >= half.value);
        for (std::size_t i = 0; i < half.trace.size(); ++i) CHECK(half.trace[i] == full.trace[i]);
    }
    SECTION("single evaluation at all-zero parameters is finite") {
        privacy::EstimateOptions opt{1, 8, 0.01, 0.0};
        Rng a = Rng::stream(6, StreamTag::kEstimator, 0);
        const auto g = privacy::estimate_G(shard, opt, a);
        CHECK(std::isfinite(g.value));
        CHECK(g.value > 0.0);
        Rng b = Rng::stream(6, StreamTag::kEstimator, 1);
        const auto lp = privacy::estimate_L_prime(shard, opt, b);
        CHECK(std::isfinite(lp.value));
        CHECK(lp.value >= 0.0);
    }
    SECTION("input-Lipschitz estimate is a running max") {
        privacy::EstimateOptions opt{4, 8, 0.01, 0.5};
        Rng a = Rng::stream(7, StreamTag::kEstimator, 1);
        const auto lp = privacy::estimate_L_prime(shard, opt, a);
        REQUIRE(lp.trace.size() == 4);
        for (std::size_t i = 1; i < lp.trace.size(); ++i) CHECK(lp.trace[i] >= lp.trace[i - 1]);
        CHECK(lp.value > 0.0);
    }
}
