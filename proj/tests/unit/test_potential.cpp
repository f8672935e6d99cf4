#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "chc/errors.hpp"
#include "chc/potential.hpp"
#include "support.hpp"

using namespace chc;
using chc::testing::Gen;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Direct term-by-term sums in long double.
long double poly_oracle(long double u, int n, long double lambda) {
    long double s = 0.0L;
    for (int k = 0; k <= n; ++k) s += std::pow(u, 2 * k + 1) / (2 * k + 1);
    return -2.0L * s + lambda * u;
}

long double entropy_oracle(long double c) { return (1 + c) * std::log(1 + c) + (1 - c) * std::log(1 - c); }

long double tail_oracle(long double c, int k0) {
    long double s = 0.0L;
    for (int k = k0; k < 5000; ++k) s += std::pow(c, 2 * k + 2) / ((2.0L * k + 1) * (2.0L * k + 2));
    return s;
}

}  // namespace

TEST_CASE("exact nonlinearity") {
    CHECK(f_exact(0.0, 3.0) == 0.0);
    CHECK_THAT(f_exact(0.5, 0.0), WithinRel(-1.0986122886681098, 1e-14));
    CHECK_THAT(f_exact(-0.5, 2.0), WithinRel(0.0986122886681098, 1e-12));
    CHECK(f_exact(1.0, 0.0) == -std::numeric_limits<double>::infinity());
    CHECK(f_exact(-1.2, 0.0) == std::numeric_limits<double>::infinity());
    CHECK(is_singular(f_exact(1.0, 0.0)));
    CHECK_FALSE(is_singular(f_exact(0.99, 0.0)));
    chc::testing::for_all(200, 1, [](Gen& g) {
        const double u = g.uniform(-0.999, 0.999), lam = g.uniform(-3, 3);
        CHECK(f_exact(-u, lam) == -f_exact(u, lam));
    });
}

TEST_CASE("polynomial truncation") {
    const auto spec = [](int n, double lam = 0.0) { return PotentialSpec::truncated(lam, n); };
    CHECK(f_poly(0.0, spec(5)) == 0.0);
    CHECK_THAT(f_poly(0.5, spec(1)), WithinRel(-13.0 / 12.0, 1e-15));
    CHECK_THAT(f_poly(0.5, spec(60)), WithinAbs(f_exact(0.5, 0.0), 1e-12));
    CHECK_THROWS_AS(f_poly(0.1, PotentialSpec::exact(0.0)), std::invalid_argument);

    chc::testing::for_all(300, 2, [&](Gen& g) {
        const int n = static_cast<int>(g.index(0, 20));
        const double u = g.uniform(-1.3, 1.3), lam = g.uniform(-3, 3);
        CHECK(f_poly(-u, spec(n, lam)) == -f_poly(u, spec(n, lam)));
        CHECK_THAT(f_poly(u, spec(n, lam)),
                   WithinAbs(static_cast<double>(poly_oracle(u, n, lam)), 1e-12 * (1 + std::pow(std::abs(u), 2 * n + 1))));
    });
}

TEST_CASE("p_n = f_n - lambda u is non-increasing") {
    chc::testing::for_all(2000, 3, [](Gen& g) {
        const int n = static_cast<int>(g.index(0, 16));
        const double lam = g.uniform(-3, 3);
        const double a = g.uniform(-1.5, 1.5), b = g.uniform(-1.5, 1.5);
        const PotentialSpec s = PotentialSpec::truncated(lam, n);
        const double pa = f_poly(a, s) - lam * a, pb = f_poly(b, s) - lam * b;
        CHECK((pa - pb) * (a - b) <= 1e-14);
    });
    SECTION("shifted sign (f_n(a+b) - f_n(a)) b <= lambda b^2") {
        chc::testing::for_all(2000, 4, [](Gen& g) {
            const int n = static_cast<int>(g.index(0, 16));
            const double lam = g.index(0, 1) ? 0.0 : g.uniform(-3, 3);
            const double a = g.uniform(-1, 1), b = g.uniform(-1, 1);
            const PotentialSpec s = PotentialSpec::truncated(lam, n);
            CHECK((f_poly(a + b, s) - f_poly(a, s)) * b <= lam * b * b + 1e-13);
        });
    }
    SECTION("stable divided difference agrees with the direct quotient") {
        chc::testing::for_all(500, 5, [](Gen& g) {
            const int n = static_cast<int>(g.index(0, 12));
            const double u = g.uniform(-0.9, 0.9), d = g.uniform(-0.3, 0.3);
            const long double direct = (poly_oracle(u + d, n, 0) - poly_oracle(u, n, 0)) / d;
            CHECK_THAT(p_divided_difference(u, d, n), WithinAbs(static_cast<double>(direct), 1e-9));
            CHECK(p_divided_difference(u, d, n) <= 0.0);
        });
        CHECK_THAT(p_divided_difference(0.3, 0.0, 2), WithinRel(-2.0 * (1 + 0.09 + 0.0081), 1e-14));
    }
}

TEST_CASE("uniform convergence on |u| <= 0.9") {
    for (int n : {2, 4, 8, 16, 32}) {
        const PotentialSpec s = PotentialSpec::truncated(0.0, n);
        double worst = 0.0;
        for (int i = 0; i <= 2000; ++i) {
            const double u = -0.9 + 1.8 * i / 2000.0;
            worst = std::max(worst, std::abs(f_poly(u, s) - f_exact(u, 0.0)));
        }
        CHECK(worst <= truncation_tail_bound(0.9, n) + 1e-13);
    }
    CHECK_THAT(truncation_tail_bound(0.9, 2), WithinRel(0.42224297916644046, 1e-10));
    for (int n = 1; n < 30; ++n) CHECK(truncation_tail_bound(0.9, n) < truncation_tail_bound(0.9, n - 1));
}

TEST_CASE("potential F and its truncations") {
    CHECK(F_value(0.0, 2.0) == 0.0);
    CHECK_THAT(F_value(0.5, 0.0), WithinRel(0.2616240718822739, 1e-14));
    CHECK_THAT(F_value(1.0, 1.0), WithinRel(2 * std::log(2.0) - 0.5, 1e-15));
    CHECK_THAT(F_value(-1.0, 0.0), WithinRel(2 * std::log(2.0), 1e-15));
    CHECK_THROWS_AS(F_value(1.01, 0.0), std::invalid_argument);
    for (double u : {-0.3, 0.3})
        for (double lam : {0.0, 1.5}) {
            const double h = 1e-6;
            const double fd = (F_value(u + h, lam) - F_value(u - h, lam)) / (2 * h);
            CHECK_THAT(fd, WithinAbs(-f_exact(u, lam), 1e-8));
        }
    chc::testing::for_all(100, 6, [](Gen& g) {
        const PotentialSpec s = PotentialSpec::truncated(g.uniform(-2, 2), static_cast<int>(g.index(0, 10)));
        const double u = g.uniform(-1.2, 1.2), h = 1e-6;
        const double fd = (F_poly(u + h, s) - F_poly(u - h, s)) / (2 * h);
        CHECK_THAT(fd, WithinAbs(-f_poly(u, s), 1e-7));
    });
    CHECK(potential_density(0.4, PotentialSpec::disabled()) == 0.0);
    CHECK_THROWS_AS(potential_density(1.0, PotentialSpec::exact(0.0)), SingularInput);
}

TEST_CASE("free energy") {
    SECTION("constant field") {
        const PotentialSpec s = PotentialSpec::truncated(1.0, 3);
        CHECK_THAT(free_energy(ModeVector::constant(8, 0.4), s), WithinRel(F_poly(0.4, s), 1e-14));
    }
    SECTION("0.1 e_1 with n = 0 against a refined quadrature") {
        const PotentialSpec s = PotentialSpec::truncated(0.0, 0);
        const ModeVector v = ModeVector::unit(4, 1, 0.1);
        const double coarse = free_energy(v, s);
        const double fine = free_energy(v, s, 10 * default_grid_size(4));
        CHECK_THAT(coarse, WithinAbs(fine, 1e-14));
        // ½π²·0.01 + ∫u² dθ with u = 0.1√2 cos πθ.
        CHECK_THAT(coarse, WithinRel(0.5 * kPi * kPi * 0.01 + 0.01, 1e-12));
    }
    SECTION("exact mode rejects states touching ±1") {
        CHECK_THROWS_AS(free_energy(ModeVector::unit(4, 1, 0.8), PotentialSpec::exact(0.0)), SingularInput);
        CHECK(std::isfinite(free_energy(ModeVector::unit(4, 1, 0.5), PotentialSpec::exact(0.0))));
    }
}

TEST_CASE("polynomial algebra of the a priori bound") {
    SECTION("c = 0") {
        CHECK(P_c(1.0, 0.0) == 0.0);
        CHECK(lambda_star(0.0).first == 1.0);
        CHECK(lambda_star(0.0).second == 0.0);
        CHECK(discriminant(0.0) == 0.0);
    }
    SECTION("c = 0.5 against long double partial sums") {
        const double oracle = static_cast<double>(-12.0L * tail_oracle(0.5L, 2));
        CHECK_THAT(oracle, WithinRel(-0.0072444312936435096, 1e-12));
        CHECK_THAT(discriminant(0.5), WithinRel(oracle, 1e-10));
        CHECK_THAT(lambda_star(0.5).second, WithinRel(0.0012074052156072516, 1e-10));
    }
    SECTION("closed form of the discriminant") {
        for (double c : {0.1, 0.5, 0.9, -0.7}) {
            const long double closed = std::pow(c * c + 3.0L, 2) - 6.0L * (1.5L + entropy_oracle(c));
            CHECK_THAT(discriminant(c), WithinAbs(static_cast<double>(closed), 1e-12));
        }
    }
    SECTION("non-negativity and minimizer") {
        for (double c : {0.0, 0.5, -0.5, 0.9, -0.9}) {
            CHECK(discriminant(c) <= 0.0);
            const auto [ls, pmin] = lambda_star(c);
            CHECK_THAT(P_c(ls, c), WithinAbs(pmin, 1e-12));
            for (int i = -50; i <= 50; ++i) {
                const double lam = 0.1 * i;
                CHECK(P_c(lam, c) >= 0.0);
                CHECK(P_c(lam, c) >= pmin - 1e-10);
            }
        }
        CHECK_THAT(Q_c(0.7, 0.2, 0.25), WithinRel(0.25 + P_c(0.7, 0.2), 1e-15));
    }
    SECTION("domain errors") {
        CHECK_THROWS_AS(P_c(0.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(discriminant(-1.0), std::invalid_argument);
        CHECK_THROWS_AS(lambda_star(1.5), std::invalid_argument);
    }
}
