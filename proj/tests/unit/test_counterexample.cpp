#include "doctest.h"

#include <cmath>
#include <sstream>

#include "rbn/counterexample.hpp"

using namespace rbn;
using namespace rbn::counterexample;

TEST_CASE("ce drift values") {
    const double out[] = {1.5};
    CHECK(ce_drift(out, 1.0)[0] == 0.0);
    const double half[] = {0.5};
    CHECK(ce_drift(half, 1.0)[0] == doctest::Approx(-2.0).epsilon(1e-15));
    const double two[] = {0.3, -0.4};
    const auto b = ce_drift(two, 2.0);
    CHECK(b[0] == doctest::Approx(-4.0).epsilon(1e-14));
    CHECK(b[1] == doctest::Approx(4.0).epsilon(1e-14));
    const double zero[] = {0.0, 0.0};
    CHECK_THROWS_AS(ce_drift(zero, 1.0), DomainError);
    CHECK(ce_drift_floored(zero, 1.0, 1e-6)[0] == 0.0);
    const double tiny[] = {1e-9};
    CHECK(ce_drift_floored(tiny, 1.0, 1e-6)[0] == doctest::Approx(-1e6));
}

TEST_CASE("ce drift is odd") {
    auto eng = make_stream(1, 0);
    for (int i = 0; i < 200; ++i) {
        double x[3], y[3];
        for (int k = 0; k < 3; ++k) {
            x[k] = 2 * uniform_open(eng) - 1;
            y[k] = -x[k];
        }
        const auto a = ce_drift(x, 1.3), b = ce_drift(y, 1.3);
        for (int k = 0; k < 3; ++k) CHECK(a[k] == -b[k]);
    }
}

TEST_CASE("critical parameters") {
    CHECK(CeParams(0.55, 1.0, 1).supercritical());
    CHECK_FALSE(CeParams(0.55, 0.5, 1).supercritical());
    CHECK_FALSE(CeParams(0.3, 2.0, 1).supercritical());
    CHECK_THROWS_AS(CeParams(1.0, 1.0, 1), DomainError);
    CHECK(declared_gamma(0.6) == doctest::Approx(0.55));
}

TEST_CASE("escape inequality algebra") {
    // log-slope of required K in eps equals 1 - gamma - alpha gamma
    for (auto [g, a] : {std::pair{0.5, 3.0}, {0.3, 2.0}, {0.55, 1.0}, {0.7, 0.2}})
        for (std::size_t d : {1u, 3u}) {
            const double e1 = 0.01 / static_cast<double>(d), e2 = 0.0003 / static_cast<double>(d);
            const double k1 = escape_inequality_check(e1, g, a, d, 1.0).required_k;
            const double k2 = escape_inequality_check(e2, g, a, d, 1.0).required_k;
            CHECK(std::log(k1 / k2) / std::log(e1 / e2) == doctest::Approx(escape_exponent(g, a)).epsilon(1e-9));
        }
    CHECK(escape_exponent(0.5, 3.0) == doctest::Approx(-1.0));
    // critical alpha: independent of eps
    const double g = 0.4, a = (1 - g) / g;
    CHECK(escape_inequality_check(0.1, g, a, 1, 1).required_k ==
          doctest::Approx(escape_inequality_check(1e-5, g, a, 1, 1).required_k).epsilon(1e-12));
    // subcritical: vanishes as eps decreases
    CHECK(escape_inequality_check(1e-8, 0.3, 2.0, 1, 1).required_k < escape_inequality_check(1e-2, 0.3, 2.0, 1, 1).required_k);
    // the inequality holds exactly when K reaches the bound
    for (double eps : {0.2, 0.01}) {
        const auto c = escape_inequality_check(eps, 0.5, 3.0, 2, 1.0);
        CHECK(escape_inequality_check(eps, 0.5, 3.0, 2, c.required_k * (1 + 1e-9)).holds);
        CHECK_FALSE(escape_inequality_check(eps, 0.5, 3.0, 2, c.required_k * (1 - 1e-9)).holds);
        CHECK(c.margin == doctest::Approx(1.0 - c.required_k));
    }
    CHECK_THROWS_AS(escape_inequality_check(0.6, 0.5, 1, 2, 1), DomainError);
}

TEST_CASE("zero forcing is degenerate") {
    const auto f = fbm::zero_path(fbm::TimeGrid(1.0, 256), 1, 0.6);
    const double deltas[] = {1e-6};
    const auto r = attempt_solve(f, CeParams(0.55, 1.0, 1), deltas);
    CHECK(r.degenerate);
    CHECK(r.floors[0].verdict == "degenerate");
    for (double v : r.floors[0].x.values) CHECK(v == 0.0);
}

TEST_CASE("large forcing leaves the ball and stays drift free") {
    auto f = fbm::zero_path(fbm::TimeGrid(1.0, 1024), 2, 0.6);
    for (std::size_t i = 0; i <= 1024; ++i) {
        f(i, 0) = 50.0 * f.grid.t(i);
        f(i, 1) = -20.0 * f.grid.t(i);
    }
    const double deltas[] = {1e-8, 1e-4};
    const auto r = attempt_solve(f, CeParams(0.55, 1.0, 2), deltas);
    for (const auto& fl : r.floors) {
        std::size_t exit = 0;
        while (std::hypot(fl.x(exit, 0), fl.x(exit, 1)) < 1) ++exit;
        for (std::size_t i = exit; i <= 1024; ++i) {
            CHECK(std::hypot(fl.x(i, 0), fl.x(i, 1)) >= 1);
            CHECK(fl.psi(i, 0) == fl.psi(exit, 0));
            CHECK(fl.psi(i, 1) == fl.psi(exit, 1));
        }
    }
}

TEST_CASE("excursion detection on a monotone path") {
    // increasing forcing and a drift that never crosses 0 keep t' at 0
    auto f = fbm::zero_path(fbm::TimeGrid(1.0, 4096), 1, 0.6);
    for (std::size_t i = 0; i <= 4096; ++i) f(i) = 3.0 * f.grid.t(i);
    const double deltas[] = {1e-6};
    const auto r = attempt_solve(f, CeParams(0.55, 0.1, 1), deltas);
    const auto& ex = r.floors[0].excursions;
    REQUIRE(ex.size() == 4);
    CHECK(ex[0].eps == 0.5);
    for (std::size_t m = 0; m < ex.size(); ++m) {
        CHECK(ex[m].t_prime == 0.0);
        CHECK(ex[m].t_doubleprime > ex[m].t_prime);
        if (m > 0) CHECK(ex[m].eps == ex[m - 1].eps / 2);
        const double tau = ex[m].t_doubleprime;
        CHECK(ex[m].k_hat == doctest::Approx((ex[m].eps + tau * std::pow(ex[m].eps, -0.1)) / std::pow(tau, 0.55)));
    }
    CHECK_FALSE(r.floors[0].signature);
    auto bad = f;
    bad(0) = 0.1;
    CHECK_THROWS_AS(attempt_solve(bad, CeParams(0.55, 0.1, 1), deltas), DomainError);
    CHECK_THROWS_AS(attempt_solve(fbm::zero_path(fbm::TimeGrid(0.5, 16), 1, 0.6), CeParams(0.55, 1, 1), deltas),
                    DomainError);
}

TEST_CASE("escape statistic separates super- and subcritical drifts (reduced)") {
    fbm::FbmSampler s(fbm::HurstParameter(0.6), fbm::TimeGrid(1.0, 1 << 13));
    const double deltas[] = {1e-8};
    int sup = 0, sub = 0;
    const int n = 30;
    for (int m = 0; m < n; ++m) {
        const auto f = s.sample(1, 3, m);
        sup += attempt_solve(f, CeParams(0.55, 1.0, 1), deltas).floors[0].strictly_increasing;
        sub += attempt_solve(f, CeParams(0.55, 0.5, 1), deltas).floors[0].strictly_increasing;
    }
    CHECK(sup >= 0.7 * n);
    CHECK(sub <= 0.3 * n);
}

TEST_CASE("bad drifts") {
    const auto b = construct_bad_drift(0.75, 1, 2);
    CHECK(b.alpha == doctest::Approx((0.5 + 1.0 / 3) / 2));
    CHECK(b.lp_stable);
    CHECK(b.exact_norm_p == doctest::Approx(2.0 / (1 - 2 * b.alpha)));
    CHECK(b.grid_norm_p.back() < b.exact_norm_p);
    CHECK(b.drift.components == 1);
    const double x[] = {0.25};
    double out[1];
    b.drift.f(x, out);
    CHECK(out[0] == doctest::Approx(-std::pow(0.25, -b.alpha)));

    for (auto [h, d, p] : {std::tuple{0.9, 3u, 3.0}, {0.6, 2u, 2.0}, {0.75, 2u, 4.0}}) {
        const auto bd = construct_bad_drift(h, d, p);
        CHECK(bd.alpha > 1 / h - 1);
        CHECK(bd.alpha < static_cast<double>(d) / p);
        CHECK(bd.lp_stable);
    }
    try {
        construct_bad_drift(0.25, 1, 1);
        FAIL("expected refusal");
    } catch (const RegimeRefusal& e) {
        CHECK(e.reason() == "regime");
    }
    CHECK_THROWS_AS(construct_bad_drift(0.5, 1, 1), RegimeRefusal);
}

TEST_CASE("excursion csv") {
    fbm::FbmSampler s(fbm::HurstParameter(0.6), fbm::TimeGrid(1.0, 1024));
    const double deltas[] = {1e-8, 1e-4};
    const auto r = attempt_solve(s.sample(1, 1, 0), CeParams(0.55, 1.0, 1), deltas);
    std::ostringstream os;
    write_csv(os, r, 1);
    const auto txt = os.str();
    CHECK(txt.find("delta=0.0001") != std::string::npos);
    CHECK(txt.find("eps,t_prime,t_doubleprime,K_hat,verdict\n") != std::string::npos);
    CHECK(std::count(txt.begin(), txt.end(), '\n') == 6);
    CHECK_THROWS_AS(write_csv(os, r, 2), DomainError);
}
