#include "doctest.h"

#include <cmath>
#include <sstream>

#include "rbn/sde.hpp"

using namespace rbn;
using namespace rbn::sde;

namespace {

fbm::FbmPath noise(double h, std::size_t n, std::uint64_t seed, std::size_t idx = 0) {
    fbm::FbmSampler s(fbm::HurstParameter(h), fbm::TimeGrid(1.0, n));
    return s.sample(1, seed, idx);
}

mollify::CallableDrift constant(double c) {
    mollify::CallableDrift d;
    d.f = [c](std::span<const double>, std::span<double> out) { out[0] = c; };
    return d;
}

}  // namespace

TEST_CASE("regime classification") {
    CHECK(classify_regime(0.25, 1, 1).verdict == Verdict::weak_existence);
    CHECK(classify_regime(0.5, 1, 1).verdict == Verdict::boundary);
    CHECK(classify_regime(0.75, 2, 3).verdict == Verdict::counterexample_regime);
    CHECK(classify_regime(0.75, 2, 3).margin == doctest::Approx(1.0 / 3 - 2.0 / 3));
    CHECK(classify_regime(0.5, 1, INFINITY).verdict == Verdict::weak_existence);
    CHECK_THROWS_AS(classify_regime(1.0, 1, 1), DomainError);
    CHECK_THROWS_AS(classify_regime(0.5, 1, 0.5), DomainError);
    // symbolic agreement on a grid of rationals
    for (int a = 1; a < 20; ++a)
        for (int p = 1; p <= 12; ++p) {
            const double h = a / 20.0;
            const auto r = classify_regime(h, 2, p);
            const int lhs = 2 * a * 1, rhs = (20 - a) * p;  // d/p vs 1/h - 1 scaled by a p
            const Verdict expect = lhs < rhs ? Verdict::weak_existence
                                   : lhs > rhs ? Verdict::counterexample_regime
                                               : Verdict::boundary;
            CHECK(r.verdict == expect);
        }
}

TEST_CASE("zero drift reproduces x0 + W bitwise") {
    const auto w = noise(0.3, 512, 1);
    const double x0[] = {0.25};
    const auto sol = euler_solve(constant(0.0), w, x0);
    for (std::size_t i = 0; i < w.grid.size(); ++i) {
        CHECK(sol.x(i) == x0[0] + w(i));
        CHECK(sol.psi(i) == 0.0);
    }
}

TEST_CASE("constant drift gives psi = c t") {
    const auto w = noise(0.7, 256, 2);
    const double x0[] = {0.0};
    const auto sol = euler_solve(constant(1.5), w, x0);
    for (std::size_t i = 0; i < w.grid.size(); ++i) CHECK(sol.psi(i) == doctest::Approx(1.5 * w.grid.t(i)).epsilon(1e-12));
}

TEST_CASE("grid drift interpolation and outside counter") {
    const mollify::SpatialGrid g(1, 1.0, 32);
    mollify::GridFunction f(g, 1, 1.0);
    auto w = fbm::zero_path(fbm::TimeGrid(1.0, 10), 1, 0.5);
    for (std::size_t i = 0; i <= 10; ++i) w(i) = 0.2 * static_cast<double>(i);
    const double x0[] = {0.0};
    const auto sol = euler_solve(f, w, x0);
    CHECK(sol.outside_evaluations > 0);
    CHECK(sol.outside_evaluations < 10);
    CHECK_THROWS_AS(euler_solve(mollify::DriftSpec(mollify::dirac({0.0})), w, x0), DomainError);
}

TEST_CASE("nonnegative drifts give nondecreasing psi") {
    const auto w = noise(0.3, 1024, 3);
    const double x0[] = {0.0};
    const mollify::SpatialGrid g(1, 4.0, 512);
    const auto b = mollify::heat_mollify(mollify::dirac({0.0}), 1.0 / 64, g);
    const auto sol = euler_solve(b, w, x0);
    for (std::size_t i = 0; i < w.grid.n_steps; ++i) CHECK(sol.psi(i + 1) >= sol.psi(i));
    CHECK(sol.psi(w.grid.n_steps) > 0);
}

TEST_CASE("regularized solutions") {
    const auto w = noise(0.3, 1024, 4);
    const double x0[] = {0.0};
    const mollify::SpatialGrid g(1, 4.0, 512);
    const std::vector<std::size_t> ns{4, 16, 64, 256};
    const auto zero = regularized_solution(mollify::dirac({0.0}, 0.0), x0, ns, w, g);
    for (const auto& s : zero.solutions) CHECK(s.x.values == w.values);
    for (double d : zero.consecutive()) CHECK(d == 0.0);

    const auto r = regularized_solution(mollify::dirac({0.0}), x0, ns, w, g);
    CHECK(r.sup_distance.rows == 4);
    CHECK(r.sup_distance(0, 1) == r.sup_distance(1, 0));
    CHECK(r.sup_distance(2, 2) == 0.0);

    const auto w5 = noise(0.5, 256, 4);
    try {
        regularized_solution(mollify::dirac({0.0}), x0, ns, w5, g);
        FAIL("expected refusal");
    } catch (const RegimeRefusal& e) {
        CHECK(e.reason() == "regime");
    }
}

TEST_CASE("Cauchy trend of regularized solutions for a Dirac drift") {
    const fbm::TimeGrid tg(1.0, 1024);
    fbm::FbmSampler sampler(fbm::HurstParameter(0.3), tg);
    const double x0[] = {0.0};
    const mollify::SpatialGrid g(1, 4.0, 512);
    const std::vector<std::size_t> ns{4, 16, 64, 256};
    Array2 gaps(3, 200);
    for (std::size_t m = 0; m < 200; ++m) {
        const auto r = regularized_solution(mollify::dirac({0.0}), x0, ns, sampler.sample(1, 9, m), g);
        const auto c = r.consecutive();
        for (std::size_t k = 0; k < 3; ++k) gaps(k, m) = c[k];
    }
    std::vector<double> med;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto row = gaps.row(k);
        med.push_back(xlab::median(std::vector<double>(row.begin(), row.end())));
    }
    CHECK(med[1] < med[0]);
    CHECK(med[2] < med[1]);
}

TEST_CASE("drift variation") {
    auto w = fbm::zero_path(fbm::TimeGrid(1.0, 8), 1, 0.3);
    sde::SolutionPath sol;
    sol.w = w;
    sol.x = w;
    sol.psi = w;
    const double ps[] = {0, 1, 3, 2, 2, 5, 4, 4, 6};
    for (std::size_t i = 0; i <= 8; ++i) sol.psi(i) = ps[i];
    CHECK(drift_variation(sol, 0, 1).value == doctest::Approx(1 + 2 + 1 + 0 + 3 + 1 + 0 + 2));
    const double left = drift_variation(sol, 0, 0.5).value, right = drift_variation(sol, 0.5, 1).value;
    CHECK(left + right == drift_variation(sol, 0, 1).value);
    const auto v2 = drift_variation(sol, 0, 1, 2.0);
    CHECK(v2.lower_bound);
    CHECK(v2.value == doctest::Approx(std::sqrt(1.0 + 4 + 1 + 9 + 1 + 4)));
    CHECK_THROWS_AS(drift_variation(sol, 0.5, 0.5), DomainError);

    // monotone psi: telescoping
    for (std::size_t i = 0; i <= 8; ++i) sol.psi(i) = static_cast<double>(i * i);
    CHECK(drift_variation(sol, 0.25, 0.75).value == doctest::Approx(36 - 4));
}

TEST_CASE("skew fBM") {
    const auto w = noise(0.3, 1024, 5);
    const auto z = skew_fbm(0.0, 64, w);
    CHECK(z.path.x.values == w.values);
    const auto s = skew_fbm(1.0, 64, w);
    CHECK_FALSE(s.regime_warning);
    for (std::size_t i = 0; i < 1024; ++i) CHECK(s.path.psi(i + 1) >= s.path.psi(i));
    CHECK(skew_fbm(1.0, 64, noise(0.5, 64, 1)).regime_warning);
    CHECK(legall_skew(1.0) == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
    CHECK(legall_skew(1.0) == doctest::Approx(0.76159).epsilon(1e-5));
}

TEST_CASE("skew Brownian oracle") {
    auto eng = make_stream(3, 0);
    const double s = legall_skew(1.0);
    std::size_t pos = 0, n = 200000;
    double second = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = skew_bm_terminal(s, eng);
        pos += x > 0;
        second += x * x;
    }
    const double p = static_cast<double>(pos) / n;
    CHECK(std::abs(p - (1 + s) / 2) < 4 * std::sqrt(p * (1 - p) / n));
    CHECK(second / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("Le Gall limit for mollified Brownian drift (reduced ensemble)") {
    const fbm::TimeGrid tg(1.0, 4096);
    fbm::FbmSampler sampler(fbm::HurstParameter(0.5), tg);
    const std::size_t n = 3000;
    std::size_t pos = 0;
    for (std::size_t m = 0; m < n; ++m) pos += skew_fbm(1.0, 256, sampler.sample(1, 17, m)).path.x(4096) > 0;
    const double p = static_cast<double>(pos) / n;
    CHECK(std::abs(p - (1 + std::tanh(1.0)) / 2) < 0.02 + 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("measure drift residual") {
    const auto w = noise(0.3, 2048, 6);
    const mollify::SpatialGrid g(1, 6.0, 1536);
    const std::vector<double> ts{0.25, 0.5, 1.0};
    const double x0[] = {0.0};
    const auto zero = euler_solve(constant(0.0), w, x0);
    const auto L0 = localtime::local_time(zero.x, 2 * g.dx(), g, ts);
    CHECK(measure_drift_residual(zero, mollify::dirac({0.0}, 0.0), L0) == 0.0);

    // far atom: no local time, no drift
    const double far[] = {5.0};
    auto b = mollify::dirac({0.5});
    auto short_w = w;
    for (double& v : short_w.values) v *= 0.01;
    const auto sol = euler_solve(skew_drift(1.0, 64), short_w, far);
    const auto Lf = localtime::local_time(sol.x, 2 * g.dx(), g, ts);
    CHECK(measure_drift_residual(sol, b, Lf) < 1e-6);

    // joint refinement: sharper mollification, matched bandwidth (uniform variance R^2/3 = 1/n)
    fbm::FbmSampler sampler(fbm::HurstParameter(0.3), fbm::TimeGrid(1.0, 1 << 13));
    std::vector<double> med;
    for (std::size_t n : {4u, 16u, 64u}) {
        const double R = std::sqrt(3.0 / static_cast<double>(n));
        const mollify::SpatialGrid gg(1, 6.0, 2048);
        std::vector<double> res;
        for (std::size_t m = 0; m < 16; ++m) {
            const auto s = skew_fbm(1.0, n, sampler.sample(1, 8, m)).path;
            res.push_back(measure_drift_residual(s, mollify::dirac({0.0}), localtime::local_time(s.x, R, gg, ts)));
        }
        med.push_back(xlab::median(res));
    }
    CHECK(med[1] < med[0]);
    CHECK(med[2] < med[1]);
}

TEST_CASE("solution csv") {
    const auto w = noise(0.3, 4, 1);
    const double x0[] = {0.0};
    std::ostringstream os;
    write_csv(os, euler_solve(constant(1.0), w, x0));
    CHECK(os.str().find("t,x,w,psi\n") != std::string::npos);
}
