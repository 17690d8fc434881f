#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "rbn/fit.hpp"
#include "rbn/mollify.hpp"

using namespace rbn;
using namespace rbn::mollify;

namespace {

double gauss(double x, double t) { return std::exp(-x * x / (2 * t)) / std::sqrt(2 * std::numbers::pi * t); }

GridFunction from(const SpatialGrid& g, double (*f)(double)) {
    GridFunction out(g, 1);
    for (std::size_t i = 0; i < g.n_cells; ++i) out.at(i) = f(g.center(i));
    return out;
}

double l1_distance(const GridFunction& a, const GridFunction& b) {
    GridFunction d = a;
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.values[i];
    return lp_norm(d, 1.0);
}

}  // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(SpatialGrid(1, 1.0, 8), DomainError);
    CHECK_THROWS_AS(SpatialGrid(1, 0.0, 32), DomainError);
    const SpatialGrid g(2, 1.0, 16);
    CHECK(g.total() == 256);
    CHECK(g.dx() == doctest::Approx(0.125));
    CHECK(g.unflatten(17) == std::vector<std::size_t>{1, 1});
}

TEST_CASE("dirac mass smooths to the Gaussian density") {
    const SpatialGrid g(1, 3.0, 600);
    const auto f = heat_mollify(dirac({0.0}), 0.04, g);
    for (std::size_t i = 0; i < g.n_cells; i += 37) CHECK(f.at(i) == doctest::Approx(gauss(g.center(i), 0.04)).epsilon(1e-14));
    CHECK(grid_integral(f) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("constants are preserved away from the boundary") {
    const SpatialGrid g(1, 4.0, 400);
    GridFunction one(g, 1, 1.0);
    const double t = 0.05;
    const auto f = heat_mollify(GridDrift{one, INFINITY}, t, g);
    for (std::size_t i = 0; i < g.n_cells; ++i)
        if (std::abs(g.center(i)) < g.L - 6 * std::sqrt(t)) CHECK(f.at(i) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("resolution refusal names the needed grid") {
    const SpatialGrid g(1, 1.0, 32);
    try {
        heat_mollify(dirac({0.0}), 1e-4, g);
        FAIL("expected refusal");
    } catch (const RegimeRefusal& e) {
        CHECK(e.reason() == "grid_resolution");
        CHECK(std::string(e.what()).find("need at least") != std::string::npos);
    }
}

TEST_CASE("ball indicator: normalization and small-time convergence") {
    const SpatialGrid g(1, 1.0, 2000);
    const BallIndicator ball({0.0}, 0.1);
    const auto l = ball.on_grid(g);
    CHECK(grid_integral(l) == doctest::Approx(1.0).epsilon(0.02));
    const SpatialGrid g2(2, 1.0, 256);
    CHECK(grid_integral(BallIndicator({0.1, -0.2}, 0.3).on_grid(g2)) == doctest::Approx(1.0).epsilon(0.02));
    CHECK(BallIndicator({0.0}, 0.5).normalization() == doctest::Approx(1.0));

    double prev = 1e300;
    for (double t : {1e-2, 1e-3, 1e-4, 1e-5}) {
        const double d = l1_distance(heat_mollify(l, t), l);
        CHECK(d < prev);
        prev = d;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("mass conservation, semigroup and gradient bound") {
    const SpatialGrid g(1, 6.0, 1200);
    auto bump = from(g, [](double x) { return std::abs(x) < 1 ? 1.0 - std::abs(x) : 0.0; });
    const double m0 = grid_integral(bump);
    const auto p1 = heat_mollify(bump, 0.1);
    CHECK(grid_integral(p1) == doctest::Approx(m0).epsilon(0.01));
    const auto p12 = heat_mollify(heat_mollify(bump, 0.05), 0.05);
    CHECK(l1_distance(p12, p1) <= 0.01 * lp_norm(p1, 1.0));

    auto step = from(g, [](double x) { return x > 0 ? 1.0 : -1.0; });
    for (double t : {0.01, 0.1}) {
        const auto s = heat_mollify(step, t);
        double grad = 0;
        for (std::size_t i = 0; i + 1 < g.n_cells; ++i) grad = std::max(grad, std::abs(s.at(i + 1) - s.at(i)) / g.dx());
        // |d/dx P_t f| <= sqrt(2/(pi t)) ||f||_inf
        CHECK(grad <= 1.01 * std::sqrt(2 / (std::numbers::pi * t)));
    }
}

TEST_CASE("multi-dimensional mollification is separable") {
    const SpatialGrid g(2, 2.0, 128);
    MeasureDrift m;
    m.d = 2;
    m.atoms.push_back(Atom{{0.0, 0.0}, {1.0}});
    const double t = 0.02;
    const auto a = heat_mollify(m, t, g);
    // atom evaluated analytically; density path via convolution of a narrow bump
    auto d = BallIndicator({0.0, 0.0}, 0.05).on_grid(g);
    const auto b = heat_mollify(d, t);
    CHECK(grid_integral(a) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(grid_integral(b) == doctest::Approx(grid_integral(d)).epsilon(0.01));
    CHECK(l1_distance(a, b) < 0.05);
}

TEST_CASE("point evaluation") {
    const SpatialGrid g(1, 2.0, 128);
    auto f = from(g, [](double x) { return x * x; });
    const DriftSpec spec = GridDrift{f, INFINITY};
    const double x0 = g.center(40);
    CHECK(heat_evaluate(spec, 0.0, std::vector<double>{x0})[0] == doctest::Approx(x0 * x0));
    CHECK(heat_evaluate(spec, 1e-14, std::vector<double>{x0})[0] == doctest::Approx(x0 * x0));
    const auto grid = heat_mollify(spec, 0.01, g);
    CHECK(heat_evaluate(spec, 0.01, std::vector<double>{x0})[0] == doctest::Approx(grid.at(40)).epsilon(2e-3));

    CallableDrift c{1, 1, [](std::span<const double> x, std::span<double> out) { out[0] = x[0] * x[0]; }, INFINITY, "x^2"};
    CHECK(heat_evaluate(c, 0.3, std::vector<double>{0.7})[0] == doctest::Approx(0.49 + 0.3).epsilon(1e-12));
    CallableDrift quartic{1, 1, [](std::span<const double> x, std::span<double> out) { out[0] = std::pow(x[0], 4); },
                          INFINITY, "x^4"};
    CHECK(heat_evaluate(quartic, 1.0, std::vector<double>{0.0})[0] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(heat_evaluate(dirac({0.0}, 2.0), 0.5, std::vector<double>{0.3})[0] == doctest::Approx(2 * gauss(0.3, 0.5)));
}

TEST_CASE("interpolation") {
    const SpatialGrid g(2, 1.0, 16);
    GridFunction f(g, 1);
    for (std::size_t cell = 0; cell < g.total(); ++cell) {
        const auto idx = g.unflatten(cell);
        f.at(cell) = 2 * g.center(idx[0]) - g.center(idx[1]);
    }
    double v = 0;
    interpolate(f, std::vector<double>{0.13, -0.41}, std::span<double>(&v, 1));
    CHECK(v == doctest::Approx(2 * 0.13 + 0.41));
    std::size_t outside = 0;
    interpolate(f, std::vector<double>{1.5, 0.0}, std::span<double>(&v, 1), &outside);
    CHECK(v == 0.0);
    CHECK(outside == 1);
}

TEST_CASE("empirical besov norm") {
    const SpatialGrid g(1, 6.0, 2400);
    const auto ts = log_spaced(1e-3, 1.0, 12);
    const BesovIndex idx{-0.6, 2.0};
    const auto one = empirical_besov_norm(dirac({0.0}), idx, ts, g);
    const auto two = empirical_besov_norm(dirac({0.0}, 2.0), idx, ts, g);
    CHECK(std::isfinite(one.value));
    CHECK(one.value > 0);
    CHECK(two.value == doctest::Approx(2 * one.value).epsilon(1e-14));
    GridFunction zero(g, 1);
    CHECK(empirical_besov_norm(GridDrift{zero, 1.0}, idx, ts, g).value == 0.0);

    // triangle inequality and domination
    auto a = from(g, [](double x) { return std::abs(x) < 0.5 ? 1.0 : 0.0; });
    auto b = from(g, [](double x) { return std::abs(x - 0.3) < 0.2 ? 2.0 : 0.0; });
    GridFunction s = a;
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] += b.values[i];
    const BesovIndex i1{-0.5, 1.0};
    const double na = empirical_besov_norm(GridDrift{a, 1.0}, i1, ts, g).value;
    const double nb = empirical_besov_norm(GridDrift{b, 1.0}, i1, ts, g).value;
    const double ns = empirical_besov_norm(GridDrift{s, 1.0}, i1, ts, g).value;
    CHECK(ns <= na + nb + 1e-12);
    CHECK(ns >= na);

    CHECK_THROWS_AS(empirical_besov_norm(dirac({0.0}), BesovIndex{0.1, 1.0}, ts, g), DomainError);
    CHECK_THROWS_AS(empirical_besov_norm(dirac({0.0}), idx, log_spaced(0.1, 1.0, 12), g), DomainError);
}

TEST_CASE("delta approximation rate in one dimension") {
    std::vector<double> rs, errs;
    for (int k = 1; k <= 6; ++k) {
        rs.push_back(std::ldexp(1.0, -k));
        errs.push_back(delta_approx_error(rs.back(), 0.5, 1));
    }
    int inversions = 0;
    for (std::size_t i = 1; i < errs.size(); ++i) inversions += errs[i] > errs[i - 1];
    CHECK(inversions <= 1);
    const auto fit = xlab::fit_scaling_exponent(rs, errs);
    CHECK(fit.slope == doctest::Approx(0.5).epsilon(0.2));
    CHECK(std::isfinite(delta_approx_error(1.0, 0.5, 1)));
}

TEST_CASE("mollified sequences") {
    const SpatialGrid g(1, 4.0, 800);
    const std::vector<std::size_t> ns{1, 4, 25, 100};
    const auto seq = mollified_sequence(dirac({0.0}), ns, g);
    CHECK(grid_integral(seq[2]) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(seq[2].at(400) == doctest::Approx(gauss(g.center(400), 0.04)));

    auto f = from(g, [](double x) { return std::abs(x) < 0.5 ? std::sin(20 * x) : 0.0; });
    const double n1 = lp_norm(f, 1.0);
    for (const auto& p : mollified_sequence(GridDrift{f, 1.0}, ns, g)) CHECK(lp_norm(p, 1.0) <= n1 * (1 + 1e-12));
    GridFunction zero(g, 1);
    for (const auto& p : mollified_sequence(GridDrift{zero, 1.0}, ns, g)) CHECK(lp_norm(p, INFINITY) == 0.0);
    CHECK_THROWS_AS(mollified_sequence(dirac({0.0}), std::vector<std::size_t>{0}, g), DomainError);
}

TEST_CASE("grid function csv round trip") {
    const SpatialGrid g(2, 1.5, 16);
    GridFunction f(g, 2);
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = std::sin(0.37 * i);
    std::stringstream ss;
    write_csv(ss, f);
    const auto h = read_csv(ss);
    CHECK(h.grid == g);
    CHECK(h.values == f.values);
}
