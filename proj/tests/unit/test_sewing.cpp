#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "rbn/sewing.hpp"

using namespace rbn;
using namespace rbn::sewing;

namespace {

double gauss(double x, double v) { return std::exp(-x * x / (2 * v)) / std::sqrt(2 * std::numbers::pi * v); }

mollify::CallableDrift callable(double (*f)(double)) {
    mollify::CallableDrift d;
    d.f = [f](std::span<const double> x, std::span<double> out) { out[0] = f(x[0]); };
    return d;
}

std::vector<double> brownian_increments(std::size_t n, double dt, std::uint64_t seed, std::uint64_t idx) {
    auto eng = make_stream(seed, idx);
    NormalSource normal(eng);
    std::vector<double> db(n);
    for (double& v : db) v = normal() * std::sqrt(dt);
    return db;
}

}  // namespace

TEST_CASE("conditional germ mean: degenerate and trivial cases") {
    const fbm::TimeGrid g(1.0, 64);
    const fbm::VolterraKernelMatrix K(fbm::HurstParameter(0.3), g);
    const auto db = brownian_increments(64, g.dt(), 1, 0);
    const auto c = callable([](double) { return 2.5; });
    CHECK(conditional_germ_mean(c, K, db, 0, 10, 40)[0] == doctest::Approx(2.5).epsilon(1e-13));
    const auto sq = callable([](double x) { return x * x; });
    // u = t: no smoothing, f at the conditional mean W_t - E^s W_t
    const double m = conditional_mean(K, db, 40, 40) - conditional_mean(K, db, 10, 40);
    CHECK(conditional_germ_mean(sq, K, db, 10, 40, 40)[0] == doctest::Approx(m * m).epsilon(1e-13));
    // x^2 is smoothed exactly: mean^2 + variance
    const double m2 = conditional_mean(K, db, 20, 40) - conditional_mean(K, db, 10, 40);
    const double v = fbm::conditional_variance(fbm::HurstParameter(0.3), g.t(20), g.t(40));
    CHECK(conditional_germ_mean(sq, K, db, 10, 20, 40)[0] == doctest::Approx(m2 * m2 + v).epsilon(1e-12));
    CHECK_THROWS_AS(conditional_germ_mean(c, K, db, 20, 10, 40), DomainError);
}

TEST_CASE("conditional germ mean matches Gaussian convolution at h = 1/2") {
    const fbm::TimeGrid g(1.0, 128);
    const fbm::VolterraKernelMatrix K(fbm::HurstParameter(0.5), g);
    const auto db = brownian_increments(128, g.dt(), 2, 0);
    const mollify::SpatialGrid sg(1, 3.0, 1200);
    mollify::GridFunction f(sg, 1);
    for (std::size_t i = 0; i < sg.n_cells; ++i) f.at(i) = gauss(sg.center(i), 0.1);
    const mollify::DriftSpec spec = mollify::GridDrift{f, 1.0};
    double wu = 0;
    for (std::size_t j = 0; j < 64; ++j) wu += db[j];
    for (std::size_t t : {80u, 128u}) {
        const double got = conditional_germ_mean(spec, K, db, 0, 64, t)[0];
        CHECK(got == doctest::Approx(gauss(wu, 0.1 + g.t(t) - g.t(64))).epsilon(2e-4));
    }
    // no smoothing left: cell value, within dx times the slope bound
    CHECK(std::abs(conditional_germ_mean(spec, K, db, 0, 64, 64)[0] - gauss(wu, 0.1)) < sg.dx());
}

TEST_CASE("conditional germ mean is linear and positive") {
    const fbm::TimeGrid g(1.0, 64);
    const fbm::VolterraKernelMatrix K(fbm::HurstParameter(0.7), g);
    const auto db = brownian_increments(64, g.dt(), 3, 0);
    const auto f1 = callable([](double x) { return std::exp(-x * x); });
    const auto f2 = callable([](double x) { return 1 / (1 + x * x); });
    const auto sum = callable([](double x) { return 2 * std::exp(-x * x) + 3 / (1 + x * x); });
    for (std::size_t u : {0u, 7u, 31u}) {
        const double a = conditional_germ_mean(f1, K, db, 0, u, 50)[0], b = conditional_germ_mean(f2, K, db, 0, u, 50)[0];
        CHECK(a > 0);
        CHECK(b > 0);
        CHECK(conditional_germ_mean(sum, K, db, 0, u, 50)[0] == doctest::Approx(2 * a + 3 * b).epsilon(1e-13));
    }
}

TEST_CASE("conditional variance lower bound") {
    for (double h : {0.25, 0.75}) {
        double c = INFINITY;
        for (const double lag : mollify::log_spaced(1e-4, 0.5, 100))
            for (double t : {0.5, 1.0})
                c = std::min(c, fbm::conditional_variance(fbm::HurstParameter(h), t - lag, t) / std::pow(lag, 2 * h));
        CHECK(c > 0.1);
    }
}

TEST_CASE("dyadic sums of additive germs") {
    const Germ additive = [](double s, double t) { return 3 * (t - s); };
    for (int k : {0, 3, 9}) CHECK(dyadic_sewing_sum(additive, 0.25, 1.0, k).value == doctest::Approx(2.25).epsilon(1e-14));
    const auto tr = dyadic_trace(additive, 0, 1, 5);
    for (const auto& d : tr) CHECK(std::abs(d.defect) < 1e-14);
    const Germ bad = [](double s, double) -> double {
        if (s > 0.5) throw DomainError("boom");
        return 0;
    };
    CHECK_THROWS_AS(dyadic_sewing_sum(bad, 0, 1, 2), NumericalFailure);
}

TEST_CASE("dyadic engine: constants, defect identity and agreement with the generic germ") {
    const fbm::TimeGrid g(1.0, 256);
    const DyadicGermEngine flat(fbm::HurstParameter(0.3), g, 6, [](double, double) { return 1.5; });
    const auto db = brownian_increments(256, g.dt(), 4, 0);
    for (const auto& d : flat.trace(db)) CHECK(d.value == doctest::Approx(1.5).epsilon(1e-13));

    const DyadicGermEngine eng(fbm::HurstParameter(0.3), g, 6, gaussian_bump_flow(0.01));
    const auto tr = eng.trace(db);
    for (std::size_t k = 0; k + 1 < tr.size(); ++k)
        CHECK(tr[k].defect == doctest::Approx(tr[k].value - tr[k + 1].value).epsilon(1e-12).scale(1e-12));
    const auto generic = dyadic_trace(eng.germ(db), 0, 1, 6);
    for (std::size_t k = 0; k < tr.size(); ++k) CHECK(generic[k].value == doctest::Approx(tr[k].value).epsilon(1e-11));
    CHECK(std::abs(tr[6].value - tr[0].value) > 0);
}

TEST_CASE("fine dyadic sums approach the path integral") {
    const fbm::TimeGrid g(1.0, 512);
    const DyadicGermEngine eng(fbm::HurstParameter(0.3), g, 9, gaussian_bump_flow(0.01));
    const auto bm = fbm::FbmSampler(fbm::HurstParameter(0.5), g).sample(1, 5, 0);
    std::vector<double> db(512);
    for (std::size_t i = 0; i < 512; ++i) db[i] = bm(i + 1) - bm(i);
    const auto w = fbm::volterra_forward(bm, fbm::HurstParameter(0.3), &eng.kernel());
    double direct = 0;
    for (std::size_t i = 0; i < 512; ++i) direct += 0.5 * (gauss(w(i), 0.01) + gauss(w(i + 1), 0.01)) * g.dt();
    const auto tr = eng.trace(db);
    CHECK(std::abs(tr[9].value - direct) < 0.1 * std::abs(tr[0].value - direct) + 1e-3);
}

TEST_CASE("dyadic defects decay geometrically on the median") {
    const fbm::TimeGrid g(1.0, 1024);
    const int K = 8;
    const DyadicGermEngine eng(fbm::HurstParameter(0.3), g, K, gaussian_bump_flow(0.01));
    const std::size_t paths = 24;
    Array2 d(K, paths);
    for (std::size_t m = 0; m < paths; ++m) {
        const auto tr = eng.trace(brownian_increments(1024, g.dt(), 6, m));
        for (int k = 0; k < K; ++k) d(k, m) = std::abs(tr[k + 1].value - tr[k].value);
    }
    std::vector<double> med;
    for (int k = 0; k < K; ++k) {
        const auto row = d.row(k);
        med.push_back(xlab::median(std::vector<double>(row.begin(), row.end())));
    }
    for (int k = 2; k + 1 < K; ++k) CHECK(med[k + 1] < med[k]);
}

TEST_CASE("moment scaling") {
    MomentScalingConfig cfg;
    cfg.h = 0.3;
    cfg.n_paths = 200;
    cfg.n_steps = 1024;
    cfg.horizons = {0.25, 0.5, 1.0, 2.0};
    const auto one = integral_moment_scaling([](double) { return 1.0; }, cfg);
    CHECK(one.fit.slope == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(predicted_moment_exponent(0.3, cfg.condition) == doctest::Approx(0.7));
    CHECK(predicted_moment_exponent(0.45, cfg.condition) == doctest::Approx(0.55));
    cfg.condition.alpha = -2.0;
    CHECK_THROWS_AS(integral_moment_scaling([](double) { return 1.0; }, cfg), RegimeRefusal);
    cfg.condition = SewingCondition{-1.0, 1.0, 1};  // alpha - d/q = -2 > -1/0.3
    CHECK_NOTHROW(check_sewing_condition(0.3, cfg.condition));
    CHECK_THROWS_AS(check_sewing_condition(0.6, cfg.condition), RegimeRefusal);
}

TEST_CASE("young integrals") {
    const std::size_t n = 1024;
    std::vector<double> x(n + 1), one(n + 1, 1.0), y(n + 1), s(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        x[i] = std::sin(3 * t);
        y[i] = std::cos(t);
        s[i] = t * t;
    }
    auto r = young_integral(one, x, 1, 1);
    CHECK(r.values[n] == doctest::Approx(x[n] - x[0]).epsilon(1e-13));
    CHECK(r.refinement_error < 1e-13);
    r = young_integral(x, x, 1, 1);
    CHECK(std::abs(r.values[n] - 0.5 * (x[n] * x[n] - x[0] * x[0])) <= 2 * r.refinement_error);
    // bilinear and additive
    std::vector<double> comb(n + 1);
    for (std::size_t i = 0; i <= n; ++i) comb[i] = 2 * y[i] - s[i];
    const auto a = young_integral(y, x, 1, 1).values, b = young_integral(s, x, 1, 1).values,
               c = young_integral(comb, x, 1, 1).values;
    CHECK(c[n] == doctest::Approx(2 * a[n] - b[n]).epsilon(1e-12));
    const std::span<const double> yl(y.data(), n / 2 + 1), xl(x.data(), n / 2 + 1), yr(y.data() + n / 2, n / 2 + 1),
        xr(x.data() + n / 2, n / 2 + 1);
    CHECK(young_integral(yl, xl, 1, 1).values.back() + young_integral(yr, xr, 1, 1).values.back() ==
          doctest::Approx(a[n]).epsilon(1e-13));
    CHECK_THROWS_AS(young_integral(y, x, 2, 2), RegimeRefusal);
}

TEST_CASE("young ODE keeps the zero solution") {
    const std::vector<double> etas{1e-3, 1e-6};
    const auto demo = young_uniqueness_demo(0.3, 1 << 12, 3, etas);
    CHECK(demo.sup_zero == 0.0);
    CHECK(demo.sup_perturbed[0] / etas[0] == doctest::Approx(demo.sup_perturbed[1] / etas[1]).epsilon(1e-9));
}

TEST_CASE("trace csv") {
    const Germ additive = [](double s, double t) { return t - s; };
    std::ostringstream os;
    write_csv(os, dyadic_trace(additive, 0, 1, 2));
    CHECK(os.str().find("k,value,defect\n0,1,0\n") != std::string::npos);
}
