#include "rbn/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace rbn::xlab {

namespace {

struct Ols {
    double slope, intercept, r2, se_slope;
};

Ols ols(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0) throw DomainError("fit_scaling_exponent: scales must not all coincide");
    Ols r{};
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - r.intercept - r.slope * x[i];
        sse += e * e;
    }
    r.r2 = syy > 0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
    r.se_slope = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
    return r;
}

std::vector<double> logs_checked(std::span<const double> v, const char* what) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0) || !std::isfinite(v[i]))
            throw DomainError(std::string("fit_scaling_exponent: nonpositive ") + what);
        out[i] = std::log(v[i]);
    }
    return out;
}

}  // namespace

ExponentFit fit_scaling_exponent(std::span<const double> scales, std::span<const double> stats) {
    if (scales.size() != stats.size()) throw DomainError("fit_scaling_exponent: size mismatch");
    if (scales.size() < 4) throw DomainError("fit_scaling_exponent: need at least 4 points");
    const auto lx = logs_checked(scales, "scale");
    const auto ly = logs_checked(stats, "statistic");
    const Ols r = ols(lx, ly);
    ExponentFit fit;
    fit.slope = r.slope;
    fit.intercept = r.intercept;
    fit.r_squared = r.r2;
    fit.n_points = scales.size();
    const boost::math::students_t dist(static_cast<double>(scales.size() - 2));
    fit.ols_ci_half_width = boost::math::quantile(dist, 0.975) * r.se_slope;
    fit.ci_half_width = fit.ols_ci_half_width;
    return fit;
}

ExponentFit fit_scaling_exponent(std::span<const double> scales, const Array2& samples,
                                 const EnsembleStatistic& stat, std::size_t resamples,
                                 std::uint64_t seed) {
    if (samples.rows != scales.size()) throw DomainError("fit_scaling_exponent: one row per scale");
    if (samples.cols == 0) throw DomainError("fit_scaling_exponent: empty ensemble");
    std::vector<double> stats(scales.size());
    for (std::size_t k = 0; k < scales.size(); ++k) stats[k] = stat(samples.row(k));
    ExponentFit fit = fit_scaling_exponent(scales, stats);
    if (resamples == 0) return fit;

    Engine eng = make_stream(seed, 0xb007);
    std::vector<double> slopes;
    slopes.reserve(resamples);
    std::vector<std::size_t> pick(samples.cols);
    std::vector<double> column(samples.cols);
    const auto lx = logs_checked(scales, "scale");
    std::vector<double> ly(scales.size());
    for (std::size_t b = 0; b < resamples; ++b) {
        for (auto& p : pick) p = static_cast<std::size_t>(uniform_open(eng) * samples.cols);
        bool ok = true;
        for (std::size_t k = 0; k < scales.size() && ok; ++k) {
            for (std::size_t m = 0; m < pick.size(); ++m) column[m] = samples(k, pick[m]);
            const double s = stat(column);
            ok = s > 0 && std::isfinite(s);
            ly[k] = ok ? std::log(s) : 0.0;
        }
        if (ok) slopes.push_back(ols(lx, ly).slope);
    }
    if (slopes.size() >= 10) {
        fit.ci_half_width = 0.5 * (quantile(slopes, 0.975) - quantile(slopes, 0.025));
        fit.bootstrap = true;
    }
    return fit;
}

bool within_gate(const ExponentFit& fit, double prediction, double tolerance) {
    return std::abs(fit.slope - prediction) <= std::max(fit.ci_half_width, tolerance);
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw DomainError("quantile of empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double trimmed_mean(std::vector<double> v, double trim) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto cut = static_cast<std::size_t>(std::floor(trim * static_cast<double>(v.size())));
    if (2 * cut >= v.size()) return median(std::move(v));
    return std::accumulate(v.begin() + cut, v.end() - cut, 0.0) /
           static_cast<double>(v.size() - 2 * cut);
}

double power_mean(std::span<const double> v, double m) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += std::pow(std::abs(x), m);
    return std::pow(s / static_cast<double>(v.size()), 1.0 / m);
}

std::string to_json(const ExponentFit& fit) {
    std::ostringstream os;
    os.precision(10);
    os << "{\"slope\": " << fit.slope << ", \"intercept\": " << fit.intercept
       << ", \"r_squared\": " << fit.r_squared << ", \"ci_half_width\": " << fit.ci_half_width
       << ", \"ols_ci_half_width\": " << fit.ols_ci_half_width << ", \"n_points\": " << fit.n_points
       << ", \"bootstrap\": " << (fit.bootstrap ? "true" : "false") << "}";
    return os.str();
}

}  // namespace rbn::xlab
