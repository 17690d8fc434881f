#include "rbn/fbm.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace rbn::fbm {

HurstParameter::HurstParameter(double h) : h_(h) {
    if (!(h > 0.0 && h < 1.0)) {
        std::ostringstream os;
        os << "Hurst parameter must lie in (0,1), got " << h;
        throw DomainError(os.str());
    }
}

TimeGrid::TimeGrid(double horizon_, std::size_t n_steps_) : horizon(horizon_), n_steps(n_steps_) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("TimeGrid: horizon must be positive");
    if (n_steps == 0) throw DomainError("TimeGrid: n_steps must be positive");
}

std::size_t TimeGrid::index_of(double time) const {
    const double pos = time / horizon * static_cast<double>(n_steps);
    const double r = std::round(pos);
    if (r < 0 || r > static_cast<double>(n_steps) || std::abs(pos - r) > 1e-9 * std::max(1.0, r)) {
        std::ostringstream os;
        os << "time " << time << " is not a point of the grid";
        throw DomainError(os.str());
    }
    return static_cast<std::size_t>(r);
}

std::vector<double> FbmPath::coordinate(std::size_t k) const {
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[i * dim + k];
    return out;
}

double FbmPath::sup_norm() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

FbmPath zero_path(const TimeGrid& grid, std::size_t dim, double h) {
    FbmPath p;
    p.grid = grid;
    p.dim = dim;
    p.h = h;
    p.values.assign(grid.size() * dim, 0.0);
    return p;
}

namespace {

using boost::math::quadrature::gauss;

constexpr double kInnerTol = 1e-13;

// Double-exponential rule: after the power substitutions below the integrands
// are bounded but may keep fractional-power behaviour at the ends, which this
// rule absorbs without subdivision.
template <class F>
double adaptive(F f, double a, double b, double tol = 1e-12) {
    thread_local boost::math::quadrature::tanh_sinh<double> rule;
    if (!(b > a)) return 0.0;
    double err = 0, l1 = 0;
    const double v = rule.integrate(f, a, b, tol, &err, &l1);
    if (!std::isfinite(v)) throw NumericalFailure("kernel quadrature produced a non-finite value");
    return v;
}

// int_0^b x^{-lp} phi(x) dx with the substitution x = v^{1/(1-lp)}.
template <class F>
double left_singular(F phi, double b, double lp, double tol) {
    const double p = 1.0 / (1.0 - lp);
    const double vmax = std::pow(b, 1.0 - lp);
    return p * adaptive([&](double v) { return phi(std::pow(v, p)); }, 0.0, vmax, tol);
}

// int_a^1 (1-x)^{rp} psi(x) dx with 1 - x = v^{1/(1+rp)}.
template <class F>
double right_singular(F psi, double a, double rp, double tol) {
    const double q = 1.0 / (1.0 + rp);
    const double vmax = std::pow(1.0 - a, 1.0 + rp);
    return q * adaptive([&](double v) { return psi(1.0 - std::pow(v, q)); }, 0.0, vmax, tol);
}

// k(x) = K_H(1,x)/C directly from the integral representation.
double shape_direct(double h, double x) {
    if (h == 0.5) return 1.0;
    if (h > 0.5) {
        // x^{1/2-H} int_x^1 (r-x)^{H-3/2} r^{H-1/2} dr, u = (r-x)^{H-1/2}
        const double g = h - 0.5;
        const double ig = 1.0 / g;
        const double umax = std::pow(1.0 - x, g);
        auto f = [&](double u) { return std::pow(x + std::pow(u, ig), g); };
        return std::pow(x, -g) * adaptive(f, 0.0, umax, kInnerTol) / g;
    }
    // x^{1/2-H}(1-x)^{H-1/2} + (1/2-H) x^{1/2-H} int_x^1 (r-x)^{H-1/2} r^{H-3/2} dr,
    // u = (r-x)^{H+1/2}; the integrand is concentrated on u <~ x^{H+1/2}.
    const double a = h + 0.5;
    const double ia = 1.0 / a;
    const double umax = std::pow(1.0 - x, a);
    auto f = [&](double u) { return std::pow(x + std::pow(u, ia), h - 1.5); };
    const double split = std::min(umax, std::pow(x, a));
    const double inner = (adaptive(f, 0.0, split, kInnerTol) + adaptive(f, split, umax, kInnerTol)) / a;
    return std::pow(x, 0.5 - h) * std::pow(1.0 - x, h - 0.5) + (0.5 - h) * std::pow(x, 0.5 - h) * inner;
}

// Limits of the smooth factor m(x) = k(x) x^{|H-1/2|} (1-x)^{1/2-H} at the ends.
double smooth_at_zero(double h) {
    if (h > 0.5) return 1.0 / (2.0 * h - 1.0);
    return (0.5 - h) * std::beta(h + 0.5, 1.0 - 2.0 * h);
}
double smooth_at_one(double h) { return h > 0.5 ? 1.0 / (h - 0.5) : 1.0; }

std::shared_ptr<const KernelShapeTable> shared_table(double h) {
    static std::mutex mu;
    static std::map<double, std::shared_ptr<const KernelShapeTable>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(h);
    if (it != cache.end()) return it->second;
    auto t = std::make_shared<const KernelShapeTable>(HurstParameter(h));
    cache.emplace(h, t);
    return t;
}

}  // namespace

double kernel_shape(HurstParameter h, double x) {
    if (!(x > 0.0 && x < 1.0)) throw DomainError("kernel_shape: x must lie in (0,1)");
    return shape_direct(h, x);
}

double kernel_constant(HurstParameter hp) {
    const double h = hp.value();
    if (h == 0.5) return 1.0;
    static std::mutex mu;
    static std::map<double, double> cache;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(h); it != cache.end()) return it->second;
    }
    const double lp = std::abs(h - 0.5);
    const double rp = h - 0.5;
    // int_0^1 k^2 split at 1/2, each half with its endpoint power removed.
    auto phi = [&](double x) {
        const double k = shape_direct(h, x);
        return k * k * std::pow(x, 2 * lp);
    };
    auto psi = [&](double x) {
        const double k = shape_direct(h, x);
        return k * k * std::pow(1.0 - x, -2 * rp);
    };
    const double m0 = smooth_at_zero(h), m1 = smooth_at_one(h);
    const double left = left_singular([&](double x) { return x < 1e-14 ? m0 * m0 : phi(x); }, 0.5, 2 * lp, 1e-11);
    const double right = right_singular([&](double x) { return x > 1 - 1e-14 ? m1 * m1 : psi(x); }, 0.5, 2 * rp, 1e-11);
    const double z = left + right;
    if (!(z > 0) || !std::isfinite(z)) throw NumericalFailure("kernel_constant: normalization integral failed");
    const double c = 1.0 / std::sqrt(z);
    std::lock_guard lock(mu);
    cache.emplace(h, c);
    return c;
}

double kernel_value(HurstParameter h, double t, double s) {
    if (!(s > 0.0) || !(s < t)) {
        std::ostringstream os;
        os << "kernel_value requires 0 < s < t, got s=" << s << " t=" << t;
        throw DomainError(os.str());
    }
    if (h.is_brownian()) return 1.0;
    return kernel_constant(h) * std::pow(t, h - 0.5) * shape_direct(h, s / t);
}

double fbm_covariance(HurstParameter hp, double s, double t) {
    if (s < 0 || t < 0) throw DomainError("fbm_covariance: negative time");
    const double h2 = 2.0 * hp.value();
    if (hp.is_brownian()) return std::min(s, t);
    return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
}

double conditional_variance(HurstParameter h, double u, double t) {
    if (!(u >= 0.0) || !(u <= t)) throw DomainError("conditional_variance requires 0 <= u <= t");
    if (u == t) return 0.0;
    if (h.is_brownian()) return t - u;
    if (u == 0.0) return std::pow(t, 2 * h);
    const double c = kernel_constant(h);
    return c * c * std::pow(t, 2 * h) * shared_table(h)->shape_squared_integral(u / t, 1.0);
}

// ---------------------------------------------------------------------------

KernelShapeTable::KernelShapeTable(HurstParameter h, std::size_t nodes)
    : h_(h), left_power_(std::abs(h - 0.5)), right_power_(h - 0.5) {
    if (nodes < 8) throw DomainError("KernelShapeTable: need at least 8 nodes");
    table_.resize(nodes);
    if (h.is_brownian()) {
        std::fill(table_.begin(), table_.end(), 1.0);
        return;
    }
    const double dth = std::numbers::pi / static_cast<double>(nodes);
    parallel_for(nodes, [&](std::size_t j) {
        const double th = (static_cast<double>(j) + 0.5) * dth;
        const double x = 0.5 * (1.0 - std::cos(th));
        table_[j] = shape_direct(h_, x) * std::pow(x, left_power_) * std::pow(1.0 - x, -right_power_);
    });
}

double KernelShapeTable::smooth_factor(double x) const {
    if (h_.is_brownian()) return 1.0;
    const std::size_t n = table_.size();
    const double th = std::acos(std::clamp(1.0 - 2.0 * x, -1.0, 1.0));
    const double pos = th / (std::numbers::pi / static_cast<double>(n)) - 0.5;
    auto j0 = static_cast<std::ptrdiff_t>(std::floor(pos)) - 1;
    j0 = std::clamp<std::ptrdiff_t>(j0, 0, static_cast<std::ptrdiff_t>(n) - 4);
    const double s = pos - static_cast<double>(j0);  // nodes at 0,1,2,3
    const double* y = table_.data() + j0;
    // four-point Lagrange
    const double l0 = -(s - 1) * (s - 2) * (s - 3) / 6.0;
    const double l1 = s * (s - 2) * (s - 3) / 2.0;
    const double l2 = -s * (s - 1) * (s - 3) / 2.0;
    const double l3 = s * (s - 1) * (s - 2) / 6.0;
    return l0 * y[0] + l1 * y[1] + l2 * y[2] + l3 * y[3];
}

double KernelShapeTable::shape(double x) const {
    if (h_.is_brownian()) return 1.0;
    return smooth_factor(x) * std::pow(x, -left_power_) * std::pow(1.0 - x, right_power_);
}

namespace {

template <int N, class F>
double fixed_gauss(F f, double a, double b) {
    return gauss<double, N>::integrate(f, a, b);
}

// int_a^b of g(x) x^{-lp} (1-x)^{rp} with m the smooth part, picking the
// endpoint substitution when a cell touches 0 or 1.
template <class M>
double singular_cell(M m, double a, double b, double lp, double rp, bool adaptive_rule) {
    auto full = [&](double x) { return m(x) * std::pow(x, -lp) * std::pow(1.0 - x, rp); };
    auto quad = [&](auto f, double lo, double hi) {
        return adaptive_rule ? adaptive(f, lo, hi, 1e-12) : fixed_gauss<10>(f, lo, hi);
    };
    if (a <= 0.0 && b >= 1.0) {
        return singular_cell(m, 0.0, 0.5, lp, rp, adaptive_rule) + singular_cell(m, 0.5, 1.0, lp, rp, adaptive_rule);
    }
    if (a <= 0.0) {
        const double p = 1.0 / (1.0 - lp);
        const double vmax = std::pow(b, 1.0 - lp);
        return p * quad([&](double v) {
                   const double x = std::pow(v, p);
                   return m(x) * std::pow(1.0 - x, rp);
               }, 0.0, vmax);
    }
    if (b >= 1.0) {
        const double q = 1.0 / (1.0 + rp);
        const double vmax = std::pow(1.0 - a, 1.0 + rp);
        return q * quad([&](double v) {
                   const double x = 1.0 - std::pow(v, q);
                   return m(x) * std::pow(x, -lp);
               }, 0.0, vmax);
    }
    const double w = b - a;
    if (adaptive_rule) return adaptive(full, a, b, 1e-12);
    if (a >= 3 * w && 1.0 - b >= 3 * w) return fixed_gauss<5>(full, a, b);
    return fixed_gauss<10>(full, a, b);
}

}  // namespace

double KernelShapeTable::cell_integral(double a, double b) const {
    if (!(a >= 0.0 && b <= 1.0 && a < b)) throw DomainError("cell_integral requires 0 <= a < b <= 1");
    if (h_.is_brownian()) return b - a;
    const bool wide = (b - a) > 1.0 / 16.0;
    return singular_cell([this](double x) { return smooth_factor(x); }, a, b, left_power_, right_power_, wide);
}

double KernelShapeTable::shape_squared_integral(double a, double b) const {
    if (!(a >= 0.0 && b <= 1.0 && a < b)) throw DomainError("shape_squared_integral requires 0 <= a < b <= 1");
    if (h_.is_brownian()) return b - a;
    auto m2 = [this](double x) {
        const double m = smooth_factor(x);
        return m * m;
    };
    // Split so that each piece sees at most one endpoint singularity.
    const double mid = std::clamp(0.5, a, b);
    double total = 0;
    if (a < mid) total += singular_cell(m2, a, mid, 2 * left_power_, 2 * right_power_, true);
    if (mid < b) total += singular_cell(m2, mid, b, 2 * left_power_, 2 * right_power_, true);
    return total;
}

// ---------------------------------------------------------------------------

VolterraKernelMatrix::VolterraKernelMatrix(HurstParameter h, const TimeGrid& grid) : h_(h), grid_(grid) {
    const std::size_t n = grid.n_steps;
    if (n > 16384) throw DomainError("VolterraKernelMatrix: more than 16384 steps is not supported (quadratic storage)");
    packed_.assign(n * (n + 1) / 2, 1.0);
    if (h.is_brownian()) return;
    const double c = kernel_constant(h);
    auto table = shared_table(h);
    parallel_for(n, [&](std::size_t r) {
        const std::size_t i = r + 1;
        const double scale = c * std::pow(grid_.t(i), h - 0.5) * static_cast<double>(i);
        const double inv = 1.0 / static_cast<double>(i);
        double* out = packed_.data() + offset(i);
        for (std::size_t j = 0; j < i; ++j) {
            const double a = static_cast<double>(j) * inv;
            const double b = j + 1 == i ? 1.0 : static_cast<double>(j + 1) * inv;
            out[j] = scale * table->cell_integral(a, b);
        }
    });
    for (double v : packed_)
        if (!(v > 0) || !std::isfinite(v)) throw NumericalFailure("VolterraKernelMatrix: non-positive or non-finite entry");
}

double VolterraKernelMatrix::lower_bound_constant() const {
    double c = std::numeric_limits<double>::infinity();
    const double h = h_.value();
    for (std::size_t i = 1; i <= grid_.n_steps; ++i) {
        const auto r = row(i);
        for (std::size_t j = 0; j < i; ++j) c = std::min(c, r[j] / std::pow(grid_.t(i) - grid_.t(j), h - 0.5));
    }
    return c;
}

}  // namespace rbn::fbm
