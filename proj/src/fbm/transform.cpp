#include "rbn/fbm.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace rbn::fbm {

FbmPath volterra_forward(const FbmPath& b, HurstParameter target, const VolterraKernelMatrix* kernel) {
    if (b.h != 0.5) throw DomainError("volterra_forward: input must be a Brownian path (h = 1/2)");
    if (b.values.size() != b.grid.size() * b.dim) throw DomainError("volterra_forward: malformed path");
    if (target.is_brownian()) return b;
    std::optional<VolterraKernelMatrix> own;
    if (kernel == nullptr) {
        own.emplace(target, b.grid);
        kernel = &*own;
    } else if (!(kernel->grid() == b.grid) || kernel->hurst().value() != target.value()) {
        throw DomainError("volterra_forward: kernel matrix grid or Hurst index does not match the path");
    }
    const std::size_t n = b.grid.n_steps;
    const std::size_t d = b.dim;
    FbmPath out = zero_path(b.grid, d, target.value());
    out.seed = b.seed;
    std::vector<double> db(n);
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = 0; j < n; ++j) db[j] = b(j + 1, k) - b(j, k);
        for (std::size_t i = 1; i <= n; ++i) {
            const auto r = kernel->row(i);
            double s = 0;
            for (std::size_t j = 0; j < i; ++j) s += r[j] * db[j];
            out(i, k) = s;
        }
    }
    return out;
}

std::vector<double> weighted_increment_operator(std::span<const double> f, const TimeGrid& grid, double a) {
    if (f.size() != grid.size()) throw DomainError("weighted_increment_operator: length mismatch");
    if (!(a > -1.0)) throw DomainError("weighted_increment_operator: exponent must exceed -1");
    // int_0^t s^a df(s) for piecewise-linear f; equals t^a f(t) - a int s^{a-1} f.
    const double dt = grid.dt();
    std::vector<double> out(f.size(), 0.0);
    double acc = 0, prev = 0;
    for (std::size_t j = 0; j + 1 < f.size(); ++j) {
        const double next = std::pow(grid.t(j + 1), a + 1);
        acc += (next - prev) / ((a + 1) * dt) * (f[j + 1] - f[j]);
        prev = next;
        out[j + 1] = acc;
    }
    return out;
}

std::vector<double> fractional_integral(std::span<const double> f, const TimeGrid& grid, double a) {
    if (f.size() != grid.size()) throw DomainError("fractional_integral: length mismatch");
    if (!(a > -1.0)) throw DomainError("fractional_integral: order must exceed -1");
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    // I^a f(t_i) = I^{a+1} f'(t_i); the bracket depends only on i - j.
    std::vector<double> w(n + 1, 0.0);
    const double norm = std::pow(dt, a + 1) / std::tgamma(a + 2);
    for (std::size_t m = 1; m <= n; ++m)
        w[m] = norm * (std::pow(static_cast<double>(m), a + 1) - std::pow(static_cast<double>(m - 1), a + 1));
    std::vector<double> slope(n);
    for (std::size_t j = 0; j < n; ++j) slope[j] = (f[j + 1] - f[j]) / dt;
    std::vector<double> out(n + 1, 0.0);
    parallel_for(n, [&](std::size_t r) {
        const std::size_t i = r + 1;
        double s = 0;
        for (std::size_t j = 0; j < i; ++j) s += slope[j] * w[i - j];
        out[i] = s;
    });
    return out;
}

namespace {

// Constant of the kernel that the operator chain inverts exactly.
double chain_constant(double h) { return h > 0.5 ? 1.0 / std::tgamma(h - 0.5) : 1.0 / std::tgamma(h + 0.5); }

}  // namespace

InverseTransformResult inverse_transform(const FbmPath& w, const InversePrecision& precision,
                                         const VolterraKernelMatrix* kernel) {
    if (precision.refine == 0) throw DomainError("inverse_transform: refine factor must be positive");
    if (w.values.size() != w.grid.size() * w.dim) throw DomainError("inverse_transform: malformed path");
    const HurstParameter h(w.h);
    InverseTransformResult res;
    res.path_sup_norm = w.sup_norm();
    if (h.is_brownian()) {
        res.brownian = w;
        return res;
    }
    const std::size_t n = w.grid.n_steps;
    const std::size_t r = precision.refine;
    const TimeGrid fine(w.grid.horizon, n * r);
    const double a = 0.5 - h.value();
    const double scale = chain_constant(h.value()) / kernel_constant(h);

    FbmPath b = zero_path(w.grid, w.dim, 0.5);
    b.seed = w.seed;
    std::vector<double> f(fine.size());
    for (std::size_t k = 0; k < w.dim; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            const double x0 = w(i, k), x1 = w(i + 1, k);
            for (std::size_t q = 0; q < r; ++q)
                f[i * r + q] = x0 + (x1 - x0) * static_cast<double>(q) / static_cast<double>(r);
        }
        f[n * r] = w(n, k);
        auto g = weighted_increment_operator(f, fine, a);
        g = fractional_integral(g, fine, a);
        g = weighted_increment_operator(g, fine, -a);
        for (std::size_t i = 0; i <= n; ++i) {
            const double v = scale * g[i * r];
            if (!std::isfinite(v))
                throw NumericalFailure("inverse_transform: non-finite value near t = " + std::to_string(w.grid.t(i)));
            b(i, k) = v;
        }
    }
    const FbmPath back = volterra_forward(b, h, kernel);
    double err = 0;
    for (std::size_t i = 0; i < back.values.size(); ++i) err = std::max(err, std::abs(back.values[i] - w.values[i]));
    res.roundtrip_sup_error = err;
    res.brownian = std::move(b);
    return res;
}

namespace {

std::vector<double> lag_scales(std::span<const std::size_t> lags, const TimeGrid& grid) {
    if (lags.size() < 4) throw DomainError("holder_exponent_estimate: need at least 4 lags");
    std::vector<double> out;
    for (std::size_t l : lags) {
        if (l == 0 || l > grid.n_steps) throw DomainError("holder_exponent_estimate: lag outside the grid");
        out.push_back(static_cast<double>(l) * grid.dt());
    }
    return out;
}

}  // namespace

xlab::ExponentFit holder_exponent_estimate(std::span<const FbmPath> paths, std::span<const std::size_t> lags) {
    if (paths.empty()) throw DomainError("holder_exponent_estimate: no paths");
    const TimeGrid& grid = paths.front().grid;
    const auto scales = lag_scales(lags, grid);
    std::vector<double> stats;
    for (std::size_t l : lags) {
        std::vector<double> inc;
        for (const auto& p : paths) {
            if (!(p.grid == grid)) throw DomainError("holder_exponent_estimate: paths on different grids");
            for (std::size_t k = 0; k < p.dim; ++k)
                for (std::size_t i = 0; i + l <= grid.n_steps; ++i) inc.push_back(std::abs(p(i + l, k) - p(i, k)));
        }
        const double m = xlab::median(std::move(inc));
        if (!(m > 0)) throw DomainError("holder_exponent_estimate: degenerate (constant) path");
        stats.push_back(m);
    }
    return xlab::fit_scaling_exponent(scales, stats);
}

xlab::ExponentFit holder_exponent_estimate(const FbmPath& path, std::span<const std::size_t> lags) {
    return holder_exponent_estimate(std::span<const FbmPath>(&path, 1), lags);
}

}  // namespace rbn::fbm
