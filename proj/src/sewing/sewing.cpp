#include "rbn/sewing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace rbn::sewing {

HeatFlow heat_flow(const mollify::DriftSpec& f) {
    if (mollify::dimension(f) != 1 || mollify::components(f) != 1)
        throw DomainError("heat_flow: scalar functions on R only");
    return [f](double v, double x) {
        const double pt[] = {x};
        return mollify::heat_evaluate(f, v < kVarianceFloor ? 0.0 : v, pt)[0];
    };
}

HeatFlow gaussian_bump_flow(double c, double weight) {
    if (!(c > 0)) throw DomainError("gaussian_bump_flow: variance must be positive");
    return [c, weight](double v, double x) {
        const double s = c + std::max(v, 0.0);
        return weight * std::exp(-x * x / (2 * s)) / std::sqrt(2 * std::numbers::pi * s);
    };
}

double conditional_mean(const fbm::VolterraKernelMatrix& K, std::span<const double> dB, std::size_t u, std::size_t r) {
    if (u > r) throw DomainError("conditional_mean: need u <= r");
    if (r > K.grid().n_steps || dB.size() != K.grid().n_steps) throw DomainError("conditional_mean: index out of range");
    const auto row = K.row(r);
    double acc = 0;
    for (std::size_t j = 0; j < u; ++j) acc += row[j] * dB[j];
    return acc;
}

std::vector<double> conditional_germ_mean(const mollify::DriftSpec& f, const fbm::VolterraKernelMatrix& K,
                                          std::span<const double> dB, std::size_t s, std::size_t u, std::size_t t) {
    if (!(s <= u && u <= t)) throw DomainError("conditional_germ_mean: need s <= u <= t");
    if (mollify::dimension(f) != 1) throw DomainError("conditional_germ_mean: d = 1 only");
    const auto& g = K.grid();
    const double m = conditional_mean(K, dB, u, t) - conditional_mean(K, dB, s, t);
    double v = fbm::conditional_variance(K.hurst(), g.t(u), g.t(t));
    if (v < kVarianceFloor) v = 0.0;
    const double pt[] = {m};
    return mollify::heat_evaluate(f, v, pt);
}

DyadicSum dyadic_sewing_sum(const Germ& germ, double s, double t, int k) {
    if (!(s < t)) throw DomainError("dyadic_sewing_sum: need s < t");
    if (k < 0 || k > 14) throw DomainError("dyadic_sewing_sum: level must lie in [0, 14]");
    const std::size_t n = std::size_t{1} << k;
    DyadicSum out{k, s, t, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double a = s + (t - s) * static_cast<double>(i) / n, b = s + (t - s) * static_cast<double>(i + 1) / n;
        try {
            out.value += germ(a, b);
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "germ failed at level " << k << ", index " << i << ": " << e.what();
            throw NumericalFailure(os.str());
        }
    }
    return out;
}

namespace {

std::vector<DyadicSum> trace_from_levels(const std::vector<std::vector<double>>& germs, double s, double t) {
    std::vector<DyadicSum> out;
    for (std::size_t k = 0; k < germs.size(); ++k) {
        DyadicSum d{static_cast<int>(k), s, t, 0.0, 0.0};
        for (double a : germs[k]) d.value += a;
        if (k + 1 < germs.size())
            for (std::size_t i = 0; i < germs[k].size(); ++i)
                d.defect += germs[k][i] - germs[k + 1][2 * i] - germs[k + 1][2 * i + 1];
        out.push_back(d);
    }
    return out;
}

}  // namespace

std::vector<DyadicSum> dyadic_trace(const Germ& germ, double s, double t, int k_max) {
    if (!(s < t)) throw DomainError("dyadic_trace: need s < t");
    if (k_max < 0 || k_max > 14) throw DomainError("dyadic_trace: level must lie in [0, 14]");
    std::vector<std::vector<double>> germs(k_max + 1);
    for (int k = 0; k <= k_max; ++k) {
        const std::size_t n = std::size_t{1} << k;
        for (std::size_t i = 0; i < n; ++i)
            germs[k].push_back(germ(s + (t - s) * static_cast<double>(i) / n, s + (t - s) * static_cast<double>(i + 1) / n));
    }
    return trace_from_levels(germs, s, t);
}

DyadicGermEngine::DyadicGermEngine(fbm::HurstParameter h, const fbm::TimeGrid& grid, int k_max, HeatFlow flow)
    : h_(h), grid_(grid), k_max_(k_max), flow_(std::move(flow)) {
    if (k_max < 0 || k_max > 14) throw DomainError("DyadicGermEngine: level must lie in [0, 14]");
    const std::size_t n = grid.n_steps;
    if (n % (std::size_t{1} << k_max) != 0) throw DomainError("DyadicGermEngine: n_steps must be divisible by 2^k_max");
    kernel_ = std::make_shared<const fbm::VolterraKernelMatrix>(h, grid);
    sigma2_ = Array2(k_max + 1, n + 1);
    parallel_for(static_cast<std::size_t>(k_max + 1), [&](std::size_t k) {
        const std::size_t len = n >> k;
        for (std::size_t r = 1; r <= n; ++r) {
            const std::size_t lo = (r - 1) / len * len;
            const double v = fbm::conditional_variance(h, grid.t(lo), grid.t(r));
            sigma2_(k, r) = v < kVarianceFloor ? 0.0 : v;
        }
    });
}

std::vector<DyadicSum> DyadicGermEngine::trace(std::span<const double> dB) const {
    const std::size_t n = grid_.n_steps;
    if (dB.size() != n) throw DomainError("DyadicGermEngine::trace: need n_steps increments");
    const auto levels = static_cast<std::size_t>(k_max_ + 1);
    // means(k, r) = E^{lower node} W_r; full(r) = W_r
    Array2 means(levels, n + 1);
    std::vector<double> full(n + 1, 0.0);
    for (std::size_t r = 1; r <= n; ++r) {
        const auto row = kernel_->row(r);
        std::size_t k = 0;
        double acc = 0;
        for (std::size_t j = 0; j <= r; ++j) {
            while (k < levels && (r - 1) / (n >> k) * (n >> k) == j) means(k++, r) = acc;
            if (j < r) acc += row[j] * dB[j];
        }
        full[r] = acc;
    }
    const double dt = grid_.dt();
    std::vector<std::vector<double>> germs(levels);
    for (std::size_t k = 0; k < levels; ++k) {
        const std::size_t len = n >> k;
        germs[k].resize(std::size_t{1} << k);
        for (std::size_t i = 0; i < germs[k].size(); ++i) {
            const std::size_t a = i * len, b = a + len;
            double acc = 0.5 * flow_(0.0, full[a]);
            for (std::size_t r = a + 1; r < b; ++r) acc += flow_(sigma2_(k, r), means(k, r));
            acc += 0.5 * flow_(sigma2_(k, b), means(k, b));
            germs[k][i] = acc * dt;
        }
    }
    return trace_from_levels(germs, 0.0, grid_.horizon);
}

Germ DyadicGermEngine::germ(std::span<const double> dB) const {
    if (dB.size() != grid_.n_steps) throw DomainError("DyadicGermEngine::germ: need n_steps increments");
    std::vector<double> inc(dB.begin(), dB.end());
    auto kernel = kernel_;
    return [kernel, inc = std::move(inc), flow = flow_, h = h_, grid = grid_](double s, double t) {
        const std::size_t is = grid.index_of(s), it = grid.index_of(t);
        if (it <= is) throw DomainError("germ: need s < t");
        double acc = 0;
        for (std::size_t r = is; r <= it; ++r) {
            double v = fbm::conditional_variance(h, grid.t(is), grid.t(r));
            if (v < kVarianceFloor) v = 0.0;
            const double w = (r == is || r == it) ? 0.5 : 1.0;
            acc += w * flow(v, conditional_mean(*kernel, inc, is, r));
        }
        return acc * grid.dt();
    };
}

void check_sewing_condition(double h, const SewingCondition& c) {
    if (!(h > 0 && h < 1)) throw DomainError("sewing condition: h must lie in (0,1)");
    if (!(c.q >= 1)) throw DomainError("sewing condition: q must be >= 1");
    const double d_over_q = static_cast<double>(c.d) / c.q;
    if (!(c.alpha > -1.0 / (2 * h)) || !(c.alpha - d_over_q > -1.0 / h)) {
        std::ostringstream os;
        os << "moment bound needs alpha > -1/(2h) and alpha - d/q > -1/h (alpha=" << c.alpha << ", h=" << h
           << ", d=" << c.d << ", q=" << c.q << ")";
        throw RegimeRefusal("sewing_condition", os.str());
    }
}

double predicted_moment_exponent(double h, const SewingCondition& c) {
    return 1 + c.alpha * h - h * static_cast<double>(c.d) / c.q;
}

MomentScaling integral_moment_scaling(const std::function<double(double)>& f, const MomentScalingConfig& cfg) {
    check_sewing_condition(cfg.h, cfg.condition);
    if (cfg.horizons.size() < 4) throw DomainError("integral_moment_scaling: need at least 4 horizons");
    if (cfg.n_paths < 2) throw DomainError("integral_moment_scaling: need at least 2 paths");
    if (!(cfg.m >= 1)) throw DomainError("integral_moment_scaling: m must be >= 1");
    const double tmax = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
    const fbm::TimeGrid grid(tmax, cfg.n_steps);
    std::vector<std::size_t> idx;
    for (double T : cfg.horizons) {
        if (!(T > 0)) throw DomainError("integral_moment_scaling: horizons must be positive");
        idx.push_back(grid.index_of(T));
    }
    const fbm::FbmSampler sampler(fbm::HurstParameter(cfg.h), grid);
    Array2 samples(cfg.horizons.size(), cfg.n_paths);
    parallel_for(cfg.n_paths, [&](std::size_t p) {
        const auto w = sampler.sample(1, cfg.seed, p);
        std::vector<double> cum(grid.size(), 0.0);
        double prev = f(w(0));
        for (std::size_t i = 1; i < grid.size(); ++i) {
            const double cur = f(w(i));
            cum[i] = cum[i - 1] + 0.5 * (prev + cur) * grid.dt();
            prev = cur;
        }
        for (std::size_t r = 0; r < idx.size(); ++r) samples(r, p) = cum[idx[r]];
    });
    MomentScaling out;
    out.horizons = cfg.horizons;
    out.prediction = predicted_moment_exponent(cfg.h, cfg.condition);
    const double m = cfg.m;
    for (std::size_t r = 0; r < idx.size(); ++r) out.norms.push_back(xlab::power_mean(samples.row(r), m));
    const xlab::EnsembleStatistic stat = [m](std::span<const double> v) { return xlab::power_mean(v, m); };
    out.fit = xlab::fit_scaling_exponent(out.horizons, samples, stat, 200, cfg.seed);
    return out;
}

YoungIntegral young_integral(std::span<const double> y, std::span<const double> x, double p, double q) {
    if (!(p >= 1 && q >= 1)) throw DomainError("young_integral: p, q must be >= 1");
    if (!(1 / p + 1 / q > 1)) {
        std::ostringstream os;
        os << "young_integral: 1/p + 1/q must exceed 1 (p=" << p << ", q=" << q << ")";
        throw RegimeRefusal("young_condition", os.str());
    }
    if (y.size() != x.size() || x.size() < 3) throw DomainError("young_integral: paths need equal length >= 3");
    YoungIntegral out;
    const std::size_t n = x.size() - 1;
    out.values.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) out.values[i + 1] = out.values[i] + y[i] * (x[i + 1] - x[i]);
    double coarse = 0;
    for (std::size_t i = 0; i + 2 <= n; i += 2) {
        coarse += y[i] * (x[i + 2] - x[i]);
        out.refinement_error = std::max(out.refinement_error, std::abs(out.values[i + 2] - coarse));
    }
    return out;
}

std::vector<double> young_linear_ode(std::span<const double> x, double y0) {
    if (x.empty()) throw DomainError("young_linear_ode: empty driver");
    std::vector<double> y(x.size());
    y[0] = y0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) y[i + 1] = y[i] + y[i] * (x[i + 1] - x[i]);
    return y;
}

YoungDemo young_uniqueness_demo(double h, std::size_t n_steps, std::uint64_t seed, std::span<const double> etas) {
    const fbm::TimeGrid grid(1.0, n_steps);
    const auto x = fbm::FbmSampler(fbm::HurstParameter(h), grid).sample(1, seed, 0);
    YoungDemo out;
    out.n_steps = n_steps;
    auto sup = [](const std::vector<double>& v) {
        double m = 0;
        for (double a : v) m = std::max(m, std::abs(a));
        return m;
    };
    out.sup_zero = sup(young_linear_ode(x.values, 0.0));
    for (double eta : etas) {
        out.etas.push_back(eta);
        out.sup_perturbed.push_back(sup(young_linear_ode(x.values, eta)));
    }
    return out;
}

void write_csv(std::ostream& os, std::span<const DyadicSum> trace) {
    os.precision(17);
    os << "# kind=DyadicSum";
    if (!trace.empty()) os << " s=" << trace.front().s << " t=" << trace.front().t;
    os << "\nk,value,defect\n";
    for (const auto& d : trace) os << d.k << ',' << d.value << ',' << d.defect << '\n';
}

}  // namespace rbn::sewing
