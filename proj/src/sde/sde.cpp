#include "rbn/sde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace rbn::sde {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::weak_existence: return "weak_existence";
        case Verdict::counterexample_regime: return "counterexample_regime";
        case Verdict::boundary: return "boundary";
    }
    return "unknown";
}

RegimeClassification classify_regime(double h, std::size_t d, double p) {
    if (!(h > 0 && h < 1)) throw DomainError("classify_regime: h must lie in (0,1)");
    if (d < 1) throw DomainError("classify_regime: d must be >= 1");
    if (!(p >= 1)) throw DomainError("classify_regime: p must lie in [1, inf]");
    RegimeClassification r;
    r.h = h;
    r.d = d;
    r.p = p;
    r.margin = (1.0 / h - 1.0) - static_cast<double>(d) / p;
    if (std::abs(r.margin) <= 1e-12) r.verdict = Verdict::boundary;
    else r.verdict = r.margin > 0 ? Verdict::weak_existence : Verdict::counterexample_regime;
    return r;
}

namespace {

using Evaluator = std::function<void(std::span<const double>, std::span<double>, std::size_t&)>;

SolutionPath euler_core(const Evaluator& eval, std::size_t components, const fbm::FbmPath& w,
                        std::span<const double> x0) {
    const std::size_t d = w.dim;
    if (x0.size() != d) throw DomainError("euler_solve: x0 dimension differs from the noise");
    if (components != d) throw DomainError("euler_solve: drift must map R^d to R^d");
    SolutionPath sol;
    sol.w = w;
    sol.x = w;
    sol.psi = fbm::zero_path(w.grid, d, w.h);
    sol.psi.seed = w.seed;
    const double dt = w.grid.dt();
    std::vector<double> b(d);
    for (std::size_t k = 0; k < d; ++k) sol.x(0, k) = x0[k] + sol.psi(0, k) + w(0, k);
    for (std::size_t i = 0; i < w.grid.n_steps; ++i) {
        eval(sol.x.point(i), b, sol.outside_evaluations);
        for (std::size_t k = 0; k < d; ++k) {
            if (!std::isfinite(b[k])) throw NumericalFailure("euler_solve: drift returned a non-finite value");
            sol.psi(i + 1, k) = sol.psi(i, k) + b[k] * dt;
            sol.x(i + 1, k) = x0[k] + sol.psi(i + 1, k) + w(i + 1, k);
        }
    }
    return sol;
}

}  // namespace

SolutionPath euler_solve(const mollify::GridFunction& drift, const fbm::FbmPath& w, std::span<const double> x0) {
    if (drift.grid.d != w.dim) throw DomainError("euler_solve: drift grid dimension differs from the noise");
    const Evaluator eval = [&](std::span<const double> x, std::span<double> out, std::size_t& outside) {
        mollify::interpolate(drift, x, out, &outside);
    };
    return euler_core(eval, drift.components, w, x0);
}

SolutionPath euler_solve(const mollify::DriftSpec& drift, const fbm::FbmPath& w, std::span<const double> x0) {
    if (const auto* g = std::get_if<mollify::GridDrift>(&drift)) return euler_solve(g->f, w, x0);
    if (const auto* c = std::get_if<mollify::CallableDrift>(&drift)) {
        if (c->d != w.dim) throw DomainError("euler_solve: drift dimension differs from the noise");
        const Evaluator eval = [&](std::span<const double> x, std::span<double> out, std::size_t&) { c->f(x, out); };
        return euler_core(eval, c->components, w, x0);
    }
    throw DomainError("euler_solve: measure drifts are singular; mollify them first");
}

std::vector<double> RegularizedSolution::consecutive() const {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < solutions.size(); ++i) out.push_back(sup_distance(i, i + 1));
    return out;
}

RegularizedSolution regularized_solution(const mollify::DriftSpec& b, std::span<const double> x0,
                                         std::span<const std::size_t> n_list, const fbm::FbmPath& w,
                                         const mollify::SpatialGrid& grid) {
    RegularizedSolution out;
    out.regime = classify_regime(w.h, mollify::dimension(b), mollify::integrability(b));
    if (out.regime.verdict != Verdict::weak_existence) {
        std::ostringstream os;
        os << "regularized_solution: verdict " << to_string(out.regime.verdict) << " (margin " << out.regime.margin
           << ") for h=" << w.h << ", d=" << out.regime.d << ", p=" << out.regime.p;
        throw RegimeRefusal("regime", os.str());
    }
    if (n_list.empty()) throw DomainError("regularized_solution: empty mollification list");
    out.n_list.assign(n_list.begin(), n_list.end());
    const auto drifts = mollify::mollified_sequence(b, n_list, grid);
    for (const auto& f : drifts) out.solutions.push_back(euler_solve(f, w, x0));
    const std::size_t m = out.solutions.size();
    out.sup_distance = Array2(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            double s = 0;
            const auto& a = out.solutions[i].x.values;
            const auto& c = out.solutions[j].x.values;
            for (std::size_t q = 0; q < a.size(); ++q) s = std::max(s, std::abs(a[q] - c[q]));
            out.sup_distance(i, j) = out.sup_distance(j, i) = s;
        }
    return out;
}

VariationStatistic drift_variation(const SolutionPath& sol, double s, double t, double ell) {
    if (!(s < t)) throw DomainError("drift_variation: need s < t");
    if (!(ell >= 1)) throw DomainError("drift_variation: ell must be >= 1");
    const auto& g = sol.grid();
    const std::size_t i0 = g.index_of(s), i1 = g.index_of(t);
    VariationStatistic v{ell, s, t, 0.0, ell > 1};
    double acc = 0;
    for (std::size_t i = i0; i < i1; ++i) {
        double inc = 0;
        if (sol.dim() == 1) inc = std::abs(sol.psi(i + 1) - sol.psi(i));
        else {
            for (std::size_t k = 0; k < sol.dim(); ++k) {
                const double dk = sol.psi(i + 1, k) - sol.psi(i, k);
                inc += dk * dk;
            }
            inc = std::sqrt(inc);
        }
        acc += ell == 1 ? inc : std::pow(inc, ell);
    }
    v.value = ell == 1 ? acc : std::pow(acc, 1.0 / ell);
    return v;
}

mollify::CallableDrift skew_drift(double beta, std::size_t n) {
    if (n == 0) throw DomainError("skew_drift: mollification level must be positive");
    const double a = static_cast<double>(n) / 2, c = beta * std::sqrt(static_cast<double>(n) / (2 * std::numbers::pi));
    mollify::CallableDrift d;
    d.f = [a, c](std::span<const double> x, std::span<double> out) { out[0] = c * std::exp(-a * x[0] * x[0]); };
    d.p = 1.0;
    std::ostringstream os;
    os << beta << "*P_{1/" << n << "}delta_0";
    d.label = os.str();
    return d;
}

SkewResult skew_fbm(double beta, std::size_t n, const fbm::FbmPath& w, double x0) {
    if (w.dim != 1) throw DomainError("skew_fbm: d = 1 only");
    SkewResult r;
    r.regime_warning = !(w.h < 0.5);
    const double start[] = {x0};
    r.path = euler_solve(skew_drift(beta, n), w, start);
    return r;
}

double legall_skew(double beta) { return -std::expm1(-2 * beta) / (1 + std::exp(-2 * beta)); }

double skew_bm_terminal(double s, Engine& eng) {
    if (!(s >= -1 && s <= 1)) throw DomainError("skew_bm_terminal: s must lie in [-1,1]");
    NormalSource normal(eng);
    const double z = std::abs(normal());
    return uniform_open(eng) < (1 + s) / 2 ? z : -z;
}

double measure_drift_residual(const SolutionPath& sol, const mollify::MeasureDrift& b,
                              const localtime::LocalTimeField& L) {
    if (sol.dim() != 1 || b.d != 1 || b.components != 1 || L.dim() != 1)
        throw DomainError("measure_drift_residual: d = 1 scalar measures only");
    const auto& g = sol.grid();
    const double lo = L.points(0, 0), hi = L.points(L.points.rows - 1, 0);
    double worst = 0;
    for (std::size_t k = 0; k < L.times.size(); ++k) {
        const std::size_t i = g.index_of(L.times[k]);
        double pred = 0;
        for (const auto& a : b.atoms) {
            const double y = a.location[0];
            if (y >= lo && y <= hi) pred += a.weight[0] * L.at(k, y);
            else if (y > lo - L.R && y < hi + L.R) throw DomainError("measure_drift_residual: atom near the field edge");
        }
        if (b.density) {
            const auto& rho = *b.density;
            for (std::size_t c = 0; c < rho.grid.n_cells; ++c) {
                const double y = rho.grid.center(c);
                if (rho.at(c) == 0) continue;
                if (y < lo || y > hi) throw DomainError("measure_drift_residual: density grid exceeds the field");
                pred += L.at(k, y) * rho.at(c) * rho.grid.dx();
            }
        }
        worst = std::max(worst, std::abs(sol.psi(i) - pred));
    }
    return worst;
}

void write_csv(std::ostream& os, const SolutionPath& sol) {
    os.precision(17);
    const auto& g = sol.grid();
    os << "# kind=SolutionPath h=" << sol.w.h << " seed=" << sol.w.seed << " n_steps=" << g.n_steps
       << " horizon=" << g.horizon << " dim=" << sol.dim() << " outside_evaluations=" << sol.outside_evaluations
       << '\n';
    os << 't';
    const std::size_t d = sol.dim();
    for (const char* name : {"x", "w", "psi"}) {
        if (d == 1) os << ',' << name;
        else
            for (std::size_t k = 0; k < d; ++k) os << ',' << name << '_' << (k + 1);
    }
    os << '\n';
    for (std::size_t i = 0; i < g.size(); ++i) {
        os << g.t(i);
        for (const auto* p : {&sol.x, &sol.w, &sol.psi})
            for (std::size_t k = 0; k < d; ++k) os << ',' << (*p)(i, k);
        os << '\n';
    }
}

}  // namespace rbn::sde
