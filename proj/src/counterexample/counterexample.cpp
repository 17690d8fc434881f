#include "rbn/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "rbn/sde.hpp"

namespace rbn::counterexample {

CeParams::CeParams(double gamma_, double alpha_, std::size_t d_) : gamma(gamma_), alpha(alpha_), d(d_) {
    if (!(gamma > 0 && gamma < 1)) throw DomainError("CeParams: gamma must lie in (0,1)");
    if (!(alpha > 0)) throw DomainError("CeParams: alpha must be positive");
    if (d < 1) throw DomainError("CeParams: d must be >= 1");
}

namespace {

double norm(std::span<const double> x) {
    double s = 0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

std::vector<double> drift_at(std::span<const double> x, double alpha, double r) {
    std::vector<double> out(x.size(), 0.0);
    if (r >= 1.0) return out;
    const double m = std::pow(r, -alpha);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -sign(x[i]) * m;
    return out;
}

}  // namespace

std::vector<double> ce_drift(std::span<const double> x, double alpha) {
    const double r = norm(x);
    if (r == 0.0) throw DomainError("ce_drift: singular at the origin; use a floor");
    return drift_at(x, alpha, r);
}

std::vector<double> ce_drift_floored(std::span<const double> x, double alpha, double delta) {
    if (!(delta > 0)) throw DomainError("ce_drift_floored: delta must be positive");
    return drift_at(x, alpha, std::max(norm(x), delta));
}

double escape_exponent(double gamma, double alpha) { return 1.0 - gamma - alpha * gamma; }

EscapeCheck escape_inequality_check(double eps, double gamma, double alpha, std::size_t d, double k) {
    if (d < 1) throw DomainError("escape_inequality_check: d must be >= 1");
    if (!(eps > 0 && eps < 1.0 / static_cast<double>(d)))
        throw DomainError("escape_inequality_check: eps must lie in (0, 1/d)");
    if (!(gamma > 0 && gamma < 1)) throw DomainError("escape_inequality_check: gamma must lie in (0,1)");
    const double dd = static_cast<double>(d);
    EscapeCheck c;
    c.required_k = std::pow(gamma, -gamma) * std::pow(dd, -alpha * gamma) * std::pow(eps, escape_exponent(gamma, alpha));
    c.margin = k - c.required_k;
    const double e = gamma / (1 - gamma);
    c.holds = k >= 0 && eps <= std::pow(gamma, e) * std::pow(k, 1 / (1 - gamma)) * std::pow(eps * dd, alpha * e);
    return c;
}

double declared_gamma(double h) {
    if (!(h > 0.05 && h < 1)) throw DomainError("declared_gamma: h must lie in (0.05, 1)");
    return h - 0.05;
}

namespace {

void euler(const fbm::FbmPath& f, const CeParams& p, double delta, fbm::FbmPath& x, fbm::FbmPath& psi) {
    const std::size_t d = p.d;
    x = fbm::zero_path(f.grid, d, f.h);
    psi = x;
    x.seed = psi.seed = f.seed;
    const double dt = f.grid.dt();
    for (std::size_t i = 0; i < f.grid.n_steps; ++i) {
        const auto b = ce_drift_floored(x.point(i), p.alpha, delta);
        for (std::size_t k = 0; k < d; ++k) {
            double step = b[k] * dt;
            // the drift alone never carries a coordinate across 0
            if (std::abs(step) > std::abs(x(i, k))) step = -x(i, k);
            psi(i + 1, k) = psi(i, k) + step;
            x(i + 1, k) = psi(i + 1, k) + f(i + 1, k);
        }
    }
}

Excursion excursion(const fbm::FbmPath& x, const CeParams& p, double eps) {
    const double dd = static_cast<double>(p.d);
    const auto& g = x.grid;
    std::size_t n2 = 0;
    while (n2 < g.size() && norm(x.point(n2)) < dd * eps) ++n2;
    if (n2 == g.size()) throw NumericalFailure("attempt_solve: level d eps never reached");
    std::size_t i = 0;
    for (std::size_t k = 1; k < p.d; ++k)
        if (std::abs(x(n2, k)) > std::abs(x(n2, i))) i = k;
    const double s = sign(x(n2, i));
    std::size_t j = n2;
    while (j > 0 && s * x(j, i) > 0) --j;
    double t1 = g.t(j);
    const double v0 = s * x(j, i);
    if (v0 < 0) t1 += g.dt() * (-v0) / (s * x(j + 1, i) - v0);
    Excursion e;
    e.eps = eps;
    e.t_prime = t1;
    e.t_doubleprime = g.t(n2);
    const double tau = std::max(e.t_doubleprime - e.t_prime, g.dt());
    e.k_hat = (eps + tau * std::pow(dd * eps, -p.alpha)) / std::pow(tau, p.gamma);
    return e;
}

}  // namespace

ExcursionReport attempt_solve(const fbm::FbmPath& forcing, const CeParams& params, std::span<const double> deltas,
                              std::size_t n_eps) {
    if (forcing.dim != params.d) throw DomainError("attempt_solve: forcing dimension differs from d");
    if (forcing.grid.n_steps < 1 || forcing.grid.horizon < 1.0 - 1e-12)
        throw DomainError("attempt_solve: forcing shorter than the unit horizon");
    for (std::size_t k = 0; k < forcing.dim; ++k)
        if (forcing(0, k) != 0.0) throw DomainError("attempt_solve: forcing must start at 0");
    if (deltas.empty()) throw DomainError("attempt_solve: empty floor list");
    if (n_eps < 2) throw DomainError("attempt_solve: need at least two eps levels");

    ExcursionReport rep;
    rep.params = params;
    rep.degenerate = std::all_of(forcing.values.begin(), forcing.values.end(), [](double v) { return v == 0.0; });
    const double dd = static_cast<double>(params.d);
    for (double delta : deltas) {
        if (!(delta > 0)) throw DomainError("attempt_solve: floors must be positive");
        FloorReport fr;
        fr.delta = delta;
        euler(forcing, params, delta, fr.x, fr.psi);
        double sup = 0;
        for (std::size_t i = 0; i < fr.x.grid.size(); ++i) sup = std::max(sup, norm(fr.x.point(i)));
        if (rep.degenerate || sup == 0.0) {
            rep.degenerate = true;
            fr.verdict = "degenerate";
            rep.floors.push_back(std::move(fr));
            continue;
        }
        // largest dyadic eps with d eps < min(sup, 1)
        int j = 1;
        while (std::ldexp(dd, -j) >= std::min(sup, 1.0)) ++j;
        for (std::size_t m = 0; m < n_eps; ++m)
            fr.excursions.push_back(excursion(fr.x, params, std::ldexp(1.0, -(j + static_cast<int>(m)))));
        int inversions = 0;
        for (std::size_t m = 1; m < n_eps; ++m) inversions += !(fr.excursions[m].k_hat > fr.excursions[m - 1].k_hat);
        fr.strictly_increasing = inversions == 0;
        fr.signature = inversions <= 1 && params.supercritical();
        fr.verdict = fr.signature ? "non_existence_signature" : "no_signature";
        rep.floors.push_back(std::move(fr));
    }
    return rep;
}

BadDrift construct_bad_drift(double h, std::size_t d, double p) {
    const auto reg = sde::classify_regime(h, d, p);
    if (reg.verdict != sde::Verdict::counterexample_regime || !std::isfinite(p))
        throw RegimeRefusal("regime", "construct_bad_drift: requires d/p > 1/h - 1, got " + sde::to_string(reg.verdict));
    const double lo = 1.0 / h - 1.0, hi = static_cast<double>(d) / p;
    BadDrift bd;
    bd.alpha = std::clamp(0.5 * (lo + hi), std::nextafter(lo, hi), std::nextafter(hi, lo));
    bd.p = p;
    const double alpha = bd.alpha;
    bd.drift.d = d;
    bd.drift.components = d;
    bd.drift.p = p;
    std::ostringstream label;
    label << "-sign(x_i)|x|^-" << alpha << " 1(|x|<1)";
    bd.drift.label = label.str();
    bd.drift.f = [alpha](std::span<const double> x, std::span<double> out) {
        const auto b = ce_drift(x, alpha);
        std::copy(b.begin(), b.end(), out.begin());
    };
    const double dd = static_cast<double>(d);
    bd.exact_norm_p = dd * mollify::unit_ball_volume(d) / (dd - alpha * p);

    // cell-centre sums of |x|^{-alpha p} over the unit ball, cells never centred at 0
    const std::size_t budget = d == 1 ? 1u << 16 : (d == 2 ? 1u << 11 : 1u << 7);
    for (std::size_t n = budget >> 3; n <= budget; n <<= 1) {
        const mollify::SpatialGrid g(d, 1.0, n);
        double s = 0;
        std::vector<double> c(d);
        for (std::size_t cell = 0; cell < g.total(); ++cell) {
            const auto idx = g.unflatten(cell);
            for (std::size_t k = 0; k < d; ++k) c[k] = g.center(idx[k]);
            const double r = norm(c);
            if (r < 1.0) s += std::pow(r, -alpha * p);
        }
        bd.n_cells.push_back(n);
        bd.grid_norm_p.push_back(s * g.cell_volume());
    }
    const auto& v = bd.grid_norm_p;
    bool ok = std::isfinite(v.back()) && v.back() < 1.05 * bd.exact_norm_p;
    for (std::size_t i = 2; i < v.size(); ++i) ok = ok && std::abs(v[i] - v[i - 1]) < std::abs(v[i - 1] - v[i - 2]);
    bd.lp_stable = ok;
    return bd;
}

void write_csv(std::ostream& os, const ExcursionReport& r, std::size_t floor) {
    if (floor >= r.floors.size()) throw DomainError("write_csv: floor index out of range");
    const auto& f = r.floors[floor];
    os.precision(17);
    os << "# kind=ExcursionReport gamma=" << r.params.gamma << " alpha=" << r.params.alpha << " d=" << r.params.d
       << " delta=" << f.delta << " supercritical=" << r.params.supercritical() << "\n";
    os << "eps,t_prime,t_doubleprime,K_hat,verdict\n";
    for (const auto& e : f.excursions)
        os << e.eps << ',' << e.t_prime << ',' << e.t_doubleprime << ',' << e.k_hat << ',' << f.verdict << '\n';
}

}  // namespace rbn::counterexample
