#include "rbn/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace rbn::mollify {

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
    if (!(lo > 0 && hi >= lo) || n < 2) throw DomainError("log_spaced: need 0 < lo <= hi and n >= 2");
    std::vector<double> out(n);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * static_cast<double>(i) / (n - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

BesovEstimate empirical_besov_norm(const DriftSpec& f, const BesovIndex& idx, std::span<const double> t_samples,
                                   const SpatialGrid& grid) {
    if (!(idx.alpha < 0)) throw DomainError("empirical_besov_norm: only alpha < 0 is supported");
    if (t_samples.size() < 8) throw DomainError("empirical_besov_norm: need at least 8 t-samples");
    const auto [mn, mx] = std::minmax_element(t_samples.begin(), t_samples.end());
    if (!(*mn > 0) || *mx > 1.0) throw DomainError("empirical_besov_norm: t-samples must lie in (0,1]");
    if (*mx / *mn < 1e3 * (1 - 1e-12)) throw DomainError("empirical_besov_norm: t-samples must span 3 decades");
    BesovEstimate est;
    est.t_samples.assign(t_samples.begin(), t_samples.end());
    for (double t : t_samples) {
        const double v = std::pow(t, -idx.alpha / 2) * lp_norm(heat_mollify(f, t, grid), idx.p);
        est.weighted_norms.push_back(v);
        if (est.weighted_norms.size() == 1 || v > est.value) {
            est.value = v;
            est.argmax_t = t;
        }
    }
    return est;
}

namespace {

// ||P_t l^{R,0} - p_t||_{L_1(R)} with both terms in closed form.
double l1_gap_1d(double R, double t) {
    const double s = std::sqrt(t);
    auto diff = [&](double x) {
        const double ball = (std::erf((x + R) / (std::sqrt(2.0) * s)) - std::erf((x - R) / (std::sqrt(2.0) * s))) / (4 * R);
        const double gauss = std::exp(-x * x / (2 * t)) / std::sqrt(2 * std::numbers::pi * t);
        return std::abs(ball - gauss);
    };
    using boost::math::quadrature::gauss_kronrod;
    // symmetric; break at the ball edge and at a few kernel widths past it
    double total = 0;
    const double pts[] = {0.0, std::min(R, s), R, R + s, R + 4 * s, R + 12 * s};
    double prev = 0;
    for (double b : pts) {
        if (b > prev) total += gauss_kronrod<double, 61>::integrate(diff, prev, b, 12, 1e-11);
        prev = std::max(prev, b);
    }
    return 2 * total;
}

}  // namespace

double delta_approx_error(double R, double eps, std::size_t d) {
    if (!(R > 0 && R <= 1)) throw DomainError("delta_approx_error: R must lie in (0,1]");
    if (!(eps > 0)) throw DomainError("delta_approx_error: eps must be positive");
    if (d == 1) {
        const auto ts = log_spaced(std::min(1e-3, R * R / 256), 1.0, 64);
        double best = 0;
        for (double t : ts) best = std::max(best, std::pow(t, eps / 2) * l1_gap_1d(R, t));
        return best;
    }
    if (d == 2) {
        const SpatialGrid grid(2, 2.0, 512);
        MeasureDrift m;
        m.d = 2;
        m.components = 1;
        m.atoms.push_back(Atom{{0.0, 0.0}, {-1.0}});
        m.density = BallIndicator({0.0, 0.0}, R).on_grid(grid);
        const double tmin = 4 * grid.dx() * grid.dx();
        const auto ts = log_spaced(tmin, 1.0, 12);
        return empirical_besov_norm(m, {-eps, 1.0}, ts, grid).value;
    }
    throw DomainError("delta_approx_error: only d = 1 and d = 2 are supported");
}

void write_csv(std::ostream& os, const GridFunction& f) {
    os.precision(17);
    const SpatialGrid& g = f.grid;
    os << "# kind=GridFunction d=" << g.d << " L=" << g.L << " n_cells=" << g.n_cells
       << " components=" << f.components << '\n';
    for (std::size_t a = 0; a < g.d; ++a) os << (a ? "," : "") << "x_" << (a + 1);
    for (std::size_t c = 0; c < f.components; ++c) os << ",f_" << (c + 1);
    os << '\n';
    for (std::size_t cell = 0; cell < g.total(); ++cell) {
        const auto idx = g.unflatten(cell);
        for (std::size_t a = 0; a < g.d; ++a) os << (a ? "," : "") << g.center(idx[a]);
        for (std::size_t c = 0; c < f.components; ++c) os << ',' << f.at(cell, c);
        os << '\n';
    }
}

GridFunction read_csv(std::istream& is) {
    std::string line;
    std::map<std::string, std::string> meta;
    while (std::getline(is, line) && !line.empty() && line[0] == '#') {
        std::istringstream ls(line.substr(1));
        std::string tok;
        while (ls >> tok)
            if (auto eq = tok.find('='); eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    for (const char* k : {"d", "L", "n_cells", "components"})
        if (!meta.count(k)) throw DomainError(std::string("GridFunction csv: header lacks ") + k);
    const SpatialGrid g(std::stoul(meta["d"]), std::stod(meta["L"]), std::stoul(meta["n_cells"]));
    GridFunction f(g, std::stoul(meta["components"]));
    std::size_t cell = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (cell >= g.total()) throw DomainError("GridFunction csv: too many rows");
        std::istringstream ls(line);
        std::string v;
        for (std::size_t a = 0; a < g.d; ++a) std::getline(ls, v, ',');
        for (std::size_t c = 0; c < f.components; ++c) {
            if (!std::getline(ls, v, ',')) throw DomainError("GridFunction csv: short row");
            f.at(cell, c) = std::stod(v);
        }
        ++cell;
    }
    if (cell != g.total()) throw DomainError("GridFunction csv: row count mismatch");
    return f;
}

}  // namespace rbn::mollify
