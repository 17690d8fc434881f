#include "rbn/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rbn::mollify {

SpatialGrid::SpatialGrid(std::size_t d_, double L_, std::size_t n_cells_) : d(d_), L(L_), n_cells(n_cells_) {
    if (d == 0 || d > 3) throw DomainError("SpatialGrid: dimension must be 1, 2 or 3");
    if (!(L > 0)) throw DomainError("SpatialGrid: extent must be positive");
    if (n_cells < 16) throw DomainError("SpatialGrid: need at least 16 cells per axis");
}

std::size_t SpatialGrid::total() const noexcept {
    std::size_t n = 1;
    for (std::size_t a = 0; a < d; ++a) n *= n_cells;
    return n;
}

double SpatialGrid::cell_volume() const noexcept { return std::pow(dx(), static_cast<double>(d)); }

std::vector<std::size_t> SpatialGrid::unflatten(std::size_t flat) const {
    std::vector<std::size_t> idx(d);
    for (std::size_t a = d; a-- > 0;) {
        idx[a] = flat % n_cells;
        flat /= n_cells;
    }
    return idx;
}

GridFunction::GridFunction(const SpatialGrid& g, std::size_t c, double fill)
    : grid(g), components(c), values(g.total() * c, fill) {}

std::size_t dimension(const DriftSpec& b) {
    return std::visit([](const auto& v) -> std::size_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GridDrift>) return v.f.grid.d;
        else return v.d;
    }, b);
}

std::size_t components(const DriftSpec& b) {
    return std::visit([](const auto& v) -> std::size_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GridDrift>) return v.f.components;
        else return v.components;
    }, b);
}

double integrability(const DriftSpec& b) {
    return std::visit([](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MeasureDrift>) return 1.0;
        else return v.p;
    }, b);
}

double total_variation(const DriftSpec& b) {
    if (const auto* m = std::get_if<MeasureDrift>(&b)) {
        double tv = 0;
        for (const auto& a : m->atoms) {
            double s = 0;
            for (double w : a.weight) s += w * w;
            tv += std::sqrt(s);
        }
        if (m->density) tv += lp_norm(*m->density, 1.0);
        return tv;
    }
    if (const auto* g = std::get_if<GridDrift>(&b)) return lp_norm(g->f, 1.0);
    throw DomainError("total_variation: not defined for callable drifts");
}

MeasureDrift dirac(std::vector<double> at, double weight) {
    MeasureDrift m;
    m.d = at.size();
    m.components = 1;
    m.atoms.push_back(Atom{std::move(at), {weight}});
    return m;
}

double unit_ball_volume(std::size_t d) {
    const double k = static_cast<double>(d) / 2.0;
    return std::pow(std::numbers::pi, k) / std::tgamma(k + 1.0);
}

double heat_kernel(std::span<const double> x, double t) {
    double r2 = 0;
    for (double v : x) r2 += v * v;
    return std::exp(-r2 / (2 * t)) / std::pow(2 * std::numbers::pi * t, x.size() / 2.0);
}

BallIndicator::BallIndicator(std::vector<double> c, double r) : center(std::move(c)), R(r) {
    if (!(R > 0)) throw DomainError("BallIndicator: radius must be positive");
    if (center.empty()) throw DomainError("BallIndicator: empty center");
}

double BallIndicator::normalization() const {
    return 1.0 / (unit_ball_volume(center.size()) * std::pow(R, static_cast<double>(center.size())));
}

double BallIndicator::operator()(std::span<const double> z) const {
    double r2 = 0;
    for (std::size_t a = 0; a < center.size(); ++a) r2 += (z[a] - center[a]) * (z[a] - center[a]);
    return r2 < R * R ? normalization() : 0.0;
}

GridFunction BallIndicator::on_grid(const SpatialGrid& g) const {
    if (g.d != center.size()) throw DomainError("BallIndicator: grid dimension mismatch");
    GridFunction out(g, 1);
    const double h = g.dx();
    const double norm = normalization();
    constexpr std::size_t sub = 16;
    std::vector<double> z(g.d);
    for (std::size_t cell = 0; cell < g.total(); ++cell) {
        const auto idx = g.unflatten(cell);
        double near2 = 0, far2 = 0;
        for (std::size_t a = 0; a < g.d; ++a) {
            const double lo = g.center(idx[a]) - h / 2 - center[a];
            const double hi = lo + h;
            const double nearest = lo > 0 ? lo : (hi < 0 ? -hi : 0.0);
            const double farthest = std::max(std::abs(lo), std::abs(hi));
            near2 += nearest * nearest;
            far2 += farthest * farthest;
        }
        if (near2 >= R * R) continue;
        if (far2 < R * R) {
            out.at(cell) = norm;
            continue;
        }
        std::size_t hits = 0, count = 0;
        std::vector<std::size_t> s(g.d, 0);
        while (true) {
            double r2 = 0;
            for (std::size_t a = 0; a < g.d; ++a) {
                const double v = g.center(idx[a]) - h / 2 + (s[a] + 0.5) * h / sub - center[a];
                r2 += v * v;
            }
            hits += r2 < R * R;
            ++count;
            std::size_t a = 0;
            while (a < g.d && ++s[a] == sub) s[a++] = 0;
            if (a == g.d) break;
        }
        out.at(cell) = norm * static_cast<double>(hits) / static_cast<double>(count);
    }
    return out;
}

namespace {

void check_resolution(const SpatialGrid& g, double t) {
    if (!(t > 0)) throw DomainError("heat_mollify: t must be positive");
    if (g.dx() > std::sqrt(t) / 2) {
        const auto need = static_cast<std::size_t>(std::ceil(4.0 * g.L / std::sqrt(t)));
        std::ostringstream os;
        os << "heat_mollify: grid too coarse for t=" << t << " (dx=" << g.dx() << " > sqrt(t)/2); need at least "
           << need << " cells per axis on [-" << g.L << "," << g.L << "]";
        throw RegimeRefusal("grid_resolution", os.str());
    }
}

// Separable direct-summation Gaussian convolution, zero extension.
GridFunction convolve(const GridFunction& f, double t) {
    const SpatialGrid& g = f.grid;
    const std::size_t n = g.n_cells;
    const double h = g.dx();
    const auto half = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(9.0 * std::sqrt(t) / h)));
    std::vector<double> w(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        const double x = static_cast<double>(k) * h;
        w[k] = h * std::exp(-x * x / (2 * t)) / std::sqrt(2 * std::numbers::pi * t);
    }
    GridFunction cur = f;
    GridFunction next = f;
    const std::size_t c = f.components;
    for (std::size_t axis = 0; axis < g.d; ++axis) {
        std::size_t stride = 1;
        for (std::size_t a = axis + 1; a < g.d; ++a) stride *= n;
        const std::size_t lines = g.total() / n;
        parallel_for(lines, [&](std::size_t line) {
            // base index of this line: split line into (outer, inner) around the axis
            const std::size_t inner = line % stride;
            const std::size_t outer = line / stride;
            const std::size_t base = outer * stride * n + inner;
            for (std::size_t comp = 0; comp < c; ++comp) {
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t lo = i >= half ? i - half : 0;
                    const std::size_t hi = std::min(n - 1, i + half);
                    double s = 0;
                    for (std::size_t j = lo; j <= hi; ++j)
                        s += w[i > j ? i - j : j - i] * cur.values[(base + j * stride) * c + comp];
                    next.values[(base + i * stride) * c + comp] = s;
                }
            }
        });
        std::swap(cur, next);
    }
    return cur;
}

GridFunction resample(const GridFunction& f, const SpatialGrid& target) {
    if (f.grid == target) return f;
    if (f.grid.d != target.d) throw DomainError("grid dimension mismatch");
    GridFunction out(target, f.components);
    std::vector<double> x(target.d), v(f.components);
    for (std::size_t cell = 0; cell < target.total(); ++cell) {
        const auto idx = target.unflatten(cell);
        for (std::size_t a = 0; a < target.d; ++a) x[a] = target.center(idx[a]);
        interpolate(f, x, v);
        for (std::size_t k = 0; k < f.components; ++k) out.at(cell, k) = v[k];
    }
    return out;
}

}  // namespace

GridFunction heat_mollify(const GridFunction& f, double t) {
    check_resolution(f.grid, t);
    return convolve(f, t);
}

GridFunction heat_mollify(const DriftSpec& b, double t, const SpatialGrid& grid) {
    if (dimension(b) != grid.d) throw DomainError("heat_mollify: drift and grid dimensions differ");
    check_resolution(grid, t);
    if (const auto* c = std::get_if<CallableDrift>(&b)) {
        GridFunction f(grid, c->components);
        std::vector<double> x(grid.d), v(c->components);
        for (std::size_t cell = 0; cell < grid.total(); ++cell) {
            const auto idx = grid.unflatten(cell);
            for (std::size_t a = 0; a < grid.d; ++a) x[a] = grid.center(idx[a]);
            c->f(x, v);
            for (std::size_t k = 0; k < c->components; ++k) f.at(cell, k) = v[k];
        }
        return convolve(f, t);
    }
    if (const auto* g = std::get_if<GridDrift>(&b)) return resample(heat_mollify(g->f, t), grid);
    const auto& m = std::get<MeasureDrift>(b);
    GridFunction out(grid, m.components);
    if (m.density) {
        if (m.density->components != m.components) throw DomainError("heat_mollify: density component mismatch");
        out = resample(heat_mollify(*m.density, t), grid);
    }
    std::vector<double> x(grid.d);
    for (const auto& atom : m.atoms) {
        if (atom.location.size() != grid.d || atom.weight.size() != m.components)
            throw DomainError("heat_mollify: malformed atom");
        for (std::size_t cell = 0; cell < grid.total(); ++cell) {
            const auto idx = grid.unflatten(cell);
            for (std::size_t a = 0; a < grid.d; ++a) x[a] = grid.center(idx[a]) - atom.location[a];
            const double k = heat_kernel(x, t);
            for (std::size_t c = 0; c < m.components; ++c) out.at(cell, c) += atom.weight[c] * k;
        }
    }
    return out;
}

namespace {

// 1-D Gauss-Hermite nodes/weights for E f(Z), Z ~ N(0,1).
struct HermiteRule {
    std::vector<double> x, w;
    explicit HermiteRule(unsigned n) {
        // Newton on orthonormal Hermite functions with asymptotic root guesses,
        // then rescale from weight exp(-z^2) to the standard normal.
        x.resize(n);
        w.resize(n);
        const double pim4 = std::pow(std::numbers::pi, -0.25);
        const unsigned m = (n + 1) / 2;
        double z = 0;
        for (unsigned i = 0; i < m; ++i) {
            if (i == 0) z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -1.0 / 6);
            else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
            else if (i == 2) z = 1.86 * z - 0.86 * x[0];
            else if (i == 3) z = 1.91 * z - 0.91 * x[1];
            else z = 2.0 * z - x[i - 2];
            double pp = 0;
            for (int it = 0; it < 100; ++it) {
                double p1 = pim4, p2 = 0;
                for (unsigned j = 1; j <= n; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
                }
                pp = std::sqrt(2.0 * n) * p2;
                const double dz = p1 / pp;
                z -= dz;
                if (std::abs(dz) < 1e-15 * std::max(1.0, std::abs(z))) break;
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = w[n - 1 - i] = 2.0 / (pp * pp);
        }
        for (unsigned i = 0; i < n; ++i) {
            x[i] *= std::sqrt(2.0);
            w[i] /= std::sqrt(std::numbers::pi);
        }
    }
};

const HermiteRule& hermite_rule() {
    static const HermiteRule rule(24);
    return rule;
}

// Weights int_cell p_t(y - x) dy along one axis for cells [lo, hi].
void cell_weights(const SpatialGrid& g, double x, double t, std::size_t& lo, std::size_t& hi, std::vector<double>& w) {
    const double h = g.dx();
    const double reach = 9.0 * std::sqrt(t) + h;
    const double a = (x - reach + g.L) / h, b = (x + reach + g.L) / h;
    if (b < 0 || a >= static_cast<double>(g.n_cells)) {
        lo = 1;
        hi = 0;
        return;
    }
    lo = static_cast<std::size_t>(std::max(0.0, std::floor(a)));
    hi = std::min(g.n_cells - 1, static_cast<std::size_t>(std::floor(b)));
    w.assign(hi - lo + 1, 0.0);
    if (t == 0.0) {
        const double p = (x + g.L) / h;
        const auto i = static_cast<std::size_t>(std::floor(p));
        if (p >= 0 && i >= lo && i <= hi) w[i - lo] = 1.0;
        return;
    }
    const double s = 1.0 / std::sqrt(2 * t);
    for (std::size_t i = lo; i <= hi; ++i) {
        const double e0 = (-g.L + static_cast<double>(i) * h - x) * s;
        const double e1 = e0 + h * s;
        // difference of erf tails keeps precision far from the centre
        double v;
        if (e0 > 0) v = 0.5 * (std::erfc(e0) - std::erfc(e1));
        else if (e1 < 0) v = 0.5 * (std::erfc(-e1) - std::erfc(-e0));
        else v = 0.5 * (std::erf(e1) - std::erf(e0));
        w[i - lo] = v;
    }
}

void grid_point_eval(const GridFunction& f, double t, std::span<const double> x, std::span<double> out) {
    const SpatialGrid& g = f.grid;
    std::vector<std::size_t> lo(g.d), hi(g.d);
    std::vector<std::vector<double>> w(g.d);
    for (std::size_t a = 0; a < g.d; ++a) {
        cell_weights(g, x[a], t, lo[a], hi[a], w[a]);
        if (hi[a] < lo[a]) return;
    }
    std::vector<std::size_t> idx(lo);
    while (true) {
        double weight = 1;
        std::size_t flat = 0;
        for (std::size_t a = 0; a < g.d; ++a) {
            weight *= w[a][idx[a] - lo[a]];
            flat = flat * g.n_cells + idx[a];
        }
        if (weight != 0)
            for (std::size_t c = 0; c < f.components; ++c) out[c] += weight * f.at(flat, c);
        std::size_t a = g.d;
        while (a-- > 0) {
            if (++idx[a] <= hi[a]) break;
            idx[a] = lo[a];
        }
        if (a == static_cast<std::size_t>(-1)) break;
    }
}

}  // namespace

std::vector<double> heat_evaluate(const DriftSpec& b, double t, std::span<const double> x) {
    if (t < 0) throw DomainError("heat_evaluate: negative time");
    const std::size_t d = dimension(b);
    if (x.size() != d) throw DomainError("heat_evaluate: point dimension mismatch");
    std::vector<double> out(components(b), 0.0);
    if (const auto* c = std::get_if<CallableDrift>(&b)) {
        if (t == 0) {
            c->f(x, out);
            return out;
        }
        const auto& rule = hermite_rule();
        const std::size_t n = rule.x.size();
        std::vector<std::size_t> idx(d, 0);
        std::vector<double> y(d), v(out.size());
        while (true) {
            double w = 1;
            for (std::size_t a = 0; a < d; ++a) {
                y[a] = x[a] + std::sqrt(t) * rule.x[idx[a]];
                w *= rule.w[idx[a]];
            }
            c->f(y, v);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * v[k];
            std::size_t a = 0;
            while (a < d && ++idx[a] == n) idx[a++] = 0;
            if (a == d) break;
        }
        return out;
    }
    if (const auto* g = std::get_if<GridDrift>(&b)) {
        grid_point_eval(g->f, t, x, out);
        return out;
    }
    const auto& m = std::get<MeasureDrift>(b);
    if (m.density) grid_point_eval(*m.density, t, x, out);
    if (t == 0) return out;  // atoms are invisible to a point evaluation without smoothing
    std::vector<double> z(d);
    for (const auto& atom : m.atoms) {
        for (std::size_t a = 0; a < d; ++a) z[a] = x[a] - atom.location[a];
        const double k = heat_kernel(z, t);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += atom.weight[c] * k;
    }
    return out;
}

double lp_norm(const GridFunction& f, double p) {
    if (!(p >= 1)) throw DomainError("lp_norm: p must be >= 1");
    const double vol = f.grid.cell_volume();
    double acc = 0;
    for (std::size_t cell = 0; cell < f.grid.total(); ++cell) {
        double s = 0;
        for (std::size_t c = 0; c < f.components; ++c) s += f.at(cell, c) * f.at(cell, c);
        const double a = std::sqrt(s);
        if (std::isinf(p)) acc = std::max(acc, a);
        else acc += std::pow(a, p) * vol;
    }
    return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

double grid_integral(const GridFunction& f, std::size_t component) {
    double s = 0;
    for (std::size_t cell = 0; cell < f.grid.total(); ++cell) s += f.at(cell, component);
    return s * f.grid.cell_volume();
}

void interpolate(const GridFunction& f, std::span<const double> x, std::span<double> out, std::size_t* outside) {
    const SpatialGrid& g = f.grid;
    std::fill(out.begin(), out.end(), 0.0);
    const double h = g.dx();
    std::size_t i0[3];
    double fr[3];
    for (std::size_t a = 0; a < g.d; ++a) {
        if (!(std::abs(x[a]) <= g.L)) {
            if (outside) ++*outside;
            return;
        }
        // clamp within the half cells between the boundary and the outer centres
        const double pos = std::clamp((x[a] + g.L) / h - 0.5, 0.0, static_cast<double>(g.n_cells - 1));
        const auto i = std::min(static_cast<std::size_t>(pos), g.n_cells - 2);
        i0[a] = i;
        fr[a] = pos - static_cast<double>(i);
    }
    const std::size_t corners = std::size_t{1} << g.d;
    for (std::size_t m = 0; m < corners; ++m) {
        double w = 1;
        std::size_t flat = 0;
        for (std::size_t a = 0; a < g.d; ++a) {
            const bool up = (m >> a) & 1u;
            w *= up ? fr[a] : 1.0 - fr[a];
            flat = flat * g.n_cells + i0[a] + (up ? 1 : 0);
        }
        if (w == 0) continue;
        for (std::size_t c = 0; c < f.components; ++c) out[c] += w * f.at(flat, c);
    }
}

std::vector<GridFunction> mollified_sequence(const DriftSpec& b, std::span<const std::size_t> n_list,
                                             const SpatialGrid& grid) {
    std::vector<GridFunction> out;
    for (std::size_t n : n_list) {
        if (n == 0) throw DomainError("mollified_sequence: n must be >= 1");
        out.push_back(heat_mollify(b, 1.0 / static_cast<double>(n), grid));
    }
    return out;
}

}  // namespace rbn::mollify
