#include "rbn/localtime.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace rbn::localtime {

namespace {

std::size_t cell_of(const mollify::SpatialGrid& g, double x) {
    const double p = std::floor((x + g.L) / g.dx());
    if (p <= 0) return 0;
    return std::min(g.n_cells - 1, static_cast<std::size_t>(p));
}

void check_time(const fbm::FbmPath& path, double t, const char* who) {
    if (!(t >= 0 && t <= path.grid.horizon * (1 + 1e-12)))
        throw DomainError(std::string(who) + ": time outside the path grid");
}

// Calls seg(a, b, duration) for the linear pieces of the path on [t0, t1].
template <class F>
void for_segments(const fbm::FbmPath& path, double t0, double t1, F&& seg) {
    if (t1 <= t0) return;
    const auto& g = path.grid;
    const std::size_t d = path.dim;
    std::vector<double> a(d), b(d);
    const double dt = g.dt();
    auto first = static_cast<std::size_t>(std::floor(t0 / dt));
    first = std::min(first, g.n_steps - 1);
    for (std::size_t i = first; i < g.n_steps; ++i) {
        const double s0 = std::max(t0, g.t(i)), s1 = std::min(t1, g.t(i + 1));
        if (s1 <= s0) {
            if (g.t(i) >= t1) break;
            continue;
        }
        const double f0 = (s0 - g.t(i)) / dt, f1 = (s1 - g.t(i)) / dt;
        for (std::size_t k = 0; k < d; ++k) {
            const double x0 = path(i, k), dx = path(i + 1, k) - x0;
            a[k] = f0 == 0.0 ? x0 : x0 + f0 * dx;
            b[k] = f1 == 1.0 ? path(i + 1, k) : x0 + f1 * dx;
        }
        seg(std::span<const double>(a), std::span<const double>(b), s1 - s0);
    }
}

// Time fraction of the segment a -> b spent strictly inside the ball B(x, R).
double fraction_in_ball(std::span<const double> a, std::span<const double> b, std::span<const double> x, double R) {
    if (a.size() == 1) {
        const double lo = std::min(a[0], b[0]), hi = std::max(a[0], b[0]);
        if (hi == lo) return std::abs(a[0] - x[0]) < R ? 1.0 : 0.0;
        const double o = std::min(hi, x[0] + R) - std::max(lo, x[0] - R);
        return o > 0 ? o / (hi - lo) : 0.0;
    }
    double A = 0, B = 0, C = -R * R;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double dk = b[k] - a[k], ek = a[k] - x[k];
        A += dk * dk;
        B += 2 * ek * dk;
        C += ek * ek;
    }
    if (A == 0) return C < 0 ? 1.0 : 0.0;
    const double disc = B * B - 4 * A * C;
    if (disc <= 0) return 0.0;
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (B + std::copysign(sq, B));
    double r1 = q / A, r2 = q != 0 ? C / q : -B / A;
    if (r1 > r2) std::swap(r1, r2);
    const double o = std::min(1.0, r2) - std::max(0.0, r1);
    return o > 0 ? o : 0.0;
}

mollify::SpatialGrid covering_grid(const fbm::FbmPath& path, double t, const mollify::SpatialGrid& grid) {
    double reach = 0;
    const std::size_t last = std::min(path.grid.n_steps, static_cast<std::size_t>(std::ceil(t / path.grid.dt())));
    for (std::size_t i = 0; i <= last; ++i)
        for (std::size_t k = 0; k < path.dim; ++k) reach = std::max(reach, std::abs(path(i, k)));
    if (reach <= grid.L) return grid;
    const double dx = grid.dx();
    const auto extra = static_cast<std::size_t>(std::ceil((reach - grid.L) / dx)) + 1;
    return mollify::SpatialGrid(grid.d, grid.L + extra * dx, grid.n_cells + 2 * extra);
}

// Accumulates occupation of balls around candidate points over time checkpoints.
template <class Candidates>
LocalTimeField sweep(const fbm::FbmPath& path, double R, Array2 points, std::span<const double> t_list,
                     Candidates&& candidates) {
    if (!(R > 0)) throw DomainError("local_time: bandwidth must be positive");
    if (t_list.empty()) throw DomainError("local_time: empty time list");
    if (!std::is_sorted(t_list.begin(), t_list.end())) throw DomainError("local_time: times must be sorted");
    for (double t : t_list) check_time(path, t, "local_time");
    LocalTimeField field;
    field.times.assign(t_list.begin(), t_list.end());
    field.R = R;
    field.path_id = path.seed;
    const std::size_t np = points.rows;
    field.values = Array2(t_list.size(), np);
    std::vector<double> acc(np, 0.0);
    const double norm = 1.0 / (mollify::unit_ball_volume(path.dim) * std::pow(R, static_cast<double>(path.dim)));
    double prev = 0;
    for (std::size_t k = 0; k < t_list.size(); ++k) {
        const double tk = std::min(t_list[k], path.grid.horizon);
        for_segments(path, prev, tk, [&](std::span<const double> a, std::span<const double> b, double tau) {
            candidates(a, b, [&](std::size_t p) {
                const double f = fraction_in_ball(a, b, points.row(p), R);
                if (f > 0) acc[p] += f * tau;
            });
        });
        prev = std::max(prev, tk);
        for (std::size_t p = 0; p < np; ++p) field.values(k, p) = acc[p] * norm;
    }
    field.points = std::move(points);
    return field;
}

void check_regime(const fbm::FbmPath& path) {
    if (path.h * static_cast<double>(path.dim) >= 1.0) {
        std::ostringstream os;
        os << "local_time: requires h d < 1 (h=" << path.h << ", d=" << path.dim << ")";
        throw RegimeRefusal("local_time_regime", os.str());
    }
}

}  // namespace

double OccupationMeasure::total() const {
    double s = 0;
    for (double m : mass) s += m;
    return s;
}

OccupationMeasure occupation_measure(const fbm::FbmPath& path, double t, const mollify::SpatialGrid& grid) {
    if (grid.d != path.dim) throw DomainError("occupation_measure: grid and path dimensions differ");
    check_time(path, t, "occupation_measure");
    OccupationMeasure occ;
    occ.t = t;
    occ.grid = covering_grid(path, t, grid);
    const auto& g = occ.grid;
    occ.mass.assign(g.total(), 0.0);
    const double dx = g.dx();
    const std::size_t d = path.dim;
    std::vector<double> mid(d), cuts;
    for_segments(path, 0.0, std::min(t, path.grid.horizon), [&](std::span<const double> a, std::span<const double> b,
                                                                 double tau) {
        // parameters in (0,1) where some coordinate crosses a cell edge
        cuts.assign({0.0, 1.0});
        for (std::size_t k = 0; k < d; ++k) {
            if (a[k] == b[k]) continue;
            const double lo = std::min(a[k], b[k]), hi = std::max(a[k], b[k]);
            for (double e = std::ceil((lo + g.L) / dx); -g.L + e * dx < hi; e += 1.0) {
                const double s = (-g.L + e * dx - a[k]) / (b[k] - a[k]);
                if (s > 0 && s < 1) cuts.push_back(s);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
            const double w = cuts[j + 1] - cuts[j];
            if (w <= 0) continue;
            const double sm = 0.5 * (cuts[j] + cuts[j + 1]);
            std::size_t flat = 0;
            for (std::size_t k = 0; k < d; ++k) flat = flat * g.n_cells + cell_of(g, a[k] + sm * (b[k] - a[k]));
            occ.mass[flat] += w * tau;
        }
    });
    return occ;
}

double LocalTimeField::at(std::size_t k, double x) const {
    if (dim() != 1) throw DomainError("LocalTimeField::at: only d = 1");
    const std::size_t n = points.rows;
    if (n == 0 || x < points(0, 0) || x > points(n - 1, 0)) throw DomainError("LocalTimeField::at: x outside points");
    if (n == 1) return values(k, 0);
    const auto& xs = points.data;  // d = 1: contiguous, ascending
    const auto it = std::lower_bound(xs.begin() + 1, xs.end() - 1, x);
    const auto hi = static_cast<std::size_t>(it - xs.begin());
    const double x0 = points(hi - 1, 0), x1 = points(hi, 0);
    const double f = (x - x0) / (x1 - x0);
    return values(k, hi - 1) + f * (values(k, hi) - values(k, hi - 1));
}

double default_bandwidth(const mollify::SpatialGrid& grid) {
    return grid.dx() * std::sqrt(static_cast<double>(grid.n_cells)) / 8.0;
}

LocalTimeField local_time(const fbm::FbmPath& path, double R, const mollify::SpatialGrid& grid,
                          std::span<const double> t_list) {
    if (grid.d != path.dim) throw DomainError("local_time: grid and path dimensions differ");
    check_regime(path);
    if (R < 2 * grid.dx() * (1 - 1e-12)) throw DomainError("local_time: bandwidth below grid resolution (R < 2 dx)");
    const std::size_t d = grid.d, n = grid.n_cells;
    Array2 pts(grid.total(), d);
    for (std::size_t c = 0; c < grid.total(); ++c) {
        const auto idx = grid.unflatten(c);
        for (std::size_t k = 0; k < d; ++k) pts(c, k) = grid.center(idx[k]);
    }
    const double dx = grid.dx();
    std::vector<std::size_t> lo(d), hi(d), idx(d);
    auto candidates = [&](std::span<const double> a, std::span<const double> b, auto&& visit) {
        for (std::size_t k = 0; k < d; ++k) {
            const double l = std::min(a[k], b[k]) - R, h = std::max(a[k], b[k]) + R;
            const double il = std::ceil((l + grid.L) / dx - 0.5), ih = std::floor((h + grid.L) / dx - 0.5);
            if (ih < 0 || il > static_cast<double>(n - 1) || il > ih) return;
            lo[k] = static_cast<std::size_t>(std::max(0.0, il));
            hi[k] = static_cast<std::size_t>(std::min(static_cast<double>(n - 1), ih));
        }
        idx = lo;
        while (true) {
            std::size_t flat = 0;
            for (std::size_t k = 0; k < d; ++k) flat = flat * n + idx[k];
            visit(flat);
            std::size_t k = d;
            while (k > 0) {
                --k;
                if (++idx[k] <= hi[k]) break;
                idx[k] = lo[k];
                if (k == 0) return;
            }
        }
    };
    return sweep(path, R, std::move(pts), t_list, candidates);
}

LocalTimeField local_time_at(const fbm::FbmPath& path, double R, const Array2& points, std::span<const double> t_list) {
    if (points.cols != path.dim) throw DomainError("local_time_at: point dimension differs from path");
    check_regime(path);
    auto all = [&](std::span<const double>, std::span<const double>, auto&& visit) {
        for (std::size_t p = 0; p < points.rows; ++p) visit(p);
    };
    return sweep(path, R, points, t_list, all);
}

std::vector<std::pair<double, double>> dyadic_intervals(int k_min, int k_max) {
    if (k_max < k_min) throw DomainError("dyadic_intervals: empty range");
    std::vector<std::pair<double, double>> out;
    for (int k = k_min; k <= k_max; ++k) out.emplace_back(0.0, std::ldexp(1.0, -k));
    return out;
}

namespace {

std::size_t time_index(const LocalTimeField& f, double t) {
    for (std::size_t k = 0; k < f.times.size(); ++k)
        if (std::abs(f.times[k] - t) <= 1e-12 * std::max(1.0, t)) return k;
    throw DomainError("local-time field lacks the requested time");
}

xlab::ExponentFit trimmed_fit(const std::vector<double>& scales, const Array2& samples, std::uint64_t seed) {
    for (std::size_t r = 0; r < samples.rows; ++r) {
        const auto row = samples.row(r);
        if (xlab::trimmed_mean(std::vector<double>(row.begin(), row.end()), 0.1) <= 0)
            throw NumericalFailure("degenerate local-time field: zero increments at some scale");
    }
    const xlab::EnsembleStatistic stat = [](std::span<const double> v) {
        return xlab::trimmed_mean(std::vector<double>(v.begin(), v.end()), 0.1);
    };
    return xlab::fit_scaling_exponent(scales, samples, stat, 200, seed);
}

}  // namespace

xlab::ExponentFit time_holder_exponent(std::span<const LocalTimeField> fields, std::size_t point,
                                       std::span<const std::pair<double, double>> intervals, std::uint64_t seed) {
    if (intervals.size() < 4) throw DomainError("time_holder_exponent: need at least 4 scales");
    if (fields.empty()) throw DomainError("time_holder_exponent: empty ensemble");
    std::vector<double> scales;
    Array2 samples(intervals.size(), fields.size());
    for (std::size_t r = 0; r < intervals.size(); ++r) {
        const auto [s, t] = intervals[r];
        if (!(t > s)) throw DomainError("time_holder_exponent: interval with t <= s");
        scales.push_back(t - s);
        for (std::size_t m = 0; m < fields.size(); ++m) {
            const auto& f = fields[m];
            if (point >= f.points.rows) throw DomainError("time_holder_exponent: point index out of range");
            samples(r, m) = std::abs(f.values(time_index(f, t), point) - f.values(time_index(f, s), point));
        }
    }
    return trimmed_fit(scales, samples, seed);
}

xlab::ExponentFit space_holder_exponent(std::span<const LocalTimeField> fields, double t, double x,
                                        std::span<const double> offsets, std::uint64_t seed) {
    if (offsets.size() < 4) throw DomainError("space_holder_exponent: need at least 4 offsets");
    if (fields.empty()) throw DomainError("space_holder_exponent: empty ensemble");
    std::vector<double> scales(offsets.begin(), offsets.end());
    Array2 samples(offsets.size(), fields.size());
    for (std::size_t m = 0; m < fields.size(); ++m) {
        const std::size_t k = time_index(fields[m], t);
        for (std::size_t r = 0; r < offsets.size(); ++r)
            samples(r, m) = std::abs(fields[m].at(k, x + offsets[r] / 2) - fields[m].at(k, x - offsets[r] / 2));
    }
    return trimmed_fit(scales, samples, seed);
}

LocalTimeField perturbed_local_time(const fbm::FbmPath& w, const fbm::FbmPath& psi, double R,
                                    const mollify::SpatialGrid& grid, std::span<const double> t_list) {
    if (!(w.grid == psi.grid) || w.dim != psi.dim) throw DomainError("perturbed_local_time: w and psi differ in shape");
    if (w.h * static_cast<double>(w.dim + 1) >= 1.0) {
        std::ostringstream os;
        os << "perturbed_local_time: requires h (d + 1) < 1 (h=" << w.h << ", d=" << w.dim << ")";
        throw RegimeRefusal("perturbed_local_time_regime", os.str());
    }
    fbm::FbmPath x = w;
    for (std::size_t i = 0; i < x.values.size(); ++i) x.values[i] += psi.values[i];
    return local_time(x, R, grid, t_list);
}

SpatialGapReport spatial_gap(std::span<const fbm::FbmPath> paths, double x_straddle, double x_away,
                             std::span<const double> offsets, double R, const mollify::SpatialGrid& grid,
                             std::uint64_t seed) {
    if (paths.empty()) throw DomainError("spatial_gap: empty ensemble");
    const double horizon = paths.front().grid.horizon;
    const std::vector<double> ts{horizon};
    std::vector<LocalTimeField> fields(paths.size());
    parallel_for(paths.size(), [&](std::size_t m) { fields[m] = local_time(paths[m], R, grid, ts); });
    SpatialGapReport rep;
    rep.min_value = INFINITY;
    for (const auto& p : paths)
        for (double v : p.values) rep.min_value = std::min(rep.min_value, v);
    rep.straddle = space_holder_exponent(fields, horizon, x_straddle, offsets, seed);
    rep.away = space_holder_exponent(fields, horizon, x_away, offsets, seed + 1);
    return rep;
}

GapGeometry default_gap_geometry() {
    GapGeometry g{mollify::SpatialGrid(1, 4.0, 2048), std::ldexp(1.0, -7), {}};
    for (int k = 5; k >= 2; --k) g.offsets.push_back(std::ldexp(1.0, -k));
    return g;
}

SpatialGapReport reflected_bm_negative_test(const ReflectedTestConfig& cfg) {
    const fbm::TimeGrid tg(1.0, cfg.n_steps);
    auto paths = fbm::sample_fbm(fbm::HurstParameter(0.5), tg, cfg.n_paths, 1, cfg.seed);
    for (auto& p : paths)
        for (double& v : p.values) v = std::abs(v);
    const auto geo = default_gap_geometry();
    return spatial_gap(paths, 0.0, 0.5, geo.offsets, geo.R, geo.grid, cfg.seed);
}

void write_csv(std::ostream& os, const LocalTimeField& field) {
    os.precision(17);
    os << "# kind=LocalTimeField R=" << field.R << " path_id=" << field.path_id << " d=" << field.dim() << '\n';
    os << 't';
    if (field.dim() == 1) os << ",x";
    else
        for (std::size_t k = 0; k < field.dim(); ++k) os << ",x_" << (k + 1);
    os << ",L\n";
    for (std::size_t i = 0; i < field.times.size(); ++i)
        for (std::size_t p = 0; p < field.points.rows; ++p) {
            os << field.times[i];
            for (std::size_t k = 0; k < field.dim(); ++k) os << ',' << field.points(p, k);
            os << ',' << field.values(i, p) << '\n';
        }
}

}  // namespace rbn::localtime
