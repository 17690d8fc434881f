#pragma once

// Occupation measures and bandwidth local-time estimators for sampled paths,
// with time and space Hölder-exponent regressions over path ensembles.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rbn/core.hpp"
#include "rbn/fbm.hpp"
#include "rbn/fit.hpp"
#include "rbn/mollify.hpp"

namespace rbn::localtime {

/// Time spent by the path in each grid cell up to time t.
struct OccupationMeasure {
    double t = 0.0;
    mollify::SpatialGrid grid;
    std::vector<double> mass;  ///< one entry per cell
    double total() const;
};

/// Occupation of the piecewise-linear interpolant of `path` on [0, t].
/// In d = 1 the time of each segment is split exactly across the cells it
/// crosses; in d > 1 each segment is split at its cell-boundary crossings.
/// The grid is enlarged (same dx) when the path leaves it.
OccupationMeasure occupation_measure(const fbm::FbmPath& path, double t, const mollify::SpatialGrid& grid);

/// L(t, x) for a list of times and spatial points, ball bandwidth R.
struct LocalTimeField {
    std::vector<double> times;
    Array2 points;  ///< n_points x d
    Array2 values;  ///< n_times x n_points
    double R = 0.0;
    std::uint64_t path_id = 0;

    std::size_t dim() const noexcept { return points.cols; }
    /// Linear interpolation in x (d = 1) at time index k.
    double at(std::size_t k, double x) const;
};

/// Default bandwidth dx * sqrt(n_cells) / 8.
double default_bandwidth(const mollify::SpatialGrid& grid);

/// L(t,x) = (1/(v_d R^d)) int_0^t 1(|X_s - x| < R) ds over the linear
/// interpolant, evaluated exactly, at every cell centre of `grid`.
/// Refuses ("local_time_regime") when h d >= 1 and throws DomainError when
/// R < 2 dx or a time lies outside the path grid.
LocalTimeField local_time(const fbm::FbmPath& path, double R, const mollify::SpatialGrid& grid,
                          std::span<const double> t_list);
/// Same at explicit points (n_points x d); no grid-resolution check.
LocalTimeField local_time_at(const fbm::FbmPath& path, double R, const Array2& points, std::span<const double> t_list);

/// Regression of log trimmed-mean |L(t) - L(s)| at point `point` against
/// log(t - s) over the given (s, t) pairs, which must be field times.
/// Bootstrap CI over the ensemble.
xlab::ExponentFit time_holder_exponent(std::span<const LocalTimeField> fields, std::size_t point,
                                       std::span<const std::pair<double, double>> intervals,
                                       std::uint64_t seed = 0);
/// Intervals [0, 2^-k] for k in [k_min, k_max].
std::vector<std::pair<double, double>> dyadic_intervals(int k_min, int k_max);

/// Regression of log trimmed-mean |L(t, x + r/2) - L(t, x - r/2)| against
/// log r (d = 1, linear interpolation between field points).
xlab::ExponentFit space_holder_exponent(std::span<const LocalTimeField> fields, double t, double x,
                                        std::span<const double> offsets, std::uint64_t seed = 0);

/// Local time of w + psi. Refuses ("perturbed_local_time_regime") unless h (d + 1) < 1.
LocalTimeField perturbed_local_time(const fbm::FbmPath& w, const fbm::FbmPath& psi, double R,
                                    const mollify::SpatialGrid& grid, std::span<const double> t_list);

struct SpatialGapReport {
    xlab::ExponentFit straddle;  ///< window centred at x_straddle
    xlab::ExponentFit away;      ///< window centred at x_away
    double min_value = 0.0;      ///< smallest path value seen
    double gap() const { return away.slope - straddle.slope; }
};

/// Spatial exponents of the local time at t = 1 over two windows.
SpatialGapReport spatial_gap(std::span<const fbm::FbmPath> paths, double x_straddle, double x_away,
                             std::span<const double> offsets, double R, const mollify::SpatialGrid& grid,
                             std::uint64_t seed = 0);

struct ReflectedTestConfig {
    std::size_t n_paths = 200;
    std::size_t n_steps = 1 << 14;
    std::uint64_t seed = 1;
};

/// |B| for standard Brownian B: spatial exponent straddling 0 versus away from 0.
SpatialGapReport reflected_bm_negative_test(const ReflectedTestConfig& cfg);

/// Shared window geometry for the spatial gap studies.
struct GapGeometry {
    mollify::SpatialGrid grid;
    double R;
    std::vector<double> offsets;
};
GapGeometry default_gap_geometry();

/// Columns t, x, L (d = 1) or t, x_1..x_d, L.
void write_csv(std::ostream& os, const LocalTimeField& field);

}  // namespace rbn::localtime
