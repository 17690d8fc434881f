#pragma once

// Gaussian heat-semigroup smoothing of drifts and measures on uniform grids,
// heat-characterized negative Besov norms, and ball-average approximations of
// the Dirac mass.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rbn/core.hpp"

namespace rbn::mollify {

/// Uniform grid of n_cells^d cells on [-L, L]^d. Cell index is row-major with
/// axis 0 slowest.
struct SpatialGrid {
    std::size_t d = 1;
    double L = 1.0;
    std::size_t n_cells = 16;

    SpatialGrid() = default;
    SpatialGrid(std::size_t d_, double L_, std::size_t n_cells_);

    double dx() const noexcept { return 2.0 * L / static_cast<double>(n_cells); }
    double center(std::size_t i) const noexcept { return -L + (static_cast<double>(i) + 0.5) * dx(); }
    std::size_t total() const noexcept;
    double cell_volume() const noexcept;
    /// Multi-index of a flat cell index.
    std::vector<std::size_t> unflatten(std::size_t flat) const;
    bool operator==(const SpatialGrid&) const = default;
};

/// Cell-centred samples of a function R^d -> R^c.
struct GridFunction {
    SpatialGrid grid;
    std::size_t components = 1;
    std::vector<double> values;  ///< total() x components, row-major

    GridFunction() = default;
    GridFunction(const SpatialGrid& g, std::size_t c, double fill = 0.0);

    double& at(std::size_t cell, std::size_t c = 0) { return values[cell * components + c]; }
    double at(std::size_t cell, std::size_t c = 0) const { return values[cell * components + c]; }
};

using PointFunction = std::function<void(std::span<const double> x, std::span<double> out)>;

/// A drift given pointwise. `p` is the declared integrability exponent.
struct CallableDrift {
    std::size_t d = 1;
    std::size_t components = 1;
    PointFunction f;
    double p = std::numeric_limits<double>::infinity();
    std::string label;
};

/// A drift sampled on a grid, declared to lie in L_p.
struct GridDrift {
    GridFunction f;
    double p = std::numeric_limits<double>::infinity();
};

struct Atom {
    std::vector<double> location;
    std::vector<double> weight;  ///< one entry per component
};

/// Finite signed vector measure: weighted atoms plus an optional density.
struct MeasureDrift {
    std::size_t d = 1;
    std::size_t components = 1;
    std::vector<Atom> atoms;
    std::optional<GridFunction> density;
};

using DriftSpec = std::variant<CallableDrift, GridDrift, MeasureDrift>;

std::size_t dimension(const DriftSpec& b);
std::size_t components(const DriftSpec& b);
/// Declared integrability; measures count as p = 1.
double integrability(const DriftSpec& b);
/// sum |w| + int |density| for measures, grid L_1 norm for grid drifts.
double total_variation(const DriftSpec& b);

/// Scalar multiple of a Dirac mass at `at` (d = 1 unless the location says otherwise).
MeasureDrift dirac(std::vector<double> at, double weight = 1.0);

struct BesovIndex {
    double alpha = -0.5;
    double p = 1.0;
};

/// l^{R,x}(z) = 1(|z - x| < R) / (v_d R^d).
struct BallIndicator {
    std::vector<double> center;
    double R = 0.1;

    BallIndicator(std::vector<double> c, double r);
    double normalization() const;
    double operator()(std::span<const double> z) const;
    /// Cell averages over the grid (boundary cells by 16^d subsampling).
    GridFunction on_grid(const SpatialGrid& g) const;
};

/// Volume of the unit ball in R^d.
double unit_ball_volume(std::size_t d);

/// Gaussian density of N(0, t I_d) evaluated at a point.
double heat_kernel(std::span<const double> x, double t);

/// P_t b sampled at cell centres. Refuses (RegimeRefusal "grid_resolution")
/// when dx > sqrt(t)/2. Grid inputs are extended by zero outside their grid.
GridFunction heat_mollify(const DriftSpec& b, double t, const SpatialGrid& grid);
GridFunction heat_mollify(const GridFunction& f, double t);

/// P_t b at one point. Grid data is treated as piecewise constant on cells and
/// integrated exactly against the Gaussian, so t -> 0 recovers the cell value.
/// Callables use tensor Gauss-Hermite quadrature.
std::vector<double> heat_evaluate(const DriftSpec& b, double t, std::span<const double> x);

/// Grid norms: (sum |f|^p dx^d)^{1/p}, max for p = inf; |.| is Euclidean over components.
double lp_norm(const GridFunction& f, double p);
double grid_integral(const GridFunction& f, std::size_t component = 0);

struct BesovEstimate {
    double value = 0.0;
    double argmax_t = 0.0;
    std::vector<double> t_samples;
    std::vector<double> weighted_norms;  ///< t^{-alpha/2} ||P_t f||_p per sample
};

/// sup over t_samples of t^{-alpha/2} ||P_t f||_{L_p}, on the given grid.
BesovEstimate empirical_besov_norm(const DriftSpec& f, const BesovIndex& idx, std::span<const double> t_samples,
                                   const SpatialGrid& grid);

/// n log-spaced samples between lo and hi (inclusive).
std::vector<double> log_spaced(double lo, double hi, std::size_t n);

/// Heat-characterized B^{-eps}_1 distance between l^{R,0} and delta_0.
/// d = 1 uses closed-form smoothing; d = 2 works on a 512^2 grid over [-2,2]^2.
double delta_approx_error(double R, double eps, std::size_t d);

/// P_{1/n} b for each n on the given grid.
std::vector<GridFunction> mollified_sequence(const DriftSpec& b, std::span<const std::size_t> n_list,
                                             const SpatialGrid& grid);

/// Multilinear interpolation between cell centres; points outside the grid
/// return zero and bump `outside` when given.
void interpolate(const GridFunction& f, std::span<const double> x, std::span<double> out,
                 std::size_t* outside = nullptr);

/// Cell centres then values: columns x_1..x_d, f_1..f_c.
void write_csv(std::ostream& os, const GridFunction& f);
GridFunction read_csv(std::istream& is);

}  // namespace rbn::mollify
