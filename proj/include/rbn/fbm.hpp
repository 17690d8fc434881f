#pragma once

// Fractional Brownian motion: Volterra kernel, exact sampling, and the
// transforms between fBM and its driving Brownian motion.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rbn/core.hpp"
#include "rbn/fit.hpp"

namespace rbn::fbm {

/// Hurst index, validated to lie in (0, 1).
class HurstParameter {
public:
    explicit HurstParameter(double h);
    double value() const noexcept { return h_; }
    bool is_brownian() const noexcept { return h_ == 0.5; }
    operator double() const noexcept { return h_; }

private:
    double h_;
};

/// Uniform grid t_i = i * horizon / n_steps on [0, horizon].
struct TimeGrid {
    double horizon = 1.0;
    std::size_t n_steps = 0;

    TimeGrid() = default;
    TimeGrid(double horizon_, std::size_t n_steps_);

    double dt() const noexcept { return horizon / static_cast<double>(n_steps); }
    double t(std::size_t i) const noexcept { return horizon * static_cast<double>(i) / static_cast<double>(n_steps); }
    std::size_t size() const noexcept { return n_steps + 1; }
    /// Index of a grid-aligned time; throws if `time` is not on the grid.
    std::size_t index_of(double time) const;
    bool operator==(const TimeGrid&) const = default;
};

/// A sampled d-dimensional path; values are row-major with shape (n_steps+1) x dim.
struct FbmPath {
    TimeGrid grid;
    std::size_t dim = 1;
    std::vector<double> values;
    double h = 0.5;
    std::uint64_t seed = 0;

    double operator()(std::size_t i, std::size_t k = 0) const { return values[i * dim + k]; }
    double& operator()(std::size_t i, std::size_t k = 0) { return values[i * dim + k]; }
    std::span<const double> point(std::size_t i) const { return {values.data() + i * dim, dim}; }
    std::vector<double> coordinate(std::size_t k) const;
    double sup_norm() const;
};

FbmPath zero_path(const TimeGrid& grid, std::size_t dim, double h);

// ---------------------------------------------------------------------------
// Kernel

/// Normalizing constant C(H) of the Volterra kernel, fixed so that
/// int_0^t K_H(t,s)^2 ds = t^{2H}. Computed by quadrature once per H.
double kernel_constant(HurstParameter h);

/// K_H(t, s) for 0 < s < t. Equals 1 for H = 1/2.
double kernel_value(HurstParameter h, double t, double s);

/// Unnormalized shape k(x) = K_H(1, x) / C(H) for x in (0, 1).
double kernel_shape(HurstParameter h, double x);

/// Cov(W_s, W_t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
double fbm_covariance(HurstParameter h, double s, double t);

/// sigma^2(u, t) = int_u^t K_H(t, r)^2 dr, the variance of W_t given F_u.
double conditional_variance(HurstParameter h, double u, double t);

/// Discretized kernel: entry (i, j), j < i, is the average of K_H(t_i, .) over
/// the cell [t_j, t_{j+1}], so that sum_j K(i,j) (B_{j+1} - B_j) is the exact
/// Volterra integral of the piecewise-linear interpolant of B.
class VolterraKernelMatrix {
public:
    VolterraKernelMatrix(HurstParameter h, const TimeGrid& grid);

    double operator()(std::size_t i, std::size_t j) const { return packed_[offset(i) + j]; }
    /// Entries K(i, 0..i-1).
    std::span<const double> row(std::size_t i) const { return {packed_.data() + offset(i), i}; }
    HurstParameter hurst() const noexcept { return h_; }
    const TimeGrid& grid() const noexcept { return grid_; }

    /// Largest c with K(i,j) >= c (t_i - t_j)^{H-1/2} over all stored entries
    /// (lower-bound diagnostic, evaluated on the left cell edge).
    double lower_bound_constant() const;

private:
    static std::size_t offset(std::size_t i) { return i * (i - 1) / 2; }
    HurstParameter h_;
    TimeGrid grid_;
    std::vector<double> packed_;
};

/// Cell integral of the kernel shape, int_a^b k(x) dx for 0 <= a < b <= 1,
/// using a tabulated smooth factor with explicit endpoint singularities.
class KernelShapeTable {
public:
    explicit KernelShapeTable(HurstParameter h, std::size_t nodes = 4096);
    double shape(double x) const;
    double cell_integral(double a, double b) const;
    double shape_squared_integral(double a, double b) const;

private:
    double smooth_factor(double x) const;
    HurstParameter h_;
    double left_power_;   // k ~ x^{-left_power_} near 0
    double right_power_;  // k ~ (1-x)^{right_power_} near 1
    std::vector<double> table_;
};

// ---------------------------------------------------------------------------
// Sampling

enum class SamplerMethod { exact_brownian, circulant_embedding, dense_cholesky };
std::string to_string(SamplerMethod m);

/// Exact sampler for fBM on a uniform grid. Uses circulant embedding of the
/// fractional Gaussian noise and falls back to a dense Cholesky factor when
/// the embedding is not nonnegative-definite.
class FbmSampler {
public:
    FbmSampler(HurstParameter h, const TimeGrid& grid);
    ~FbmSampler();
    FbmSampler(const FbmSampler&) = delete;
    FbmSampler& operator=(const FbmSampler&) = delete;

    /// Path number `path_index` of the ensemble seeded by `seed`.
    FbmPath sample(std::size_t dim, std::uint64_t seed, std::uint64_t path_index) const;
    /// Increments of one coordinate drawn from `eng` (length n_steps).
    void sample_increments(Engine& eng, std::span<double> out) const;
    SamplerMethod method() const noexcept { return method_; }
    HurstParameter hurst() const noexcept { return h_; }
    const TimeGrid& grid() const noexcept { return grid_; }

private:
    struct Fft;
    HurstParameter h_;
    TimeGrid grid_;
    SamplerMethod method_;
    std::vector<double> sqrt_eigen_;  // circulant
    Array2 cholesky_;                 // fallback
    std::unique_ptr<Fft> fft_;
};

/// n_paths independent d-dimensional fBM paths; path p is seeded from (seed, p)
/// so the ensemble is identical for any thread count.
std::vector<FbmPath> sample_fbm(HurstParameter h, const TimeGrid& grid, std::size_t n_paths,
                                std::size_t dim, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Transforms

/// W^H_{t_i} = sum_j K(i,j) (B_{j+1} - B_j). `b` must be a Brownian path (h = 1/2).
FbmPath volterra_forward(const FbmPath& b, HurstParameter target,
                         const VolterraKernelMatrix* kernel = nullptr);

struct InversePrecision {
    std::size_t refine = 1;  ///< the operator chain runs on a grid refined by this factor
};

struct InverseTransformResult {
    FbmPath brownian;
    double roundtrip_sup_error = 0.0;  ///< sup_t |volterra_forward(brownian) - w|
    double path_sup_norm = 0.0;
    double relative_error() const { return path_sup_norm > 0 ? roundtrip_sup_error / path_sup_norm : 0.0; }
};

/// Recovers the driving Brownian motion B from W^H through the chain
/// Pi^{H-1/2} I^{1/2-H} Pi^{1/2-H}, rescaled to the unit-variance kernel.
InverseTransformResult inverse_transform(const FbmPath& w, const InversePrecision& precision = {},
                                         const VolterraKernelMatrix* kernel = nullptr);

/// Weighted-increment operator Pi^a f(t) = t^a f(t) - a int_0^t s^{a-1} f(s) ds
/// evaluated exactly for the piecewise-linear interpolant of f on the grid.
std::vector<double> weighted_increment_operator(std::span<const double> f, const TimeGrid& grid, double a);

/// Riemann-Liouville operator I^a for a > -1 (a <= 0 taken as d/dt I^{a+1}),
/// exact for the piecewise-linear interpolant of f with f(0) = 0.
std::vector<double> fractional_integral(std::span<const double> f, const TimeGrid& grid, double a);

// ---------------------------------------------------------------------------
// Regularity

/// Slope of log(median |increment|) against log(lag * dt) over the given lags (in steps).
xlab::ExponentFit holder_exponent_estimate(const FbmPath& path, std::span<const std::size_t> lags);
xlab::ExponentFit holder_exponent_estimate(std::span<const FbmPath> paths, std::span<const std::size_t> lags);

// ---------------------------------------------------------------------------
// Serialization

/// CSV with header comments carrying h, seed, n_steps and horizon; columns t, x_1..x_d.
void write_csv(std::ostream& os, const FbmPath& path);
FbmPath read_csv(std::istream& is);
void write_binary(std::ostream& os, const FbmPath& path);
FbmPath read_binary(std::istream& is);

}  // namespace rbn::fbm
