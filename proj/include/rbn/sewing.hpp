#pragma once

// Conditional-Gaussian germs E^s int_s^t f(W_r) dr, dyadic sewing sums with
// defect traces, moment scaling of additive functionals of fBM, and Young
// integrals.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "rbn/core.hpp"
#include "rbn/fbm.hpp"
#include "rbn/fit.hpp"
#include "rbn/mollify.hpp"

namespace rbn::sewing {

/// (variance, x) -> P_variance f(x) for a scalar f on R.
using HeatFlow = std::function<double(double, double)>;

/// Heat flow of a drift through mollify::heat_evaluate.
HeatFlow heat_flow(const mollify::DriftSpec& f);
/// Closed-form flow of weight * N(0, c) density: weight * p_{c + v}(x).
HeatFlow gaussian_bump_flow(double c, double weight = 1.0);

/// Conditional variances below this are treated as zero (no smoothing).
inline constexpr double kVarianceFloor = 1e-14;

/// E^u f(V_{s,t}) = P_{sigma^2(u,t)} f(E^u W_t - E^s W_t) with grid indices
/// s <= u <= t; dB are the Brownian increments driving W through K.
std::vector<double> conditional_germ_mean(const mollify::DriftSpec& f, const fbm::VolterraKernelMatrix& K,
                                          std::span<const double> dB, std::size_t s, std::size_t u, std::size_t t);

/// E^{t_u} W_{t_r} = sum_{j < u} K(r, j) dB_j.
double conditional_mean(const fbm::VolterraKernelMatrix& K, std::span<const double> dB, std::size_t u, std::size_t r);

struct DyadicSum {
    int k = 0;
    double s = 0.0, t = 0.0;
    double value = 0.0;   ///< A^k_{s,t}
    double defect = 0.0;  ///< sum of midpoint defects, equal to A^k - A^{k+1}; 0 at the last level
};

/// Germ (s, t) -> A_{s,t}.
using Germ = std::function<double(double, double)>;

/// Level-k sum over the dyadic partition of [s, t].
DyadicSum dyadic_sewing_sum(const Germ& germ, double s, double t, int k);
/// Levels 0..k_max with defects sum_i (A_{a,t} - A_{a,m} - A_{m,b}) per level.
std::vector<DyadicSum> dyadic_trace(const Germ& germ, double s, double t, int k_max);

/// Germs A_{s,t} = E^s int_s^t f(W_r) dr (trapezoid in r) on the dyadic
/// partitions of [0, T] down to level k_max. Conditional variances are
/// cached once; conditional means are rebuilt per path.
class DyadicGermEngine {
public:
    DyadicGermEngine(fbm::HurstParameter h, const fbm::TimeGrid& grid, int k_max, HeatFlow flow);

    const fbm::VolterraKernelMatrix& kernel() const noexcept { return *kernel_; }
    int k_max() const noexcept { return k_max_; }

    /// Trace for one path given its Brownian increments (length n_steps).
    std::vector<DyadicSum> trace(std::span<const double> dB) const;
    /// Generic germ for the same path (any grid-aligned s < t), uncached.
    Germ germ(std::span<const double> dB) const;

private:
    fbm::HurstParameter h_;
    fbm::TimeGrid grid_;
    int k_max_;
    HeatFlow flow_;
    std::shared_ptr<const fbm::VolterraKernelMatrix> kernel_;
    Array2 sigma2_;  ///< (k_max + 1) x (n_steps + 1): sigma^2(lower level-k node below r, r)
};

struct SewingCondition {
    double alpha = -0.5;
    double q = 2.0;
    std::size_t d = 1;
};

/// Refuses ("sewing_condition") unless alpha > -1/(2h) and alpha - d/q > -1/h.
void check_sewing_condition(double h, const SewingCondition& c);
/// 1 + alpha h - h d / q.
double predicted_moment_exponent(double h, const SewingCondition& c);

struct MomentScaling {
    xlab::ExponentFit fit;
    std::vector<double> horizons;
    std::vector<double> norms;  ///< ||int_0^T f(W_r) dr||_{L_m}
    double prediction = 0.0;
};

struct MomentScalingConfig {
    double h = 0.3;
    double m = 2.0;
    std::vector<double> horizons;  ///< grid points of [0, max horizon]
    std::size_t n_paths = 1000;
    std::size_t n_steps = 4096;
    std::uint64_t seed = 1;
    SewingCondition condition;
};

/// Ensemble L_m norms of int_0^T f(W_r) dr (trapezoid) and their log-log fit
/// with a bootstrap interval.
MomentScaling integral_moment_scaling(const std::function<double(double)>& f, const MomentScalingConfig& cfg);

struct YoungIntegral {
    std::vector<double> values;       ///< cumulative left-point sums, values[0] = 0
    double refinement_error = 0.0;    ///< max |I_N - I_{N/2}| over common grid points
};

/// int Y dX by left-point Riemann-Stieltjes sums. Refuses ("young_condition")
/// unless 1/p + 1/q > 1 (declared, not certified).
YoungIntegral young_integral(std::span<const double> y, std::span<const double> x, double p, double q);

/// Euler scheme for Y_t = y0 + int_0^t Y dX.
std::vector<double> young_linear_ode(std::span<const double> x, double y0);

struct YoungDemo {
    double sup_zero = 0.0;           ///< sup |Y| from Y_0 = 0
    std::vector<double> etas;
    std::vector<double> sup_perturbed;  ///< sup |Y| from Y_0 = eta
    std::size_t n_steps = 0;
};

/// dY = Y dX driven by an fBM path with Y_0 = 0, and the perturbations Y_0 = eta.
YoungDemo young_uniqueness_demo(double h, std::size_t n_steps, std::uint64_t seed, std::span<const double> etas);

/// Columns k, value, defect.
void write_csv(std::ostream& os, std::span<const DyadicSum> trace);

}  // namespace rbn::sewing
