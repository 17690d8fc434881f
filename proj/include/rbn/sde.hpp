#pragma once

// dX = b(X) dt + dW^H with singular drifts handled through heat mollification:
// regime classification, Euler solutions against exact fBM noise, drift
// variation statistics and skew fBM.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "rbn/core.hpp"
#include "rbn/fbm.hpp"
#include "rbn/localtime.hpp"
#include "rbn/mollify.hpp"

namespace rbn::sde {

enum class Verdict { weak_existence, counterexample_regime, boundary };
std::string to_string(Verdict v);

struct RegimeClassification {
    Verdict verdict = Verdict::boundary;
    double margin = 0.0;  ///< (1/h - 1) - d/p
    double h = 0.5;
    std::size_t d = 1;
    double p = 1.0;
};

/// Margins within 1e-12 of zero are boundary.
RegimeClassification classify_regime(double h, std::size_t d, double p);

/// Euler solution X together with its noise W and drift part psi = X - x0 - W.
struct SolutionPath {
    fbm::FbmPath x;
    fbm::FbmPath w;
    fbm::FbmPath psi;
    std::size_t outside_evaluations = 0;  ///< grid drift queried off its grid (treated as zero)

    const fbm::TimeGrid& grid() const noexcept { return x.grid; }
    std::size_t dim() const noexcept { return x.dim; }
};

/// x_{i+1} = x_i + b(x_i) dt + dW_i with x_i assembled as x0 + psi_i + w_i,
/// so zero drift reproduces x0 + w bitwise. Grid drifts use multilinear
/// interpolation; measure drifts are refused (mollify them first).
SolutionPath euler_solve(const mollify::DriftSpec& drift, const fbm::FbmPath& w, std::span<const double> x0);
SolutionPath euler_solve(const mollify::GridFunction& drift, const fbm::FbmPath& w, std::span<const double> x0);

struct RegularizedSolution {
    RegimeClassification regime;
    std::vector<std::size_t> n_list;
    std::vector<SolutionPath> solutions;  ///< drift P_{1/n} b per entry of n_list, same noise
    Array2 sup_distance;                  ///< sup_t |X^(n_i) - X^(n_j)|
    /// sup-distances between consecutive levels.
    std::vector<double> consecutive() const;
};

/// Refuses ("regime") unless classify_regime(h, d, p(b)) is weak_existence.
RegularizedSolution regularized_solution(const mollify::DriftSpec& b, std::span<const double> x0,
                                         std::span<const std::size_t> n_list, const fbm::FbmPath& w,
                                         const mollify::SpatialGrid& grid);

struct VariationStatistic {
    double ell = 1.0;
    double s = 0.0, t = 0.0;
    double value = 0.0;
    bool lower_bound = false;  ///< ell > 1: finest-grid value only
};

/// (sum |psi_{i+1} - psi_i|^ell)^{1/ell} over grid steps in [s, t]; Euclidean
/// increments in d > 1. Exact for ell = 1 on grid-adapted partitions.
VariationStatistic drift_variation(const SolutionPath& sol, double s, double t, double ell = 1.0);

/// beta P_{1/n} delta_0 in d = 1, evaluated in closed form.
mollify::CallableDrift skew_drift(double beta, std::size_t n);

/// Solution with drift beta P_{1/n} delta_0. Outside h < 1/2 (d = 1) the
/// existence claim does not apply; `regime_warning` is set and it still runs.
struct SkewResult {
    SolutionPath path;
    bool regime_warning = false;
};
SkewResult skew_fbm(double beta, std::size_t n, const fbm::FbmPath& w, double x0 = 0.0);

/// Effective skew parameter (1 - e^{-2 beta}) / (1 + e^{-2 beta}) at h = 1/2.
double legall_skew(double beta);

/// X_1 of skew Brownian motion from 0: |N(0,1)| with sign +1 w.p. (1 + s)/2.
double skew_bm_terminal(double s, Engine& eng);

/// sup_t |psi_t - sum_atoms w L(t, y) - int L(t, y) rho(y) dy| (d = 1,
/// single-component measures). The field times must be grid times of sol.
double measure_drift_residual(const SolutionPath& sol, const mollify::MeasureDrift& b,
                              const localtime::LocalTimeField& L);

/// Columns t, x, w, psi (x_k, w_k, psi_k in d > 1).
void write_csv(std::ostream& os, const SolutionPath& sol);

}  // namespace rbn::sde
