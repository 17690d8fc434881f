#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rbn/core.hpp"

namespace rbn::xlab {

/// Result of a log-log scaling regression  log(stat) = intercept + slope * log(scale).
struct ExponentFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double ci_half_width = 0.0;      ///< 95%; bootstrap when an ensemble was supplied, else OLS
    double ols_ci_half_width = 0.0;  ///< 95% Student-t interval of the OLS slope
    std::size_t n_points = 0;
    bool bootstrap = false;
};

/// Statistic reducing an ensemble (one value per member) to a positive number.
using EnsembleStatistic = std::function<double(std::span<const double>)>;

/// OLS fit on logs. Requires >= 4 points with strictly positive entries.
ExponentFit fit_scaling_exponent(std::span<const double> scales, std::span<const double> stats);

/// Fit on stat(samples.row(k)) per scale, with a bootstrap confidence interval
/// obtained by resampling ensemble members jointly across scales.
/// `samples` has one row per scale and one column per ensemble member.
ExponentFit fit_scaling_exponent(std::span<const double> scales, const Array2& samples,
                                 const EnsembleStatistic& stat, std::size_t resamples = 200,
                                 std::uint64_t seed = 0);

/// |slope - prediction| <= max(ci_half_width, tolerance).
bool within_gate(const ExponentFit& fit, double prediction, double tolerance);

double mean(std::span<const double> v);
double median(std::vector<double> v);
/// Mean after discarding `trim` of the mass in each tail.
double trimmed_mean(std::vector<double> v, double trim = 0.1);
/// (mean |v|^m)^{1/m}: empirical L_m(Omega) norm.
double power_mean(std::span<const double> v, double m);
double quantile(std::vector<double> v, double q);

std::string to_json(const ExponentFit& fit);

}  // namespace rbn::xlab
