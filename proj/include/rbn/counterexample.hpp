#pragma once

// Deterministic equation X^i = -int sign(X^i)|X|^-alpha 1(|X|<1) ds + f^i with
// a Holder forcing f: Euler solutions with a singularity floor, the escape
// statistic along excursions from 0 to level eps, and bad L_p drifts.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rbn/core.hpp"
#include "rbn/fbm.hpp"
#include "rbn/mollify.hpp"

namespace rbn::counterexample {

struct CeParams {
    double gamma = 0.55;  ///< declared Holder exponent of the forcing
    double alpha = 1.0;   ///< singularity power
    std::size_t d = 1;

    CeParams() = default;
    CeParams(double gamma_, double alpha_, std::size_t d_);
    /// alpha > (1 - gamma) / gamma
    bool supercritical() const noexcept { return alpha > (1.0 - gamma) / gamma; }
};

/// -sign(x_i)|x|^-alpha 1(|x|<1) per coordinate. Throws DomainError at x = 0.
std::vector<double> ce_drift(std::span<const double> x, double alpha);
/// Same with |x| floored at delta > 0; sign(0) = 0, so the origin maps to 0.
std::vector<double> ce_drift_floored(std::span<const double> x, double alpha, double delta);

struct EscapeCheck {
    bool holds = false;       ///< eps <= gamma^{g/(1-g)} K^{1/(1-g)} (eps d)^{alpha g/(1-g)}
    double required_k = 0.0;  ///< gamma^-gamma d^{-alpha gamma} eps^{1-gamma-alpha gamma}
    double margin = 0.0;      ///< K - required_k
};

/// Escape inequality along an excursion of |X| from 0 to d eps.
EscapeCheck escape_inequality_check(double eps, double gamma, double alpha, std::size_t d, double k);
/// Exponent of eps in required_k: 1 - gamma - alpha gamma.
double escape_exponent(double gamma, double alpha);

struct Excursion {
    double eps = 0.0;
    double t_prime = 0.0;        ///< last zero of the escaping coordinate before t''
    double t_doubleprime = 0.0;  ///< first time |X| >= d eps
    double k_hat = 0.0;          ///< (eps + tau (d eps)^-alpha) / tau^gamma, tau = max(t'' - t', dt)
};

struct FloorReport {
    double delta = 0.0;
    fbm::FbmPath x;   ///< Euler solution
    fbm::FbmPath psi; ///< accumulated drift, x = psi + f
    std::vector<Excursion> excursions;  ///< one per eps, decreasing eps
    bool strictly_increasing = false;   ///< k_hat strictly increasing as eps decreases
    bool signature = false;             ///< increasing with at most one inversion, supercritical params
    std::string verdict;
};

struct ExcursionReport {
    CeParams params;
    bool degenerate = false;  ///< forcing identically zero, or no excursion found
    std::vector<FloorReport> floors;
};

/// Euler scheme for the deterministic equation driven by `forcing` (f_0 = 0) with
/// |x| floored at each delta; a drift step never moves a coordinate past 0.
/// eps levels: `n_eps` consecutive dyadic values 2^-j below sup|X| / d and 1/d.
ExcursionReport attempt_solve(const fbm::FbmPath& forcing, const CeParams& params, std::span<const double> deltas,
                              std::size_t n_eps = 4);

/// Declared Holder exponent of a sampled fBM forcing: h - 0.05.
double declared_gamma(double h);

struct BadDrift {
    mollify::CallableDrift drift;
    double alpha = 0.0;
    double p = 1.0;
    double exact_norm_p = 0.0;          ///< ||b^i||_p^p = d v_d / (d - alpha p)
    std::vector<std::size_t> n_cells;   ///< refinement levels on [-1, 1]^d
    std::vector<double> grid_norm_p;    ///< cell-centre ||b^i||_p^p per level
    bool lp_stable = false;             ///< increasing, below exact, increments shrinking
};

/// Drift with alpha midway in (1/h - 1, d/p). Refuses ("regime") unless d/p > 1/h - 1.
BadDrift construct_bad_drift(double h, std::size_t d, double p);

/// Columns eps, t_prime, t_doubleprime, K_hat, verdict for floors[floor].
void write_csv(std::ostream& os, const ExcursionReport& r, std::size_t floor = 0);

}  // namespace rbn::counterexample
