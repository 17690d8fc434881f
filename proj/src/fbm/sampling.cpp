#include "rbn/fbm.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include <fftw3.h>

namespace rbn::fbm {

namespace {

// FFTW planning is not thread-safe; execution with new-array execute is.
std::mutex& fftw_planner_mutex() {
    static std::mutex mu;
    return mu;
}

// Autocovariance of unit-spacing fractional Gaussian noise.
double fgn_autocov(double h, std::size_t k) {
    const double kk = static_cast<double>(k);
    const double h2 = 2 * h;
    return 0.5 * (std::pow(kk + 1, h2) - 2 * std::pow(kk, h2) + std::pow(std::abs(kk - 1), h2));
}

constexpr std::size_t kCholeskyLimit = 4096;

}  // namespace

std::string to_string(SamplerMethod m) {
    switch (m) {
        case SamplerMethod::exact_brownian: return "exact_brownian";
        case SamplerMethod::circulant_embedding: return "circulant_embedding";
        case SamplerMethod::dense_cholesky: return "dense_cholesky";
    }
    return "unknown";
}

struct FbmSampler::Fft {
    std::size_t m = 0;
    fftw_plan plan = nullptr;
    ~Fft() {
        if (plan) {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(plan);
        }
    }
};

FbmSampler::FbmSampler(HurstParameter h, const TimeGrid& grid)
    : h_(h), grid_(grid), method_(SamplerMethod::exact_brownian) {
    const std::size_t n = grid.n_steps;
    if (n < 2) throw DomainError("sample_fbm: need at least 2 steps");
    if (h.is_brownian()) return;

    // Circulant embedding of the first row (c_0..c_n, c_{n-1}..c_1), size 2n.
    const std::size_t m = 2 * n;
    std::vector<double> row(m);
    for (std::size_t k = 0; k <= n; ++k) row[k] = fgn_autocov(h, k);
    for (std::size_t k = n + 1; k < m; ++k) row[k] = row[m - k];

    fftw_complex* buf = fftw_alloc_complex(m);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(m), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    for (std::size_t k = 0; k < m; ++k) {
        buf[k][0] = row[k];
        buf[k][1] = 0.0;
    }
    fftw_execute(plan);
    std::vector<double> lambda(m);
    for (std::size_t k = 0; k < m; ++k) lambda[k] = buf[k][0];
    fftw_free(buf);
    const double lmax = *std::max_element(lambda.begin(), lambda.end());
    const double lmin = *std::min_element(lambda.begin(), lambda.end());

    if (lmin >= -1e-10 * lmax) {
        method_ = SamplerMethod::circulant_embedding;
        // dt^H for the grid spacing, 1/sqrt(m) for the unnormalized DFT.
        const double scale = std::pow(grid.dt(), h.value()) / std::sqrt(static_cast<double>(m));
        sqrt_eigen_.resize(m);
        for (std::size_t k = 0; k < m; ++k) sqrt_eigen_[k] = std::sqrt(std::max(lambda[k], 0.0)) * scale;
        // The plan stays valid for any fftw_alloc'd array of this size.
        fft_ = std::make_unique<Fft>();
        fft_->m = m;
        fft_->plan = plan;
        return;
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    if (n > kCholeskyLimit) {
        std::ostringstream os;
        os << "sample_fbm: circulant embedding is not nonnegative-definite (min eigenvalue " << lmin
           << ") and the dense Cholesky fallback is limited to " << kCholeskyLimit << " steps";
        throw NumericalFailure(os.str());
    }
    // Dense Cholesky of the Toeplitz increment covariance.
    method_ = SamplerMethod::dense_cholesky;
    cholesky_ = Array2(n, n);
    const double var = std::pow(grid.dt(), 2 * h.value());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = fgn_autocov(h, i - j) * var;
            for (std::size_t k = 0; k < j; ++k) s -= cholesky_(i, k) * cholesky_(j, k);
            if (i == j) {
                if (!(s > 0)) throw NumericalFailure("sample_fbm: circulant embedding and dense Cholesky both failed");
                cholesky_(i, i) = std::sqrt(s);
            } else {
                cholesky_(i, j) = s / cholesky_(j, j);
            }
        }
    }
}

FbmSampler::~FbmSampler() = default;

void FbmSampler::sample_increments(Engine& eng, std::span<double> out) const {
    const std::size_t n = grid_.n_steps;
    if (out.size() != n) throw DomainError("sample_increments: output length must equal n_steps");
    NormalSource z(eng);
    switch (method_) {
        case SamplerMethod::exact_brownian: {
            const double s = std::sqrt(grid_.dt());
            for (auto& v : out) v = s * z();
            return;
        }
        case SamplerMethod::circulant_embedding: {
            const std::size_t m = fft_->m;
            fftw_complex* buf = fftw_alloc_complex(m);
            for (std::size_t k = 0; k < m; ++k) {
                buf[k][0] = sqrt_eigen_[k] * z();
                buf[k][1] = sqrt_eigen_[k] * z();
            }
            fftw_execute_dft(fft_->plan, buf, buf);
            for (std::size_t k = 0; k < n; ++k) out[k] = buf[k][0];
            fftw_free(buf);
            return;
        }
        case SamplerMethod::dense_cholesky: {
            std::vector<double> e(n);
            for (auto& v : e) v = z();
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0;
                for (std::size_t k = 0; k <= i; ++k) s += cholesky_(i, k) * e[k];
                out[i] = s;
            }
            return;
        }
    }
}

FbmPath FbmSampler::sample(std::size_t dim, std::uint64_t seed, std::uint64_t path_index) const {
    if (dim == 0) throw DomainError("sample_fbm: dimension must be positive");
    FbmPath p = zero_path(grid_, dim, h_.value());
    p.seed = seed;
    Engine eng = make_stream(seed, path_index);
    std::vector<double> inc(grid_.n_steps);
    for (std::size_t k = 0; k < dim; ++k) {
        sample_increments(eng, inc);
        double x = 0;
        for (std::size_t i = 0; i < inc.size(); ++i) {
            x += inc[i];
            p(i + 1, k) = x;
        }
    }
    return p;
}

std::vector<FbmPath> sample_fbm(HurstParameter h, const TimeGrid& grid, std::size_t n_paths, std::size_t dim,
                                std::uint64_t seed) {
    if (n_paths == 0) throw DomainError("sample_fbm: n_paths must be positive");
    const FbmSampler sampler(h, grid);
    std::vector<FbmPath> out(n_paths);
    parallel_for(n_paths, [&](std::size_t p) { out[p] = sampler.sample(dim, seed, p); });
    return out;
}

}  // namespace rbn::fbm
