#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbn {

/// Raised when an argument lies outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot deliver a trustworthy result
/// (quadrature breakdown, indefinite embedding, non-finite output).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the parameters fall outside the regime in which an experiment
/// is meaningful. `reason` is a short machine-readable tag.
class RegimeRefusal : public std::runtime_error {
public:
    RegimeRefusal(std::string reason, const std::string& what)
        : std::runtime_error(what), reason_(std::move(reason)) {}
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string reason_;
};

/// Dense row-major matrix.
struct Array2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Array2() = default;
    Array2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

/// SplitMix64 finalizer, used to derive independent substreams.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for substream `index` of master seed `seed`. Streams for distinct
/// (seed, index) pairs are statistically independent for our purposes.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed, std::uint64_t index) {
    return Engine(derive_seed(seed, index));
}

/// Standard normal draw. Box-Muller on 53-bit uniforms so the bit pattern
/// depends only on the engine, not on the standard library's distribution.
class NormalSource {
public:
    explicit NormalSource(Engine& eng) : eng_(&eng) {}
    double operator()();

private:
    Engine* eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Uniform double in (0, 1) from 53 random bits.
double uniform_open(Engine& eng);

/// Number of worker threads used by ensemble loops. 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; callers
/// write results into index-addressed slots so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace rbn
