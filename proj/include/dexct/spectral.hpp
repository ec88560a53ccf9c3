#pragma once

// Estimates of diag(A^T A) and of the largest singular value of A, used by the
// block-diagonal preconditioner and by its eigenvalue bounds.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dexct/geometry.hpp"
#include "dexct/random.hpp"

namespace dexct {

template <class P>
concept HasColumnNorms = requires(const P& p, std::size_t i) {
    { p.column_norm_squared(i) } -> std::convertible_to<double>;
};

/// (A^T A)_ii = ||A e_i||^2.
template <LinearProjector P>
double column_norm_squared(const P& a, std::size_t i)
{
    if constexpr (HasColumnNorms<P>) {
        return a.column_norm_squared(i);
    } else {
        std::vector<double> basis(a.cols(), 0.0);
        std::vector<double> column(a.rows());
        basis[i] = 1.0;
        a.forward(basis, column);
        return std::inner_product(column.begin(), column.end(), column.begin(), 0.0);
    }
}

/// Mean of (A^T A)_ii over n_samples pixel indices drawn uniformly; without
/// replacement while n_samples <= cols(), so n_samples == cols() is the exact mean.
template <LinearProjector P>
double estimate_rho(const P& a, std::size_t n_samples, std::uint64_t seed)
{
    if (n_samples == 0)
        throw std::invalid_argument("estimate_rho: n_samples must be >= 1");
    const std::size_t n = a.cols();
    Rng rng(seed);
    double sum = 0.0;
    if (n_samples <= n) {
        // Partial Fisher-Yates shuffle.
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t k = 0; k < n_samples; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng.index(n - k));
            std::swap(order[k], order[j]);
            sum += column_norm_squared(a, order[k]);
        }
    } else {
        for (std::size_t k = 0; k < n_samples; ++k)
            sum += column_norm_squared(a, static_cast<std::size_t>(rng.index(n)));
    }
    return sum / static_cast<double>(n_samples);
}

inline double estimate_rho(const Geometry& geo, std::size_t n_samples, std::uint64_t seed)
{
    return estimate_rho(ParallelBeamProjector(geo), n_samples, seed);
}

/// Largest singular value of A by power iteration on A^T A, started from the
/// all-ones vector. Stops once the Rayleigh quotient changes by less than tol (relative).
template <LinearProjector P>
double estimate_sigma_max(const P& a, double tol, std::size_t max_iters = 100000)
{
    if (!(tol > 0.0))
        throw std::invalid_argument("estimate_sigma_max: tol must be positive");
    std::vector<double> x(a.cols(), 1.0 / std::sqrt(static_cast<double>(a.cols())));
    std::vector<double> ax(a.rows());
    std::vector<double> z(a.cols());
    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        a.forward(x, ax);
        a.adjoint(ax, z);
        const double next = std::inner_product(x.begin(), x.end(), z.begin(), 0.0);
        const double norm = std::sqrt(std::inner_product(z.begin(), z.end(), z.begin(), 0.0));
        if (norm == 0.0)
            return 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = z[i] / norm;
        const bool done = it > 0 && std::abs(next - lambda) <= tol * std::abs(next);
        lambda = next;
        if (done)
            break;
    }
    return std::sqrt(lambda);
}

inline double estimate_sigma_max(const Geometry& geo, double tol)
{
    return estimate_sigma_max(ParallelBeamProjector(geo), tol);
}

} // namespace dexct
