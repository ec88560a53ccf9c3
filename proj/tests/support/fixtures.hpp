#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dexct/dexct.hpp"

namespace fixtures {

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
    dexct::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v)
        x = rng.uniform(lo, hi);
    return v;
}

inline dexct::Image random_image(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    return dexct::Image(n, random_vector(n * n, seed, lo, hi));
}

inline dexct::ImagePair random_pair(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    return dexct::ImagePair(n, random_vector(2 * n * n, seed, lo, hi));
}

/// A = I on R^n.
struct IdentityProjector {
    std::size_t n = 0;

    std::size_t rows() const { return n; }
    std::size_t cols() const { return n; }
    void forward(std::span<const double> in, std::span<double> out) const { std::copy(in.begin(), in.end(), out.begin()); }
    void adjoint(std::span<const double> in, std::span<double> out) const { std::copy(in.begin(), in.end(), out.begin()); }
};

/// min -b^T x + 1/2 x^T Q x with an explicit matrix, for driving the IPM directly.
struct DenseQp {
    Eigen::MatrixXd q;
    std::vector<double> b;
    dexct::BlockConstants k{1.0, 0.0, 1.0};

    std::size_t dimension() const { return b.size(); }
    void apply_hessian(std::span<const double> x, std::span<double> y) const
    {
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::Map<Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
        yv = q * xv;
    }
    std::span<const double> linear_term() const { return b; }
    dexct::BlockConstants preconditioner_constants() const { return k; }
};

static_assert(dexct::LinearProjector<IdentityProjector>);
static_assert(dexct::QuadraticProblem<DenseQp>);

} // namespace fixtures
