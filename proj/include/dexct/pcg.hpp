#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dexct {

/// Raised when p^T M p <= 0, i.e. the operator handed to CG is not positive definite.
class PcgBreakdown : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PcgResult {
    std::size_t iterations = 0;
    bool converged = false;
    /// sqrt(r^T P^-1 r / b^T P^-1 b) at exit.
    double residual_ratio = 0.0;
};

struct PcgOptions {
    double tol = 1e-6;
    std::size_t max_iters = 1000;
    /// Called after each iteration with (iteration, x, r); returning true stops the solve.
    std::function<bool(std::size_t, std::span<const double>, std::span<const double>)> stop_early;
};

inline double dot(std::span<const double> a, std::span<const double> b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

/// Preconditioned conjugate gradients for M x = b.
///   matvec(v, out):  out = M v
///   precond(r, out): out = P^-1 r
/// x holds the initial guess on entry and the solution on exit.
template <class MatVec, class Precond>
PcgResult pcg_solve(MatVec&& matvec, std::span<const double> b, Precond&& precond, std::span<double> x,
                    const PcgOptions& opt)
{
    const std::size_t n = b.size();
    if (x.size() != n)
        throw std::invalid_argument("pcg_solve: solution and right-hand side differ in length");
    std::vector<double> r(n), z(n), p(n), q(n);

    PcgResult res;
    precond(b, std::span<double>(z));
    const double bz = dot(b, z);
    if (bz <= 0.0) {
        if (bz < 0.0)
            throw PcgBreakdown("pcg_solve: preconditioner is not positive definite");
        std::fill(x.begin(), x.end(), 0.0);
        res.converged = true;
        return res;
    }

    const bool warm = std::any_of(x.begin(), x.end(), [](double v) { return v != 0.0; });
    if (warm) {
        matvec(std::span<const double>(x), std::span<double>(q));
        for (std::size_t i = 0; i < n; ++i)
            r[i] = b[i] - q[i];
        precond(std::span<const double>(r), std::span<double>(z));
    } else {
        std::copy(b.begin(), b.end(), r.begin());
    }
    double rz = dot(r, z);
    res.residual_ratio = std::sqrt(std::max(rz, 0.0) / bz);
    if (res.residual_ratio <= opt.tol) {
        res.converged = true;
        return res;
    }
    p = z;

    while (res.iterations < opt.max_iters) {
        matvec(std::span<const double>(p), std::span<double>(q));
        const double curvature = dot(p, q);
        if (!(curvature > 0.0))
            throw PcgBreakdown("pcg_solve: non-positive curvature p^T M p = " + std::to_string(curvature) +
                               " at iteration " + std::to_string(res.iterations));
        const double step = rz / curvature;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += step * p[i];
            r[i] -= step * q[i];
        }
        ++res.iterations;
        precond(std::span<const double>(r), std::span<double>(z));
        const double rz_next = dot(r, z);
        res.residual_ratio = std::sqrt(std::max(rz_next, 0.0) / bz);
        if (res.residual_ratio <= opt.tol) {
            res.converged = true;
            break;
        }
        if (opt.stop_early && opt.stop_early(res.iterations, std::span<const double>(x), std::span<const double>(r)))
            break;
        const double ratio = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + ratio * p[i];
    }
    return res;
}

struct PcgSolution {
    std::vector<double> x;
    PcgResult result;
};

template <class MatVec, class Precond>
PcgSolution pcg_solve(MatVec&& matvec, std::span<const double> b, Precond&& precond, double tol,
                      std::size_t max_iters)
{
    PcgSolution sol{std::vector<double>(b.size(), 0.0), {}};
    PcgOptions opt;
    opt.tol = tol;
    opt.max_iters = max_iters;
    sol.result = pcg_solve(matvec, b, precond, std::span<double>(sol.x), opt);
    return sol;
}

/// P = I.
inline void identity_preconditioner(std::span<const double> r, std::span<double> z)
{
    std::copy(r.begin(), r.end(), z.begin());
}

} // namespace dexct
