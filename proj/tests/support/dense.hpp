#pragma once

// Dense reference implementations used as test oracles. They share the
// geometric conventions of the library but none of its algorithms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dexct/dexct.hpp"

namespace oracle {

/// Length of the segment of the line {x cos(th) + y sin(th) = t} inside the
/// box [x0, x1] x [y0, y1], by Liang-Barsky clipping.
inline double chord_in_box(double th, double t, double x0, double x1, double y0, double y1)
{
    const double c = std::cos(th);
    const double s = std::sin(th);
    // Parametrize as (t c, t s) + lambda (-s, c).
    const double ox = t * c;
    const double oy = t * s;
    const double u[2] = {-s, c};
    const double o[2] = {ox, oy};
    const double lo[2] = {x0, y0};
    const double hi[2] = {x1, y1};
    double a = -std::numeric_limits<double>::infinity();
    double b = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 2; ++k) {
        if (std::abs(u[k]) < 1e-12) {
            if (o[k] <= lo[k] || o[k] >= hi[k])
                return 0.0;
            continue;
        }
        double l1 = (lo[k] - o[k]) / u[k];
        double l2 = (hi[k] - o[k]) / u[k];
        if (l1 > l2)
            std::swap(l1, l2);
        a = std::max(a, l1);
        b = std::min(b, l2);
    }
    return std::max(0.0, b - a);
}

inline double ray_offset(const dexct::Geometry& geo, std::size_t d)
{
    return (static_cast<double>(d) - 0.5 * static_cast<double>(geo.n_detectors - 1)) * geo.detector_spacing;
}

inline double angle_rad(const dexct::Geometry& geo, std::size_t p)
{
    return geo.angles_deg[p] * std::numbers::pi / 180.0;
}

/// Dense A: each entry is the chord of one ray through one pixel square.
inline Eigen::MatrixXd system_matrix(const dexct::Geometry& geo)
{
    const std::size_t n = geo.n_pixels;
    const double h = geo.pixel_size;
    const double half = 0.5 * geo.extent();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(geo.rows()), static_cast<Eigen::Index>(n * n));
    for (std::size_t p = 0; p < geo.n_angles(); ++p)
        for (std::size_t d = 0; d < geo.n_detectors; ++d) {
            const auto row = static_cast<Eigen::Index>(p * geo.n_detectors + d);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t col = 0; col < n; ++col) {
                    const double x0 = -half + static_cast<double>(col) * h;
                    const double y1 = half - static_cast<double>(r) * h;
                    a(row, static_cast<Eigen::Index>(r * n + col)) =
                        chord_in_box(angle_rad(geo, p), ray_offset(geo, d), x0, x0 + h, y1 - h, y1);
                }
        }
    return a;
}

/// The stacked dual-energy matrix [c11 A_L, c12 A_L; c21 A_H, c22 A_H].
inline Eigen::MatrixXd dual_energy_matrix(const Eigen::MatrixXd& al, const Eigen::MatrixXd& ah,
                                          const dexct::AttenuationCoeffs& c)
{
    const Eigen::Index p = al.cols();
    Eigen::MatrixXd a(al.rows() + ah.rows(), 2 * p);
    a << c.c11 * al, c.c12 * al, c.c21 * ah, c.c22 * ah;
    return a;
}

/// Q assembled from its Kronecker form: F_L (x) A_L^T A_L + F_H (x) A_H^T A_H + K (x) I.
inline Eigen::MatrixXd hessian_from_blocks(const Eigen::MatrixXd& al, const Eigen::MatrixXd& ah,
                                           const dexct::AttenuationCoeffs& c, dexct::RegWeights w)
{
    const Eigen::Index p = al.cols();
    const Eigen::MatrixXd gl = al.transpose() * al;
    const Eigen::MatrixXd gh = ah.transpose() * ah;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(p, p);
    Eigen::MatrixXd q(2 * p, 2 * p);
    q.topLeftCorner(p, p) = c.c11 * c.c11 * gl + c.c21 * c.c21 * gh + w.alpha * id;
    q.topRightCorner(p, p) = c.c11 * c.c12 * gl + c.c21 * c.c22 * gh + w.beta * id;
    q.bottomLeftCorner(p, p) = q.topRightCorner(p, p).transpose();
    q.bottomRightCorner(p, p) = c.c12 * c.c12 * gl + c.c22 * c.c22 * gh + w.alpha * id;
    return q;
}

/// Dense matrix of any linear map given as apply(x, y), column by column.
template <class Apply>
Eigen::MatrixXd assemble(std::size_t rows, std::size_t cols, Apply&& apply)
{
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<double> e(cols, 0.0), y(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        e[j] = 1.0;
        apply(std::span<const double>(e), std::span<double>(y));
        e[j] = 0.0;
        for (std::size_t i = 0; i < rows; ++i)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y[i];
    }
    return m;
}

inline Eigen::VectorXd to_eigen(std::span<const double> v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Exact minimizer of 1/2 x^T Q x - b^T x over x >= 0 for symmetric positive
/// definite Q, via block principal pivoting on the complementarity problem
/// w = Q x - b, x >= 0, w >= 0, x^T w = 0, with a single-pivot fallback that
/// guarantees termination.
inline Eigen::VectorXd nonneg_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& b)
{
    const Eigen::Index n = b.size();
    std::vector<char> free(static_cast<std::size_t>(n), 0);
    const double tol = 1e-13 * std::max(1.0, b.cwiseAbs().maxCoeff());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::size_t best_infeasible = static_cast<std::size_t>(n) + 1;
    int backup = 3;
    for (int round = 0; round < 100000; ++round) {
        std::vector<Eigen::Index> f;
        for (Eigen::Index i = 0; i < n; ++i)
            if (free[static_cast<std::size_t>(i)])
                f.push_back(i);
        x.setZero();
        if (!f.empty()) {
            Eigen::MatrixXd qff(f.size(), f.size());
            Eigen::VectorXd bf(f.size());
            for (std::size_t i = 0; i < f.size(); ++i) {
                bf(static_cast<Eigen::Index>(i)) = b(f[i]);
                for (std::size_t j = 0; j < f.size(); ++j)
                    qff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q(f[i], f[j]);
            }
            const Eigen::VectorXd xf = qff.llt().solve(bf);
            for (std::size_t i = 0; i < f.size(); ++i)
                x(f[i]) = xf(static_cast<Eigen::Index>(i));
        }
        const Eigen::VectorXd w = q * x - b;
        std::vector<Eigen::Index> bad;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool is_free = free[static_cast<std::size_t>(i)];
            if ((is_free && x(i) < -tol) || (!is_free && w(i) < -tol))
                bad.push_back(i);
        }
        if (bad.empty())
            return x;
        if (bad.size() < best_infeasible) {
            best_infeasible = bad.size();
            backup = 3;
        } else if (backup > 0) {
            --backup;
        } else {
            bad = {bad.back()};
        }
        for (Eigen::Index i : bad)
            free[static_cast<std::size_t>(i)] ^= 1;
    }
    throw std::runtime_error("nonneg_qp: pivoting did not terminate");
}

/// The same minimizer by enumerating every support set: for each subset S,
/// solve the equality-constrained problem on S and keep the feasible point
/// with the lowest objective. Exponential; for dimensions up to about 16.
inline Eigen::VectorXd nonneg_qp_enumerate(const Eigen::MatrixXd& q, const Eigen::VectorXd& b)
{
    const Eigen::Index n = b.size();
    if (n > 20)
        throw std::invalid_argument("nonneg_qp_enumerate: dimension too large");
    Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
    double best_value = 0.0;
    for (unsigned long mask = 1; mask < (1UL << n); ++mask) {
        std::vector<Eigen::Index> s;
        for (Eigen::Index i = 0; i < n; ++i)
            if (mask & (1UL << i))
                s.push_back(i);
        Eigen::MatrixXd qs(s.size(), s.size());
        Eigen::VectorXd bs(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            bs(static_cast<Eigen::Index>(i)) = b(s[i]);
            for (std::size_t j = 0; j < s.size(); ++j)
                qs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q(s[i], s[j]);
        }
        const Eigen::VectorXd xs = qs.llt().solve(bs);
        if ((xs.array() < 0.0).any())
            continue;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i < s.size(); ++i)
            x(s[i]) = xs(static_cast<Eigen::Index>(i));
        const double value = 0.5 * x.dot(q * x) - b.dot(x);
        if (value < best_value) {
            best_value = value;
            best = x;
        }
    }
    return best;
}

inline double relative_error(const Eigen::VectorXd& x, const Eigen::VectorXd& ref)
{
    const double scale = ref.norm();
    return (x - ref).norm() / (scale > 0.0 ? scale : 1.0);
}

inline double relative_error(const Eigen::MatrixXd& x, const Eigen::MatrixXd& ref)
{
    const double scale = ref.norm();
    return (x - ref).norm() / (scale > 0.0 ? scale : 1.0);
}

} // namespace oracle
