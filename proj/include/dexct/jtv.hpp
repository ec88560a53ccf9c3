#pragma once

// Baseline reconstruction with a smoothed total-variation penalty on both
// material images:
//
//     min_{g >= 0}  ||m - A g||^2 + gamma * sum_l ( |L_H g1|_k + |L_V g1|_k + |L_H g2|_k + |L_V g2|_k ),
//
// with |x|_k = sqrt(x^2 + kappa), minimised by projected gradient descent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dexct/io.hpp"
#include "dexct/model.hpp"
#include "dexct/pcg.hpp"

namespace dexct {

/// (L_H f)[r][c] = f[r][c+1] - f[r][c], with f[r][N] = 0.
inline void diff_h(std::span<const double> f, std::size_t n, std::span<double> out)
{
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            out[r * n + c] = (c + 1 < n ? f[r * n + c + 1] : 0.0) - f[r * n + c];
}

/// (L_V f)[r][c] = f[r+1][c] - f[r][c], with f[N][c] = 0.
inline void diff_v(std::span<const double> f, std::size_t n, std::span<double> out)
{
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            out[r * n + c] = (r + 1 < n ? f[(r + 1) * n + c] : 0.0) - f[r * n + c];
}

/// L_H^T y: out[r][c] = y[r][c-1] - y[r][c].
inline void diff_h_adjoint(std::span<const double> y, std::size_t n, std::span<double> out)
{
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            out[r * n + c] = (c > 0 ? y[r * n + c - 1] : 0.0) - y[r * n + c];
}

/// L_V^T y: out[r][c] = y[r-1][c] - y[r][c].
inline void diff_v_adjoint(std::span<const double> y, std::size_t n, std::span<double> out)
{
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            out[r * n + c] = (r > 0 ? y[(r - 1) * n + c] : 0.0) - y[r * n + c];
}

inline Image diff_h(const Image& f)
{
    Image out(f.n);
    diff_h(f.span(), f.n, out.span());
    return out;
}

inline Image diff_v(const Image& f)
{
    Image out(f.n);
    diff_v(f.span(), f.n, out.span());
    return out;
}

inline Image diff_h_adjoint(const Image& y)
{
    Image out(y.n);
    diff_h_adjoint(y.span(), y.n, out.span());
    return out;
}

inline Image diff_v_adjoint(const Image& y)
{
    Image out(y.n);
    diff_v_adjoint(y.span(), y.n, out.span());
    return out;
}

namespace detail {

inline double smooth_abs(double x, double kappa) { return std::sqrt(x * x + kappa); }

inline void check_kappa(double kappa)
{
    if (!(kappa > 0.0))
        throw std::invalid_argument("jtv: kappa must be positive");
}

} // namespace detail

/// Penalty value for a stacked pair of n x n images.
inline double jtv_value(std::span<const double> g, std::size_t n, double kappa)
{
    detail::check_kappa(kappa);
    if (g.size() != 2 * n * n)
        throw std::invalid_argument("jtv_value: stacked vector must have length 2 n^2");
    const std::size_t half = n * n;
    std::vector<double> d(half);
    double total = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        const auto f = g.subspan(k * half, half);
        diff_h(f, n, d);
        for (double v : d)
            total += detail::smooth_abs(v, kappa);
        diff_v(f, n, d);
        for (double v : d)
            total += detail::smooth_abs(v, kappa);
    }
    return total;
}

inline double jtv_value(const ImagePair& g, double kappa) { return jtv_value(g.stacked(), g.size(), kappa); }

/// grad += scale * d(jtv_value)/dg.
inline void jtv_gradient(std::span<const double> g, std::size_t n, double kappa, double scale, std::span<double> grad)
{
    detail::check_kappa(kappa);
    const std::size_t half = n * n;
    std::vector<double> d(half), back(half);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto f = g.subspan(k * half, half);
        auto out = grad.subspan(k * half, half);
        diff_h(f, n, d);
        for (double& v : d)
            v /= detail::smooth_abs(v, kappa);
        diff_h_adjoint(d, n, back);
        for (std::size_t i = 0; i < half; ++i)
            out[i] += scale * back[i];
        diff_v(f, n, d);
        for (double& v : d)
            v /= detail::smooth_abs(v, kappa);
        diff_v_adjoint(d, n, back);
        for (std::size_t i = 0; i < half; ++i)
            out[i] += scale * back[i];
    }
}

struct JtvConfig {
    double gamma = 0.001;
    double kappa = 1e-6;
    std::size_t n_iters = 400;
    /// Sufficient decrease: f(g+) <= f(g) - armijo_c / t * ||g+ - g||^2.
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    std::size_t max_backtracks = 60;
    /// Trial step of the first iteration; later trials use the Barzilai-Borwein step.
    double initial_step = 1.0;

    void validate() const
    {
        if (!(gamma > 0.0))
            throw std::invalid_argument("JtvConfig: gamma must be positive");
        if (!(kappa > 0.0))
            throw std::invalid_argument("JtvConfig: kappa must be positive");
        if (n_iters < 1)
            throw std::invalid_argument("JtvConfig: n_iters must be at least 1");
        if (!(armijo_c > 0.0 && armijo_c < 1.0))
            throw std::invalid_argument("JtvConfig: armijo_c must lie in (0, 1)");
        if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
            throw std::invalid_argument("JtvConfig: backtrack_factor must lie in (0, 1)");
        if (!(initial_step > 0.0))
            throw std::invalid_argument("JtvConfig: initial_step must be positive");
    }
};

struct JtvIterationRecord {
    std::size_t iteration = 0;
    double objective = 0.0;
    double step_size = 0.0;
};

struct JtvReport {
    std::vector<JtvIterationRecord> history;
    std::size_t iterations = 0;
    /// Set when the line search could not find a decreasing step.
    bool line_search_failed = false;

    void write_csv(std::ostream& out) const
    {
        out << "iteration,objective,step_size\n" << std::setprecision(17);
        for (const auto& h : history)
            out << h.iteration << ',' << h.objective << ',' << h.step_size << '\n';
    }

    void write_csv(const std::filesystem::path& path) const
    {
        auto out = detail::open_out(path);
        write_csv(out);
    }
};

/// ||m - A g||^2 + gamma * jtv_value(g).
template <class Op>
double jtv_objective(const Op& op, std::span<const double> g, const SinogramPair& m, double gamma, double kappa)
{
    std::vector<double> rl(op.low_rows()), rh(op.high_rows());
    op.forward(g, rl, rh);
    double misfit = 0.0;
    for (std::size_t i = 0; i < rl.size(); ++i)
        misfit += (m.low.values[i] - rl[i]) * (m.low.values[i] - rl[i]);
    for (std::size_t i = 0; i < rh.size(); ++i)
        misfit += (m.high.values[i] - rh[i]) * (m.high.values[i] - rh[i]);
    return misfit + gamma * jtv_value(g, op.side(), kappa);
}

/// Gradient 2 A^T (A g - m) + gamma * grad jtv_value(g).
template <class Op>
std::vector<double> jtv_objective_gradient(const Op& op, std::span<const double> g, const SinogramPair& m,
                                           double gamma, double kappa)
{
    std::vector<double> rl(op.low_rows()), rh(op.high_rows()), grad(g.size());
    op.forward(g, rl, rh);
    for (std::size_t i = 0; i < rl.size(); ++i)
        rl[i] = 2.0 * (rl[i] - m.low.values[i]);
    for (std::size_t i = 0; i < rh.size(); ++i)
        rh[i] = 2.0 * (rh[i] - m.high.values[i]);
    op.adjoint(rl, rh, grad);
    jtv_gradient(g, op.side(), kappa, gamma, grad);
    return grad;
}

struct JtvResult {
    ImagePair g;
    JtvReport report;
};

template <class Op>
JtvResult jtv_solve(const Op& op, const SinogramPair& m, const JtvConfig& cfg)
{
    cfg.validate();
    const std::size_t side = op.side();
    const std::size_t dim = 2 * op.half_size();
    std::vector<double> g(dim, 0.0), trial(dim), rl(op.low_rows()), rh(op.high_rows());

    // Returns the objective at x and leaves the scaled residuals 2(Ax - m) in rl, rh.
    auto evaluate = [&](std::span<const double> x) {
        op.forward(x, rl, rh);
        double misfit = 0.0;
        for (std::size_t i = 0; i < rl.size(); ++i) {
            const double r = rl[i] - m.low.values[i];
            misfit += r * r;
            rl[i] = 2.0 * r;
        }
        for (std::size_t i = 0; i < rh.size(); ++i) {
            const double r = rh[i] - m.high.values[i];
            misfit += r * r;
            rh[i] = 2.0 * r;
        }
        return misfit + cfg.gamma * jtv_value(x, side, cfg.kappa);
    };
    auto gradient = [&](std::span<const double> x, std::vector<double>& grad) {
        op.adjoint(rl, rh, grad);
        jtv_gradient(x, side, cfg.kappa, cfg.gamma, grad);
    };

    JtvReport report;
    double f = evaluate(g);
    std::vector<double> grad(dim), grad_trial(dim);
    gradient(g, grad);
    report.history.push_back({0, f, 0.0});

    double t = cfg.initial_step;
    for (std::size_t it = 1; it <= cfg.n_iters; ++it) {
        bool accepted = false;
        bool stationary = false;
        double f_trial = f;
        for (std::size_t k = 0; k <= cfg.max_backtracks; ++k) {
            double moved = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                trial[i] = std::max(0.0, g[i] - t * grad[i]);
                moved += (trial[i] - g[i]) * (trial[i] - g[i]);
            }
            if (moved == 0.0) {
                stationary = true;
                break;
            }
            f_trial = evaluate(trial);
            if (f_trial <= f - cfg.armijo_c / t * moved) {
                accepted = true;
                break;
            }
            t *= cfg.backtrack_factor;
        }
        if (stationary)
            break;
        if (!accepted) {
            report.line_search_failed = true;
            break;
        }
        gradient(trial, grad_trial);
        // Barzilai-Borwein trial step for the next iteration.
        double ss = 0.0;
        double sy = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double ds = trial[i] - g[i];
            ss += ds * ds;
            sy += ds * (grad_trial[i] - grad[i]);
        }
        report.history.push_back({it, f_trial, t});
        report.iterations = it;
        g.swap(trial);
        grad.swap(grad_trial);
        f = f_trial;
        t = sy > 0.0 ? ss / sy : t / cfg.backtrack_factor;
    }
    return {ImagePair(side, std::move(g)), std::move(report)};
}

inline JtvResult jtv_solve(const SinogramPair& m, const AttenuationCoeffs& c, const JtvConfig& cfg,
                           const Geometry& geo_low, const Geometry& geo_high)
{
    DualEnergyProjectors proj(geo_low, geo_high);
    return jtv_solve(proj.op(c), m, cfg);
}

} // namespace dexct
