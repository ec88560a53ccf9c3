#pragma once

// Primal-dual interior point method for
//
//     min  -b^T g + 1/2 g^T Q g   subject to g >= 0,     b = A^T m,
//
// with optimality conditions  Q g - s = b,  G S e = mu e,  (g, s) > 0.
// Each Newton step is reduced to the normal equations
//
//     (Q + G^-1 S) dg = r1 + G^-1 r2,    ds = G^-1 (r2 - S dg),
//     r1 = b - Q g + s,                  r2 = sigma mu e - G S e,
//
// solved by PCG with a 2x2-block diagonal preconditioner in which every
// A^T A is replaced by rho I. Directions are built Mehrotra-style (affine
// predictor, then a centred corrector) and refined with multiple centrality
// correctors that push g_j s_j into [gamma mu, mu / gamma].

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexct/io.hpp"
#include "dexct/model.hpp"
#include "dexct/pcg.hpp"
#include "dexct/spectral.hpp"

namespace dexct {

struct IpmState {
    std::vector<double> g;
    std::vector<double> s;
    double mu = 0.0;
    std::size_t iteration = 0;
};

struct IpmConfig {
    double tol = 1e-8;
    std::size_t max_iters = 200;
    std::size_t n_correctors = 3;
    double neighbourhood_gamma = 0.2;
    double pcg_tol = 1e-6;
    std::size_t pcg_max_iters = 2000;
    /// Fraction-to-boundary factor applied to the maximal feasible step.
    double step_fraction = 0.995;
    /// sigma = clamp((mu_aff / mu)^sigma_power, sigma_min, sigma_max).
    double sigma_power = 3.0;
    double sigma_min = 0.0;
    double sigma_max = 1.0;
    /// Correctors aim at a step this much longer than the current one.
    double corrector_step_increase = 0.2;
    /// A corrector is kept only if it lengthens the step by at least
    /// corrector_min_gain * corrector_step_increase.
    double corrector_min_gain = 0.1;
    /// Correctors are tried only while the step is shorter than this. Each
    /// corrector costs a full PCG solve, so near-full steps are not worth it.
    double corrector_step_threshold = 0.9;
    /// Stop each PCG solve as soon as the dual residual predicted for a full
    /// Newton step drops below tol (in addition to the pcg_tol test).
    bool early_termination = false;
    /// Seed for the random sampling of diag(A^T A).
    std::uint64_t seed = 0;
    /// Called with every iterate, including the starting point.
    std::function<void(const IpmState&)> on_iterate;

    void validate() const
    {
        if (!(tol > 0.0))
            throw std::invalid_argument("IpmConfig: tol must be positive");
        if (!(neighbourhood_gamma > 0.0 && neighbourhood_gamma < 1.0))
            throw std::invalid_argument("IpmConfig: neighbourhood_gamma must lie in (0, 1)");
        if (!(step_fraction > 0.0 && step_fraction < 1.0))
            throw std::invalid_argument("IpmConfig: step_fraction must lie in (0, 1)");
        if (!(pcg_tol > 0.0))
            throw std::invalid_argument("IpmConfig: pcg_tol must be positive");
        if (!(sigma_min >= 0.0 && sigma_min <= sigma_max && sigma_max <= 1.0))
            throw std::invalid_argument("IpmConfig: need 0 <= sigma_min <= sigma_max <= 1");
    }
};

struct IpmIterationRecord {
    std::size_t iteration = 0;
    double mu = 0.0;
    double dual_residual = 0.0;
    std::size_t pcg_iters = 0;
    double cumulative_time_ms = 0.0;
};

struct IpmReport {
    std::vector<IpmIterationRecord> history;
    bool converged = false;
    std::size_t iterations = 0;
    std::size_t total_pcg_iters = 0;
    double seconds = 0.0;
    double rho_low = 0.0;
    double rho_high = 0.0;

    /// Columns: iteration, mu, dual_residual, pcg_iters, cumulative_time_ms.
    /// With include_timing = false the wall-clock column is omitted so the
    /// file is reproducible byte for byte.
    void write_csv(std::ostream& out, bool include_timing = true) const
    {
        out << "iteration,mu,dual_residual,pcg_iters";
        if (include_timing)
            out << ",cumulative_time_ms";
        out << '\n' << std::setprecision(17);
        for (const auto& h : history) {
            out << h.iteration << ',' << h.mu << ',' << h.dual_residual << ',' << h.pcg_iters;
            if (include_timing)
                out << ',' << h.cumulative_time_ms;
            out << '\n';
        }
    }

    void write_csv(const std::filesystem::path& path, bool include_timing = true) const
    {
        auto out = detail::open_out(path);
        write_csv(out, include_timing);
    }
};

/// Constant part of the preconditioner blocks: D = k + G^-1 S on the diagonal blocks.
struct BlockConstants {
    double k11 = 0.0;
    double k12 = 0.0;
    double k22 = 0.0;
};

/// (c11^2 rhoL + c21^2 rhoH + alpha, c11 c12 rhoL + c21 c22 rhoH + beta, c12^2 rhoL + c22^2 rhoH + alpha).
inline BlockConstants preconditioner_constants(const AttenuationCoeffs& c, RegWeights w, double rho_low,
                                               double rho_high)
{
    return {c.c11 * c.c11 * rho_low + c.c21 * c.c21 * rho_high + w.alpha,
            c.c11 * c.c12 * rho_low + c.c21 * c.c22 * rho_high + w.beta,
            c.c12 * c.c12 * rho_low + c.c22 * c.c22 * rho_high + w.alpha};
}

/// Blocks D11, D12, D22 of the 2x2-block diagonal preconditioner.
struct PrecondDiagonals {
    std::vector<double> d11;
    std::vector<double> d12;
    std::vector<double> d22;
    double rho_low = 0.0;
    double rho_high = 0.0;

    std::size_t half_size() const { return d11.size(); }
};

inline PrecondDiagonals build_preconditioner(std::span<const double> g, std::span<const double> s, BlockConstants k)
{
    if (g.size() != s.size() || g.size() % 2 != 0)
        throw std::invalid_argument("build_preconditioner: g and s must have equal even length");
    const std::size_t n = g.size() / 2;
    PrecondDiagonals p;
    p.d11.resize(n);
    p.d12.assign(n, k.k12);
    p.d22.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(g[i] > 0.0 && s[i] > 0.0 && g[n + i] > 0.0 && s[n + i] > 0.0))
            throw std::invalid_argument("build_preconditioner: g and s must be strictly positive");
        p.d11[i] = k.k11 + s[i] / g[i];
        p.d22[i] = k.k22 + s[n + i] / g[n + i];
    }
    return p;
}

inline PrecondDiagonals build_preconditioner(const IpmState& state, const AttenuationCoeffs& c, RegWeights w,
                                             double rho_low, double rho_high)
{
    PrecondDiagonals p = build_preconditioner(state.g, state.s, preconditioner_constants(c, w, rho_low, rho_high));
    p.rho_low = rho_low;
    p.rho_high = rho_high;
    return p;
}

/// x = P^-1 y through the diagonal Schur complement D22 - D12^2 / D11.
inline void precond_apply(const PrecondDiagonals& p, std::span<const double> y, std::span<double> x)
{
    const std::size_t n = p.half_size();
    if (y.size() != 2 * n || x.size() != 2 * n)
        throw std::invalid_argument("precond_apply: vector length must be twice the block size");
    for (std::size_t i = 0; i < n; ++i) {
        const double schur = p.d22[i] - p.d12[i] * p.d12[i] / p.d11[i];
        const double x2 = (y[n + i] - p.d12[i] * y[i] / p.d11[i]) / schur;
        x[i] = (y[i] - p.d12[i] * x2) / p.d11[i];
        x[n + i] = x2;
    }
}

inline std::vector<double> precond_apply(const PrecondDiagonals& p, std::span<const double> y)
{
    std::vector<double> x(y.size());
    precond_apply(p, y, x);
    return x;
}

/// A convex QP  min -b^T g + 1/2 g^T Q g,  g >= 0,  over a stacked vector of
/// even length whose halves are the two material images.
template <class P>
concept QuadraticProblem = requires(const P& p, std::span<const double> x, std::span<double> y) {
    { p.dimension() } -> std::convertible_to<std::size_t>;
    p.apply_hessian(x, y);
    { p.linear_term() } -> std::convertible_to<std::span<const double>>;
    { p.preconditioner_constants() } -> std::convertible_to<BlockConstants>;
};

/// The dual-energy reconstruction problem: Q from the operator, b = A^T m.
template <class Op>
class DualEnergyQp {
public:
    DualEnergyQp(const Op& op, const SinogramPair& m, RegWeights w, double rho_low, double rho_high)
        : op_(&op), w_(w), atm_(2 * op.half_size()), rho_low_(rho_low), rho_high_(rho_high)
    {
        w_.validate();
        op.adjoint(m.low.span(), m.high.span(), atm_);
        k_ = dexct::preconditioner_constants(op.coeffs(), w_, rho_low, rho_high);
    }

    std::size_t dimension() const { return atm_.size(); }
    void apply_hessian(std::span<const double> x, std::span<double> y) const { op_->apply_q(x, w_, y); }
    std::span<const double> linear_term() const { return atm_; }
    BlockConstants preconditioner_constants() const { return k_; }
    double rho_low() const { return rho_low_; }
    double rho_high() const { return rho_high_; }

private:
    const Op* op_;
    RegWeights w_;
    std::vector<double> atm_;
    double rho_low_;
    double rho_high_;
    BlockConstants k_;
};

struct KktResiduals {
    double dual_residual = 0.0;
    double mu = 0.0;
};

/// ||b - Q g + s|| / ||b|| (||b|| = 0 is treated as 1) and mu = g^T s / dim.
template <QuadraticProblem P>
KktResiduals kkt_residuals(const P& problem, std::span<const double> g, std::span<const double> s)
{
    const std::size_t n = problem.dimension();
    if (g.size() != n || s.size() != n)
        throw std::invalid_argument("kkt_residuals: g and s must match the problem dimension");
    std::vector<double> qg(n);
    problem.apply_hessian(g, qg);
    const auto b = problem.linear_term();
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = b[i] - qg[i] + s[i];
        res += r * r;
    }
    double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0)
        bnorm = 1.0;
    return {std::sqrt(res) / bnorm, dot(g, s) / static_cast<double>(n)};
}

template <QuadraticProblem P>
KktResiduals kkt_residuals(const P& problem, const IpmState& state)
{
    return kkt_residuals(problem, state.g, state.s);
}

struct IpmResult {
    IpmState state;
    IpmReport report;
};

namespace detail {

/// Largest step in [0, 1] keeping x + step * dx >= 0.
inline double max_step(std::span<const double> x, std::span<const double> dx)
{
    double step = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (dx[i] < 0.0)
            step = std::min(step, -x[i] / dx[i]);
    return step;
}

inline double max_step(std::span<const double> g, std::span<const double> dg, std::span<const double> s,
                       std::span<const double> ds)
{
    return std::min(max_step(g, dg), max_step(s, ds));
}

} // namespace detail

template <QuadraticProblem P>
IpmResult ipm_solve(const P& problem, const IpmConfig& cfg)
{
    cfg.validate();
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const std::size_t n = problem.dimension();
    if (n == 0 || n % 2 != 0)
        throw std::invalid_argument("ipm_solve: problem dimension must be positive and even");
    const auto b = problem.linear_term();
    const BlockConstants k = problem.preconditioner_constants();
    const double dim = static_cast<double>(n);

    double b_inf = 0.0;
    for (double v : b)
        b_inf = std::max(b_inf, std::abs(v));
    double b_norm = std::sqrt(dot(b, b));
    if (b_norm == 0.0)
        b_norm = 1.0;

    IpmResult out;
    IpmState& st = out.state;
    IpmReport& report = out.report;
    const double start_value = std::sqrt(b_inf + 1.0);
    st.g.assign(n, start_value);
    st.s.assign(n, start_value);

    std::vector<double> qg(n), r1(n), r2(n), rhs(n), ratio(n);
    std::vector<double> dg(n), ds(n), dg_aff(n), ds_aff(n), dg_c(n), ds_c(n), trial_g(n), trial_s(n);
    PrecondDiagonals precond;

    auto hessian_plus_diag = [&](std::span<const double> v, std::span<double> y) {
        problem.apply_hessian(v, y);
        for (std::size_t i = 0; i < n; ++i)
            y[i] += ratio[i] * v[i];
    };
    auto apply_precond = [&](std::span<const double> y, std::span<double> x) { precond_apply(precond, y, x); };

    std::size_t pcg_this_iter = 0;
    PcgOptions pcg_opt;
    pcg_opt.tol = cfg.pcg_tol;
    pcg_opt.max_iters = cfg.pcg_max_iters;
    if (cfg.early_termination) {
        // With ds from the complementarity equation, the dual residual after a
        // full step equals the normal-equations residual.
        pcg_opt.stop_early = [&](std::size_t, std::span<const double>, std::span<const double> r) {
            return std::sqrt(dot(r, r)) / b_norm < cfg.tol;
        };
    }
    auto solve = [&](std::span<const double> right, std::span<double> x) {
        const PcgResult res = pcg_solve(hessian_plus_diag, right, apply_precond, x, pcg_opt);
        pcg_this_iter += res.iterations;
    };
    // ds = G^-1 (r2 - S dg)
    auto recover_ds = [&](std::span<const double> r2v, std::span<const double> dgv, std::span<double> dsv) {
        for (std::size_t i = 0; i < n; ++i)
            dsv[i] = (r2v[i] - st.s[i] * dgv[i]) / st.g[i];
    };

    for (std::size_t iter = 0;; ++iter) {
        problem.apply_hessian(st.g, qg);
        for (std::size_t i = 0; i < n; ++i)
            r1[i] = b[i] - qg[i] + st.s[i];
        st.mu = dot(st.g, st.s) / dim;
        st.iteration = iter;
        const double dual_res = std::sqrt(dot(r1, r1)) / b_norm;

        report.history.push_back({iter, st.mu, dual_res, pcg_this_iter,
                                  std::chrono::duration<double, std::milli>(clock::now() - start).count()});
        report.total_pcg_iters += pcg_this_iter;
        report.iterations = iter;
        pcg_this_iter = 0;
        if (cfg.on_iterate)
            cfg.on_iterate(st);

        if (dual_res < cfg.tol && st.mu < cfg.tol) {
            report.converged = true;
            break;
        }
        if (iter >= cfg.max_iters)
            break;

        for (std::size_t i = 0; i < n; ++i)
            ratio[i] = st.s[i] / st.g[i];
        precond = build_preconditioner(st.g, st.s, k);

        // Affine-scaling predictor: r2 = -G S e.
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = -st.g[i] * st.s[i];
            rhs[i] = r1[i] + r2[i] / st.g[i];
        }
        std::fill(dg_aff.begin(), dg_aff.end(), 0.0);
        solve(rhs, dg_aff);
        recover_ds(r2, dg_aff, ds_aff);
        const double step_aff = detail::max_step(st.g, dg_aff, st.s, ds_aff);
        double mu_aff = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mu_aff += (st.g[i] + step_aff * dg_aff[i]) * (st.s[i] + step_aff * ds_aff[i]);
        mu_aff /= dim;
        const double sigma =
            std::clamp(std::pow(std::max(mu_aff, 0.0) / st.mu, cfg.sigma_power), cfg.sigma_min, cfg.sigma_max);
        const double mu_target = sigma * st.mu;

        // Centred direction with the second-order term of the predictor.
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = mu_target - st.g[i] * st.s[i] - dg_aff[i] * ds_aff[i];
            rhs[i] = r1[i] + r2[i] / st.g[i];
        }
        dg = dg_aff;
        solve(rhs, dg);
        recover_ds(r2, dg, ds);
        double step = std::min(1.0, cfg.step_fraction * detail::max_step(st.g, dg, st.s, ds));

        // Multiple centrality correctors (r1 = 0).
        const double lo = cfg.neighbourhood_gamma * mu_target;
        const double hi = mu_target / cfg.neighbourhood_gamma;
        for (std::size_t c = 0; c < cfg.n_correctors && step < cfg.corrector_step_threshold; ++c) {
            const double target_step = std::min(1.0, step + cfg.corrector_step_increase);
            for (std::size_t i = 0; i < n; ++i) {
                const double v = (st.g[i] + target_step * dg[i]) * (st.s[i] + target_step * ds[i]);
                double t = 0.0;
                if (v < lo)
                    t = lo - v;
                else if (v > hi)
                    t = std::max(hi - v, -hi);
                r2[i] = t;
                rhs[i] = t / st.g[i];
            }
            std::fill(dg_c.begin(), dg_c.end(), 0.0);
            solve(rhs, dg_c);
            recover_ds(r2, dg_c, ds_c);
            for (std::size_t i = 0; i < n; ++i) {
                trial_g[i] = dg[i] + dg_c[i];
                trial_s[i] = ds[i] + ds_c[i];
            }
            const double trial_step = std::min(1.0, cfg.step_fraction * detail::max_step(st.g, trial_g, st.s, trial_s));
            if (!(trial_step >= step + cfg.corrector_min_gain * cfg.corrector_step_increase))
                break;
            dg.swap(trial_g);
            ds.swap(trial_s);
            step = trial_step;
        }

        for (std::size_t i = 0; i < n; ++i) {
            st.g[i] += step * dg[i];
            st.s[i] += step * ds[i];
        }
    }
    report.seconds = std::chrono::duration<double>(clock::now() - start).count();
    return out;
}

/// Number of pixels sampled when estimating diag(A^T A).
inline std::size_t default_rho_samples(std::size_t pixels) { return std::min<std::size_t>(pixels, 256); }

template <class Op>
IpmResult ipm_solve(const Op& op, const SinogramPair& m, RegWeights w, const IpmConfig& cfg)
{
    const std::size_t samples = default_rho_samples(op.half_size());
    const double rho_low = estimate_rho(op.low(), samples, derive_seed(cfg.seed, 1));
    const double rho_high = estimate_rho(op.high(), samples, derive_seed(cfg.seed, 2));
    DualEnergyQp<Op> problem(op, m, w, rho_low, rho_high);
    IpmResult result = ipm_solve(problem, cfg);
    result.report.rho_low = rho_low;
    result.report.rho_high = rho_high;
    return result;
}

struct IpmReconstruction {
    ImagePair g;
    IpmReport report;
};

inline IpmReconstruction ipm_solve(const SinogramPair& m, const AttenuationCoeffs& c, RegWeights w,
                                   const Geometry& geo_low, const Geometry& geo_high, const IpmConfig& cfg)
{
    DualEnergyProjectors proj(geo_low, geo_high);
    IpmResult res = ipm_solve(proj.op(c), m, w, cfg);
    return {ImagePair(geo_low.n_pixels, std::move(res.state.g)), std::move(res.report)};
}

struct SpectrumBound {
    double lower = 0.0;
    double upper = 0.0;
};

namespace detail {

/// Eigenvalues (smallest, largest) of the symmetric 2x2 matrix [a b; b d].
inline std::pair<double, double> eig2(double a, double b, double d)
{
    const double mean = 0.5 * (a + d);
    const double rad = std::hypot(0.5 * (a - d), b);
    return {mean - rad, mean + rad};
}

} // namespace detail

/// Interval containing the eigenvalues of P^-1 (Q + G^-1 S) for any positive
/// iterate when A^L != A^H:
///   [(a-b) / (Lrho + a + b), (sL^2 LF_L + sH^2 LF_H + a + b) / (lrho + a - b)]
/// with lrho, Lrho the extreme eigenvalues of rhoL F_L + rhoH F_H.
inline SpectrumBound spectrum_bound(const AttenuationCoeffs& c, RegWeights w, double rho_low, double rho_high,
                                    double sigma_low, double sigma_high)
{
    w.validate();
    // F_L and F_H are rank one: their largest eigenvalue is the trace.
    const double big_fl = c.c11 * c.c11 + c.c12 * c.c12;
    const double big_fh = c.c21 * c.c21 + c.c22 * c.c22;
    const auto [small_rho, big_rho] =
        detail::eig2(rho_low * c.c11 * c.c11 + rho_high * c.c21 * c.c21,
                     rho_low * c.c11 * c.c12 + rho_high * c.c21 * c.c22,
                     rho_low * c.c12 * c.c12 + rho_high * c.c22 * c.c22);
    SpectrumBound out;
    out.lower = (w.alpha - w.beta) / (big_rho + w.alpha + w.beta);
    out.upper = (sigma_low * sigma_low * big_fl + sigma_high * sigma_high * big_fh + w.alpha + w.beta) /
                (std::max(small_rho, 0.0) + w.alpha - w.beta);
    return out;
}

/// Shared-operator case A^L = A^H = A with F = F_L + F_H:
///   [(a-b) / (rho LF + a + b), (smax^2 LF + a + b) / (rho lF + a - b)].
inline SpectrumBound spectrum_bound_shared(const AttenuationCoeffs& c, RegWeights w, double rho, double sigma)
{
    w.validate();
    const auto [small_f, big_f] = detail::eig2(c.c11 * c.c11 + c.c21 * c.c21, c.c11 * c.c12 + c.c21 * c.c22,
                                               c.c12 * c.c12 + c.c22 * c.c22);
    SpectrumBound out;
    out.lower = (w.alpha - w.beta) / (rho * big_f + w.alpha + w.beta);
    out.upper = (sigma * sigma * big_f + w.alpha + w.beta) / (rho * std::max(small_f, 0.0) + w.alpha - w.beta);
    return out;
}

struct SeparationReport {
    std::size_t n_small = 0;
    double avg_product = 0.0;
};

/// Count of pixels with g1_i * g2_i < threshold, and g1^T g2 / N^2.
inline SeparationReport separation_report(const ImagePair& g, double threshold)
{
    SeparationReport out;
    const auto a = g.first();
    const auto b = g.second();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double prod = a[i] * b[i];
        if (prod < threshold)
            ++out.n_small;
        sum += prod;
    }
    out.avg_product = a.empty() ? 0.0 : sum / static_cast<double>(a.size());
    return out;
}

} // namespace dexct
