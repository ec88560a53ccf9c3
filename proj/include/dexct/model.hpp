#pragma once

// Two-material, two-energy measurement model
//
//   m^L = c11 A^L g1 + c12 A^L g2
//   m^H = c21 A^H g1 + c22 A^H g2
//
// and the quadratic program built on it. The Hessian
//
//   Q = F_L (x) (A^L)^T A^L + F_H (x) (A^H)^T A^H + K (x) I,
//   F_L = [c11^2 c11c12; c11c12 c12^2], F_H likewise, K = [alpha beta; beta alpha]
//
// is applied matrix-free: F_L (x) A^T A is rank one in the 2x2 factor, so
// each energy costs one forward and one adjoint projection.

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexct/geometry.hpp"
#include "dexct/image.hpp"

namespace dexct {

/// Attenuation of material j at energy i; row 1 is the low energy.
struct AttenuationCoeffs {
    double c11 = 1.491; // PVC, 30 kV
    double c12 = 8.561; // iodine, 30 kV
    double c21 = 0.456; // PVC, 50 kV
    double c22 = 12.32; // iodine, 50 kV

    void validate() const
    {
        if (!(c11 > 0 && c12 > 0 && c21 > 0 && c22 > 0))
            throw std::invalid_argument("AttenuationCoeffs: all coefficients must be strictly positive");
    }
};

struct RegWeights {
    double alpha = 0.0;
    double beta = 0.0;

    void validate() const
    {
        if (!(alpha >= 0.0) || !(beta >= 0.0))
            throw std::invalid_argument("RegWeights: alpha and beta must be non-negative");
        if (alpha < beta)
            throw std::invalid_argument("RegWeights: alpha < beta makes the problem non-convex (alpha=" +
                                        std::to_string(alpha) + ", beta=" + std::to_string(beta) + ")");
    }
};

/// Both material images stacked as g = [g1; g2] in one buffer of length 2N^2.
class ImagePair {
public:
    ImagePair() = default;
    explicit ImagePair(std::size_t n) : n_(n), data_(2 * n * n, 0.0) {}
    ImagePair(const Image& first, const Image& second) : n_(first.n)
    {
        if (first.n != second.n)
            throw std::invalid_argument("ImagePair: material images differ in size");
        data_.reserve(2 * n_ * n_);
        data_.insert(data_.end(), first.values.begin(), first.values.end());
        data_.insert(data_.end(), second.values.begin(), second.values.end());
    }
    ImagePair(std::size_t n, std::vector<double> stacked) : n_(n), data_(std::move(stacked))
    {
        if (data_.size() != 2 * n * n)
            throw std::invalid_argument("ImagePair: stacked vector must have length 2N^2");
    }

    std::size_t size() const { return n_; }
    std::size_t pixels() const { return n_ * n_; }

    std::span<double> stacked() { return data_; }
    std::span<const double> stacked() const { return data_; }
    std::span<double> first() { return stacked().first(pixels()); }
    std::span<const double> first() const { return stacked().first(pixels()); }
    std::span<double> second() { return stacked().subspan(pixels()); }
    std::span<const double> second() const { return stacked().subspan(pixels()); }

    Image first_image() const { return Image(n_, {data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(pixels())}); }
    Image second_image() const { return Image(n_, {data_.begin() + static_cast<std::ptrdiff_t>(pixels()), data_.end()}); }

    friend bool operator==(const ImagePair&, const ImagePair&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

struct SinogramPair {
    Sinogram low;
    Sinogram high;
};

template <LinearProjector Low, LinearProjector High = Low>
class DualEnergyOperator {
public:
    DualEnergyOperator(const Low& low, const High& high, AttenuationCoeffs c) : low_(&low), high_(&high), c_(c)
    {
        c_.validate();
        if (low.cols() != high.cols())
            throw std::invalid_argument("DualEnergyOperator: low and high projectors act on different pixel grids");
    }

    const Low& low() const { return *low_; }
    const High& high() const { return *high_; }
    const AttenuationCoeffs& coeffs() const { return c_; }

    /// Pixels per material image, N^2.
    std::size_t half_size() const { return low_->cols(); }
    /// Image side N.
    std::size_t side() const { return static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(half_size())))); }
    std::size_t low_rows() const { return low_->rows(); }
    std::size_t high_rows() const { return high_->rows(); }

    void forward(std::span<const double> g, std::span<double> m_low, std::span<double> m_high) const
    {
        check_stacked(g.size(), "forward");
        const std::size_t n = half_size();
        std::vector<double> mix(n);
        combine(g, c_.c11, c_.c12, mix);
        low_->forward(mix, m_low);
        combine(g, c_.c21, c_.c22, mix);
        high_->forward(mix, m_high);
    }

    void adjoint(std::span<const double> m_low, std::span<const double> m_high, std::span<double> g) const
    {
        check_stacked(g.size(), "adjoint");
        const std::size_t n = half_size();
        std::vector<double> back_low(n);
        std::vector<double> back_high(n);
        low_->adjoint(m_low, back_low);
        high_->adjoint(m_high, back_high);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = c_.c11 * back_low[i] + c_.c21 * back_high[i];
            g[n + i] = c_.c12 * back_low[i] + c_.c22 * back_high[i];
        }
    }

    /// out = Q g. Requires w.alpha >= w.beta.
    void apply_q(std::span<const double> g, RegWeights w, std::span<double> out) const
    {
        w.validate();
        check_stacked(g.size(), "apply_q");
        check_stacked(out.size(), "apply_q");
        const std::size_t n = half_size();
        std::vector<double> mix(n);
        std::vector<double> gram_low(n);
        std::vector<double> gram_high(n);
        std::vector<double> ray_low(low_->rows());
        std::vector<double> ray_high(high_->rows());

        combine(g, c_.c11, c_.c12, mix);
        low_->forward(mix, ray_low);
        low_->adjoint(ray_low, gram_low);
        combine(g, c_.c21, c_.c22, mix);
        high_->forward(mix, ray_high);
        high_->adjoint(ray_high, gram_high);

        for (std::size_t i = 0; i < n; ++i) {
            const double g1 = g[i];
            const double g2 = g[n + i];
            out[i] = c_.c11 * gram_low[i] + c_.c21 * gram_high[i] + w.alpha * g1 + w.beta * g2;
            out[n + i] = c_.c12 * gram_low[i] + c_.c22 * gram_high[i] + w.beta * g1 + w.alpha * g2;
        }
    }

    SinogramPair forward(const ImagePair& g) const
    {
        SinogramPair m{make_sinogram(*low_), make_sinogram(*high_)};
        forward(g.stacked(), m.low.span(), m.high.span());
        return m;
    }

    ImagePair adjoint(const SinogramPair& m) const
    {
        if (m.low.size() != low_->rows() || m.high.size() != high_->rows())
            throw std::invalid_argument("apply_A_transpose: sinogram sizes do not match the projectors");
        ImagePair g(side());
        adjoint(m.low.span(), m.high.span(), g.stacked());
        return g;
    }

    ImagePair apply_q(const ImagePair& g, RegWeights w) const
    {
        ImagePair out(g.size());
        apply_q(g.stacked(), w, out.stacked());
        return out;
    }

private:

    void combine(std::span<const double> g, double a, double b, std::span<double> out) const
    {
        const std::size_t n = half_size();
        for (std::size_t i = 0; i < n; ++i)
            out[i] = a * g[i] + b * g[n + i];
    }

    void check_stacked(std::size_t size, const char* what) const
    {
        if (size != 2 * half_size())
            throw std::invalid_argument(std::string("DualEnergyOperator::") + what + ": expected stacked length " +
                                        std::to_string(2 * half_size()) + ", got " + std::to_string(size));
    }

    const Low* low_;
    const High* high_;
    AttenuationCoeffs c_;
};

/// Projectors for the low and high energy scans built from geometries.
struct DualEnergyProjectors {
    ParallelBeamProjector low;
    ParallelBeamProjector high;

    DualEnergyProjectors(const Geometry& geo_low, const Geometry& geo_high) : low(geo_low), high(geo_high)
    {
        if (geo_low.n_pixels != geo_high.n_pixels || geo_low.pixel_size != geo_high.pixel_size)
            throw std::invalid_argument("low and high energy geometries must share the pixel grid");
    }

    DualEnergyOperator<ParallelBeamProjector> op(const AttenuationCoeffs& c) const { return {low, high, c}; }
};

inline void check_pair(const ImagePair& g, const Geometry& geo)
{
    if (g.size() != geo.n_pixels)
        throw std::invalid_argument("image pair of size " + std::to_string(g.size()) +
                                    " does not match geometry size " + std::to_string(geo.n_pixels));
}

inline SinogramPair apply_A(const ImagePair& g, const AttenuationCoeffs& c, const Geometry& geo_low,
                            const Geometry& geo_high)
{
    check_pair(g, geo_low);
    DualEnergyProjectors proj(geo_low, geo_high);
    return proj.op(c).forward(g);
}

inline ImagePair apply_A_transpose(const SinogramPair& m, const AttenuationCoeffs& c, const Geometry& geo_low,
                                   const Geometry& geo_high)
{
    DualEnergyProjectors proj(geo_low, geo_high);
    return proj.op(c).adjoint(m);
}

inline ImagePair apply_Q(const ImagePair& g, const AttenuationCoeffs& c, RegWeights w, const Geometry& geo_low,
                         const Geometry& geo_high)
{
    w.validate();
    check_pair(g, geo_low);
    DualEnergyProjectors proj(geo_low, geo_high);
    return proj.op(c).apply_q(g, w);
}

/// S(g) = 2 <g1, g2>.
inline double penalty_S(std::span<const double> g)
{
    const std::size_t n = g.size() / 2;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sum += g[i] * g[n + i];
    return 2.0 * sum;
}

inline double penalty_S(const ImagePair& g) { return penalty_S(g.stacked()); }

/// R(g) = ||g||^2 over the stacked vector.
inline double penalty_R(std::span<const double> g)
{
    return std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
}

inline double penalty_R(const ImagePair& g) { return penalty_R(g.stacked()); }

inline double squared_norm(std::span<const double> v) { return std::inner_product(v.begin(), v.end(), v.begin(), 0.0); }

/// Reporting objective ||m - A g||^2 + alpha ||g||^2 + beta S(g).
///
/// The solver minimizes the equivalent quadratic program -m^T A g + 1/2 g^T Q g
/// (qp_objective); the two are related by
///   objective(g) = 2 * qp_objective(g) + ||m||^2.
template <class Op>
double objective(const Op& op, std::span<const double> g, const SinogramPair& m, RegWeights w)
{
    std::vector<double> low(op.low_rows());
    std::vector<double> high(op.high_rows());
    op.forward(g, low, high);
    double misfit = 0.0;
    for (std::size_t i = 0; i < low.size(); ++i)
        misfit += (m.low.values[i] - low[i]) * (m.low.values[i] - low[i]);
    for (std::size_t i = 0; i < high.size(); ++i)
        misfit += (m.high.values[i] - high[i]) * (m.high.values[i] - high[i]);
    return misfit + w.alpha * penalty_R(g) + w.beta * penalty_S(g);
}

/// -m^T A g + 1/2 g^T Q g.
template <class Op>
double qp_objective(const Op& op, std::span<const double> g, const SinogramPair& m, RegWeights w)
{
    std::vector<double> atm(g.size());
    op.adjoint(m.low.span(), m.high.span(), atm);
    std::vector<double> qg(g.size());
    op.apply_q(g, w, qg);
    return -std::inner_product(atm.begin(), atm.end(), g.begin(), 0.0) +
           0.5 * std::inner_product(qg.begin(), qg.end(), g.begin(), 0.0);
}

inline double objective(const ImagePair& g, const SinogramPair& m, const AttenuationCoeffs& c, RegWeights w,
                        const Geometry& geo_low, const Geometry& geo_high)
{
    check_pair(g, geo_low);
    DualEnergyProjectors proj(geo_low, geo_high);
    return objective(proj.op(c), g.stacked(), m, w);
}

} // namespace dexct
