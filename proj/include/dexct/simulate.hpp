#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "dexct/model.hpp"
#include "dexct/random.hpp"

namespace dexct {

/// Rotate image content counter-clockwise by angle_deg about the image centre,
/// sampling with bilinear interpolation; samples outside the grid read as zero.
inline Image rotate_bilinear(const Image& img, double angle_deg)
{
    const std::size_t n = img.n;
    Image out(n);
    if (angle_deg == 0.0) {
        out.values = img.values;
        return out;
    }
    const double th = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(th);
    const double s = std::sin(th);
    const double centre = 0.5 * (static_cast<double>(n) - 1.0);
    const auto nn = static_cast<std::ptrdiff_t>(n);
    auto sample = [&](std::ptrdiff_t r, std::ptrdiff_t col) {
        if (r < 0 || col < 0 || r >= nn || col >= nn)
            return 0.0;
        return img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(col));
    };
    for (std::size_t row = 0; row < n; ++row) {
        for (std::size_t col = 0; col < n; ++col) {
            const double x = static_cast<double>(col) - centre;
            const double y = centre - static_cast<double>(row);
            // Inverse rotation gives the source location.
            const double xs = c * x + s * y;
            const double ys = -s * x + c * y;
            const double fc = xs + centre;
            const double fr = centre - ys;
            const double c0 = std::floor(fc);
            const double r0 = std::floor(fr);
            const double tc = fc - c0;
            const double tr = fr - r0;
            const auto ic = static_cast<std::ptrdiff_t>(c0);
            const auto ir = static_cast<std::ptrdiff_t>(r0);
            out.at(row, col) = (1 - tr) * ((1 - tc) * sample(ir, ic) + tc * sample(ir, ic + 1)) +
                               tr * ((1 - tc) * sample(ir + 1, ic) + tc * sample(ir + 1, ic + 1));
        }
    }
    return out;
}

inline ImagePair rotate_bilinear(const ImagePair& g, double angle_deg)
{
    return ImagePair(rotate_bilinear(g.first_image(), angle_deg), rotate_bilinear(g.second_image(), angle_deg));
}

/// Adds noise_level * max|m| * N(0,1) to every entry of m.
inline void add_relative_noise(Sinogram& m, double noise_level, Rng& rng)
{
    double peak = 0.0;
    for (double v : m.values)
        peak = std::max(peak, std::abs(v));
    const double sigma = noise_level * peak;
    for (double& v : m.values)
        v += sigma * rng.normal();
}

/// Noisy data from the operator's own model: A g + noise.
template <class Op>
SinogramPair simulate_measurement(const Op& op, const ImagePair& phantom, double noise_level, std::uint64_t seed)
{
    if (!(noise_level >= 0.0))
        throw std::invalid_argument("simulate_measurement: noise_level must be >= 0");
    SinogramPair m = op.forward(phantom);
    if (noise_level > 0.0) {
        Rng rng(seed);
        add_relative_noise(m.low, noise_level, rng);
        add_relative_noise(m.high, noise_level, rng);
    }
    return m;
}

/// Synthetic dual-energy data for the scans geo_low / geo_high. The phantom
/// raster is rotated by rotation_deg and projected at angles shifted by the
/// same amount, so the data describe the unrotated object up to the
/// interpolation error of the rotation. Reconstructions use the plain
/// geometries, so the data model differs from the reconstruction model.
inline SinogramPair simulate_measurement(const ImagePair& phantom, const AttenuationCoeffs& c,
                                         const Geometry& geo_low, const Geometry& geo_high, double noise_level,
                                         double rotation_deg, std::uint64_t seed)
{
    check_pair(phantom, geo_low);
    if (rotation_deg == 0.0) {
        DualEnergyProjectors proj(geo_low, geo_high);
        return simulate_measurement(proj.op(c), phantom, noise_level, seed);
    }
    const auto low = ParallelBeamProjector::with_rotated_angles(geo_low, rotation_deg);
    const auto high = ParallelBeamProjector::with_rotated_angles(geo_high, rotation_deg);
    const DualEnergyOperator<ParallelBeamProjector> op(low, high, c);
    return simulate_measurement(op, rotate_bilinear(phantom, rotation_deg), noise_level, seed);
}

} // namespace dexct
