#pragma once

// Parallel-beam pencil projector with exact ray/pixel intersection lengths.
//
// Coordinates: the image domain is the square [-L/2, L/2]^2 with
// L = n_pixels * pixel_size, centred at the origin. Pixel (row, col) covers
// x in [-L/2 + col*h, -L/2 + (col+1)*h] and y in [L/2 - (row+1)*h, L/2 - row*h].
// For angle theta the detector axis is n = (cos theta, sin theta) and rays run
// along u = (-sin theta, cos theta); bin d sits at offset
// t_d = (d - (r0 - 1)/2) * detector_spacing along n.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexct/image.hpp"

namespace dexct {

/// A linear map R^cols -> R^rows with an exact transpose.
/// forward() and adjoint() overwrite their output.
template <class P>
concept LinearProjector = requires(const P& p, std::span<const double> in, std::span<double> out) {
    { p.rows() } -> std::convertible_to<std::size_t>;
    { p.cols() } -> std::convertible_to<std::size_t>;
    p.forward(in, out);
    p.adjoint(in, out);
};

struct Geometry {
    std::size_t n_pixels = 0;
    std::vector<double> angles_deg;
    std::size_t n_detectors = 0;
    double detector_spacing = 1.0;
    double pixel_size = 1.0;

    std::size_t n_angles() const { return angles_deg.size(); }
    std::size_t rows() const { return n_detectors * angles_deg.size(); }
    std::size_t cols() const { return n_pixels * n_pixels; }
    double extent() const { return static_cast<double>(n_pixels) * pixel_size; }

    /// Smallest bin count covering the image diagonal whose parity matches N,
    /// so that at 0 and 90 degrees the bin centres line up with pixel centres.
    static std::size_t default_detector_count(std::size_t n)
    {
        auto r0 = static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * static_cast<double>(n) - 1e-12));
        if (r0 % 2 != n % 2)
            ++r0;
        return std::max<std::size_t>(r0, 1);
    }

    /// n_angles angles start_deg + k*step_deg. The default step spreads them over [0, 180).
    static Geometry parallel_beam(std::size_t n, std::size_t n_angles, double pixel_size = 1.0,
                                  double start_deg = 0.0, double step_deg = 0.0)
    {
        Geometry geo;
        geo.n_pixels = n;
        geo.pixel_size = pixel_size;
        geo.n_detectors = default_detector_count(n);
        geo.detector_spacing = pixel_size;
        if (step_deg == 0.0 && n_angles > 0)
            step_deg = 180.0 / static_cast<double>(n_angles);
        geo.angles_deg.resize(n_angles);
        for (std::size_t k = 0; k < n_angles; ++k)
            geo.angles_deg[k] = start_deg + static_cast<double>(k) * step_deg;
        geo.validate();
        return geo;
    }

    void validate() const
    {
        if (n_pixels == 0)
            throw std::invalid_argument("Geometry: n_pixels must be >= 1");
        if (angles_deg.empty())
            throw std::invalid_argument("Geometry: at least one angle is required");
        if (n_detectors == 0)
            throw std::invalid_argument("Geometry: n_detectors must be >= 1");
        if (!(pixel_size > 0.0) || !(detector_spacing > 0.0))
            throw std::invalid_argument("Geometry: pixel_size and detector_spacing must be positive");
        for (double a : angles_deg)
            if (!(a >= 0.0 && a < 180.0))
                throw std::invalid_argument("Geometry: angles must lie in [0, 180) degrees");
        if (angles_deg.size() > 1) {
            const double step = angles_deg[1] - angles_deg[0];
            if (!(step > 0.0))
                throw std::invalid_argument("Geometry: angles must be strictly increasing");
            for (std::size_t k = 2; k < angles_deg.size(); ++k)
                if (std::abs((angles_deg[k] - angles_deg[k - 1]) - step) > 1e-9 * std::max(1.0, step))
                    throw std::invalid_argument("Geometry: angles must have constant spacing");
        }
        // The detector must see the whole projected footprint of the image square.
        const double span = static_cast<double>(n_detectors) * detector_spacing;
        for (double a : angles_deg) {
            const double th = a * std::numbers::pi / 180.0;
            const double footprint = extent() * (std::abs(std::cos(th)) + std::abs(std::sin(th)));
            if (span < footprint * (1.0 - 1e-12))
                throw std::invalid_argument("Geometry: detector of width " + std::to_string(span) +
                                            " truncates footprint " + std::to_string(footprint) +
                                            " at " + std::to_string(a) + " degrees");
        }
    }

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// System matrix A of a parallel-beam scan: entry (ray, pixel) is the length of
/// the ray inside the pixel. The intersections are traced once at construction
/// and kept in compressed-row form.
class ParallelBeamProjector {
public:
    explicit ParallelBeamProjector(Geometry geo) : geo_(std::move(geo))
    {
        geo_.validate();
        build();
    }

    /// Projector for an object rotated by rotation_deg: every angle of geo is
    /// shifted by the same amount, so projecting the rotated object reproduces
    /// the scan of the unrotated one. Shifted angles may leave [0, 180).
    static ParallelBeamProjector with_rotated_angles(Geometry geo, double rotation_deg)
    {
        geo.validate();
        for (double& a : geo.angles_deg)
            a += rotation_deg;
        ParallelBeamProjector p;
        p.geo_ = std::move(geo);
        p.build();
        return p;
    }

    const Geometry& geometry() const { return geo_; }
    std::size_t rows() const { return geo_.rows(); }
    std::size_t cols() const { return geo_.cols(); }
    std::size_t nonzeros() const { return length_.size(); }

    void forward(std::span<const double> image, std::span<double> sino) const
    {
        check_sizes(image.size(), sino.size(), "forward");
        for (std::size_t ray = 0; ray < sino.size(); ++ray) {
            double sum = 0.0;
            for (std::size_t k = row_start_[ray]; k < row_start_[ray + 1]; ++k)
                sum += length_[k] * image[col_index_[k]];
            sino[ray] = sum;
        }
    }

    void adjoint(std::span<const double> sino, std::span<double> image) const
    {
        check_sizes(image.size(), sino.size(), "adjoint");
        std::fill(image.begin(), image.end(), 0.0);
        for (std::size_t ray = 0; ray < sino.size(); ++ray) {
            const double v = sino[ray];
            if (v == 0.0)
                continue;
            for (std::size_t k = row_start_[ray]; k < row_start_[ray + 1]; ++k)
                image[col_index_[k]] += length_[k] * v;
        }
    }

    Sinogram forward(const Image& image) const
    {
        if (image.n != geo_.n_pixels)
            throw std::invalid_argument("radon_forward: image size " + std::to_string(image.n) +
                                        " does not match geometry size " + std::to_string(geo_.n_pixels));
        Sinogram sino(geo_.n_angles(), geo_.n_detectors);
        forward(image.span(), sino.span());
        return sino;
    }

    Image adjoint(const Sinogram& sino) const
    {
        if (sino.n_angles != geo_.n_angles() || sino.n_detectors != geo_.n_detectors)
            throw std::invalid_argument("radon_adjoint: sinogram shape does not match geometry");
        Image image(geo_.n_pixels);
        adjoint(sino.span(), image.span());
        return image;
    }

    /// ||A e_i||^2: sum of squared intersection lengths of all rays through pixel i.
    double column_norm_squared(std::size_t pixel) const
    {
        const std::size_t n = geo_.n_pixels;
        const double h = geo_.pixel_size;
        const double half = 0.5 * geo_.extent();
        const double cx = -half + (static_cast<double>(pixel % n) + 0.5) * h;
        const double cy = half - (static_cast<double>(pixel / n) + 0.5) * h;
        const double centre_bin = 0.5 * static_cast<double>(geo_.n_detectors - 1);
        double total = 0.0;
        for (std::size_t p = 0; p < geo_.n_angles(); ++p) {
            const double t = cx * cos_[p] + cy * sin_[p];
            const double reach = 0.5 * h * (std::abs(cos_[p]) + std::abs(sin_[p]));
            const double lo = std::floor((t - reach) / geo_.detector_spacing + centre_bin) - 1.0;
            const double hi = std::ceil((t + reach) / geo_.detector_spacing + centre_bin) + 1.0;
            const auto d0 = static_cast<std::ptrdiff_t>(std::max(lo, 0.0));
            const auto d1 = std::min(static_cast<std::ptrdiff_t>(hi),
                                     static_cast<std::ptrdiff_t>(geo_.n_detectors) - 1);
            for (std::ptrdiff_t d = d0; d <= d1; ++d) {
                double len_in_pixel = 0.0;
                trace(p, static_cast<std::size_t>(d), [&](std::size_t idx, double len) {
                    if (idx == pixel)
                        len_in_pixel += len;
                });
                total += len_in_pixel * len_in_pixel;
            }
        }
        return total;
    }

    /// Visit every (pixel index, intersection length) of ray (angle p, bin d).
    /// Crossings with vertical and horizontal grid lines are merged in order of
    /// the ray parameter; each segment is assigned to the pixel containing its midpoint.
    template <class Visitor>
    void trace(std::size_t p, std::size_t d, Visitor&& visit) const
    {
        constexpr double inf = std::numeric_limits<double>::infinity();
        constexpr double parallel_eps = 1e-12;
        const std::size_t n = geo_.n_pixels;
        const double h = geo_.pixel_size;
        const double half = 0.5 * geo_.extent();
        const double t = (static_cast<double>(d) - 0.5 * static_cast<double>(geo_.n_detectors - 1)) *
                         geo_.detector_spacing;
        const double ox = t * cos_[p];
        const double oy = t * sin_[p];
        const double ux = -sin_[p];
        const double uy = cos_[p];

        double lmin = -inf;
        double lmax = inf;
        if (!clip_slab(ox, ux, half, lmin, lmax) || !clip_slab(oy, uy, half, lmin, lmax))
            return;
        if (!(lmax > lmin))
            return;

        const auto nn = static_cast<std::ptrdiff_t>(n);
        // Next vertical grid line x = -half + ix*h and horizontal line y = -half + iy*h.
        const double x_in = ox + lmin * ux;
        const double y_in = oy + lmin * uy;
        std::ptrdiff_t ix = 0;
        std::ptrdiff_t iy = 0;
        std::ptrdiff_t sx = 0;
        std::ptrdiff_t sy = 0;
        if (std::abs(ux) > parallel_eps) {
            sx = ux > 0 ? 1 : -1;
            const double f = (x_in + half) / h;
            ix = ux > 0 ? static_cast<std::ptrdiff_t>(std::floor(f)) + 1
                        : static_cast<std::ptrdiff_t>(std::ceil(f)) - 1;
        }
        if (std::abs(uy) > parallel_eps) {
            sy = uy > 0 ? 1 : -1;
            const double f = (y_in + half) / h;
            iy = uy > 0 ? static_cast<std::ptrdiff_t>(std::floor(f)) + 1
                        : static_cast<std::ptrdiff_t>(std::ceil(f)) - 1;
        }
        auto crossing = [&](std::ptrdiff_t i, std::ptrdiff_t step, double o, double u) {
            if (step == 0 || i < 0 || i > nn)
                return inf;
            return (-half + static_cast<double>(i) * h - o) / u;
        };
        double next_x = crossing(ix, sx, ox, ux);
        double next_y = crossing(iy, sy, oy, uy);

        double lam = lmin;
        while (lam < lmax) {
            const double next = std::min({next_x, next_y, lmax});
            const double len = next - lam;
            if (len > 0.0) {
                const double mid = lam + 0.5 * len;
                const double px = ox + mid * ux;
                const double py = oy + mid * uy;
                const auto col = std::clamp<std::ptrdiff_t>(
                    static_cast<std::ptrdiff_t>(std::floor((px + half) / h)), 0, nn - 1);
                const auto row = std::clamp<std::ptrdiff_t>(
                    static_cast<std::ptrdiff_t>(std::floor((half - py) / h)), 0, nn - 1);
                visit(static_cast<std::size_t>(row * nn + col), len);
                lam = next;
            }
            if (next == next_x) {
                ix += sx;
                next_x = crossing(ix, sx, ox, ux);
            }
            if (next == next_y) {
                iy += sy;
                next_y = crossing(iy, sy, oy, uy);
            }
            if (next == lmax)
                break;
        }
    }

private:
    ParallelBeamProjector() = default;

    void build()
    {
        if (cols() > std::numeric_limits<std::uint32_t>::max())
            throw std::invalid_argument("ParallelBeamProjector: image too large for 32-bit pixel indices");
        cos_.resize(geo_.n_angles());
        sin_.resize(geo_.n_angles());
        for (std::size_t p = 0; p < geo_.n_angles(); ++p) {
            const double th = geo_.angles_deg[p] * std::numbers::pi / 180.0;
            cos_[p] = std::cos(th);
            sin_[p] = std::sin(th);
        }
        row_start_.reserve(rows() + 1);
        row_start_.push_back(0);
        for (std::size_t p = 0; p < geo_.n_angles(); ++p) {
            for (std::size_t d = 0; d < geo_.n_detectors; ++d) {
                trace(p, d, [&](std::size_t idx, double len) {
                    col_index_.push_back(static_cast<std::uint32_t>(idx));
                    length_.push_back(len);
                });
                row_start_.push_back(length_.size());
            }
        }
    }

    // Intersect parameter interval [lmin, lmax] with {lambda : |o + lambda*u| < half}.
    static bool clip_slab(double o, double u, double half, double& lmin, double& lmax)
    {
        if (std::abs(u) <= 1e-12)
            return std::abs(o) < half;
        double a = (-half - o) / u;
        double b = (half - o) / u;
        if (a > b)
            std::swap(a, b);
        lmin = std::max(lmin, a);
        lmax = std::min(lmax, b);
        return true;
    }

    void check_sizes(std::size_t image_size, std::size_t sino_size, const char* what) const
    {
        if (image_size != cols() || sino_size != rows())
            throw std::invalid_argument(std::string("ParallelBeamProjector::") + what +
                                        ": dimension mismatch (image " + std::to_string(image_size) +
                                        " vs " + std::to_string(cols()) + ", sinogram " +
                                        std::to_string(sino_size) + " vs " + std::to_string(rows()) + ")");
    }

    Geometry geo_;
    std::vector<double> cos_;
    std::vector<double> sin_;
    std::vector<std::size_t> row_start_;
    std::vector<std::uint32_t> col_index_;
    std::vector<double> length_;
};

static_assert(LinearProjector<ParallelBeamProjector>);

/// Zero sinogram shaped for projector p (a single row when p has no geometry).
template <LinearProjector P>
Sinogram make_sinogram(const P& p)
{
    if constexpr (requires { p.geometry().n_detectors; })
        return Sinogram(p.geometry().n_angles(), p.geometry().n_detectors);
    else
        return Sinogram(1, p.rows());
}

inline Sinogram radon_forward(const Image& image, const Geometry& geo)
{
    return ParallelBeamProjector(geo).forward(image);
}

inline Image radon_adjoint(const Sinogram& sino, const Geometry& geo)
{
    return ParallelBeamProjector(geo).adjoint(sino);
}

} // namespace dexct
