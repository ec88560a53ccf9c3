#pragma once

// Two-material binary test objects. Shapes are described in normalised
// coordinates (x, y) in [-1/2, 1/2]^2 with y pointing up and sampled at pixel
// centres. All content stays inside the disc of radius 0.45 so that a rotation
// about the image centre never pushes material off the grid.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexct/io.hpp"
#include "dexct/model.hpp"
#include "dexct/random.hpp"

namespace dexct {

enum class PhantomKind { HY, BONE, EGYPT_LIKE, CIRCUIT_LIKE, FROM_FILES };

inline std::string to_string(PhantomKind k)
{
    switch (k) {
    case PhantomKind::HY:
        return "hy";
    case PhantomKind::BONE:
        return "bone";
    case PhantomKind::EGYPT_LIKE:
        return "egypt_like";
    case PhantomKind::CIRCUIT_LIKE:
        return "circuit_like";
    case PhantomKind::FROM_FILES:
        return "from_files";
    }
    throw std::invalid_argument("unknown phantom kind");
}

inline PhantomKind parse_phantom_kind(std::string name)
{
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) {
        return ch == '-' ? '_' : static_cast<char>(std::tolower(ch));
    });
    for (auto k : {PhantomKind::HY, PhantomKind::BONE, PhantomKind::EGYPT_LIKE, PhantomKind::CIRCUIT_LIKE,
                   PhantomKind::FROM_FILES})
        if (to_string(k) == name)
            return k;
    throw std::invalid_argument("unknown phantom kind '" + name +
                                "' (expected hy, bone, egypt_like, circuit_like or from_files)");
}

struct PhantomSpec {
    PhantomKind kind = PhantomKind::HY;
    std::size_t size = 128;
    std::uint64_t seed = 0;
    /// Container files for FROM_FILES.
    std::filesystem::path material1_path;
    std::filesystem::path material2_path;
};

/// Throws unless both images are 0/1-valued with disjoint supports.
inline void validate_phantom(const ImagePair& g)
{
    const auto a = g.first();
    const auto b = g.second();
    const std::size_t n = g.size();
    std::size_t overlap = 0;
    std::optional<std::size_t> first_overlap;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (double v : {a[i], b[i]})
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("phantom pixel (" + std::to_string(i / n) + ", " + std::to_string(i % n) +
                                            ") has non-binary value " + std::to_string(v));
        if (a[i] != 0.0 && b[i] != 0.0) {
            ++overlap;
            if (!first_overlap)
                first_overlap = i;
        }
    }
    if (overlap)
        throw std::invalid_argument("phantom materials overlap in " + std::to_string(overlap) +
                                    " pixels, first at (" + std::to_string(*first_overlap / n) + ", " +
                                    std::to_string(*first_overlap % n) + ")");
}

/// nnz(img) / N^2.
inline double material_fraction(const Image& img)
{
    if (img.values.empty())
        return 0.0;
    const auto nnz = std::count_if(img.values.begin(), img.values.end(), [](double v) { return v != 0.0; });
    return static_cast<double>(nnz) / static_cast<double>(img.values.size());
}

namespace phantom_detail {

using Shape = std::function<bool(double, double)>;

struct Canvas {
    std::size_t n;
    Image m1;
    Image m2;

    explicit Canvas(std::size_t size) : n(size), m1(size), m2(size) {}

    /// Minimum stroke width: one pixel.
    double min_width() const { return 1.0 / static_cast<double>(n); }

    template <class F>
    void for_each(F&& f)
    {
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(n) - 0.5;
                const double y = 0.5 - (static_cast<double>(r) + 0.5) / static_cast<double>(n);
                f(r, c, x, y);
            }
    }

    /// Set material 1 where shape holds.
    void paint1(const Shape& s)
    {
        for_each([&](std::size_t r, std::size_t c, double x, double y) {
            if (s(x, y)) {
                m1.at(r, c) = 1.0;
                m2.at(r, c) = 0.0;
            }
        });
    }

    /// Set material 2 where shape holds, replacing material 1.
    void paint2(const Shape& s)
    {
        for_each([&](std::size_t r, std::size_t c, double x, double y) {
            if (s(x, y)) {
                m2.at(r, c) = 1.0;
                m1.at(r, c) = 0.0;
            }
        });
    }

    /// Clear both materials where shape holds.
    void erase(const Shape& s)
    {
        for_each([&](std::size_t r, std::size_t c, double x, double y) {
            if (s(x, y)) {
                m1.at(r, c) = 0.0;
                m2.at(r, c) = 0.0;
            }
        });
    }

    ImagePair result() const { return ImagePair(m1, m2); }
};

inline Shape rect(double x0, double y0, double x1, double y1)
{
    return [=](double x, double y) { return x >= x0 && x <= x1 && y >= y0 && y <= y1; };
}

inline Shape segment(double ax, double ay, double bx, double by, double width)
{
    return [=](double x, double y) {
        const double dx = bx - ax;
        const double dy = by - ay;
        const double len2 = dx * dx + dy * dy;
        double t = len2 > 0.0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double px = ax + t * dx - x;
        const double py = ay + t * dy - y;
        return px * px + py * py <= 0.25 * width * width;
    };
}

inline Shape disc(double cx, double cy, double radius)
{
    return [=](double x, double y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius; };
}

inline Shape ring(double cx, double cy, double r_in, double r_out)
{
    return [=](double x, double y) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        return d2 >= r_in * r_in && d2 <= r_out * r_out;
    };
}

/// Closed curve r(theta) = radius * (1 + sum_k a_k cos(k theta + p_k)).
struct Blob {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    std::vector<std::array<double, 3>> modes; // (k, amplitude, phase)

    double boundary(double theta) const
    {
        double r = 1.0;
        for (const auto& m : modes)
            r += m[1] * std::cos(m[0] * theta + m[2]);
        return radius * r;
    }

    bool contains(double x, double y, double scale = 1.0) const
    {
        const double dx = x - cx;
        const double dy = y - cy;
        return std::hypot(dx, dy) <= scale * boundary(std::atan2(dy, dx));
    }
};

inline Blob random_blob(Rng& rng, double cx, double cy, double radius, double roughness)
{
    Blob b{cx, cy, radius, {}};
    for (int k = 2; k <= 5; ++k)
        b.modes.push_back({static_cast<double>(k), roughness * rng.uniform(0.2, 1.0) / k,
                           rng.uniform(0.0, 2.0 * std::numbers::pi)});
    return b;
}

/// Letters H and Y (material 2) hollowed out of a plastic slab (material 1).
inline ImagePair make_hy(std::size_t n)
{
    Canvas cv(n);
    cv.paint1(rect(-0.34, -0.24, 0.34, 0.24));
    const double w = std::max(0.07, 1.5 * cv.min_width());
    // H in the left half.
    cv.paint2(rect(-0.27, -0.16, -0.27 + w, 0.16));
    cv.paint2(rect(-0.06 - w, -0.16, -0.06, 0.16));
    cv.paint2(rect(-0.27, -0.5 * w, -0.06, 0.5 * w));
    // Y in the right half.
    cv.paint2(segment(0.05 + 0.5 * w, 0.16 - 0.5 * w, 0.165, 0.0, w));
    cv.paint2(segment(0.28 - 0.5 * w, 0.16 - 0.5 * w, 0.165, 0.0, w));
    cv.paint2(rect(0.165 - 0.5 * w, -0.16, 0.165 + 0.5 * w, 0.0));
    return cv.result();
}

/// Cross-section of a bone: cortical shell (material 1) around marrow (material 2),
/// with a few trabecular islands inside the marrow.
inline ImagePair make_bone(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Canvas cv(n);
    Blob outer = random_blob(rng, rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.36, 0.12);
    Blob inner = outer;
    inner.radius = outer.radius * rng.uniform(0.6, 0.68);
    cv.paint1([&](double x, double y) { return outer.contains(x, y) && std::hypot(x, y) <= 0.45; });
    cv.paint2([&](double x, double y) { return inner.contains(x, y); });
    const std::size_t islands = 3 + rng.index(4);
    for (std::size_t i = 0; i < islands; ++i) {
        const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double rr = rng.uniform(0.0, 0.6) * inner.boundary(th);
        const double size = std::max(rng.uniform(0.015, 0.035), cv.min_width());
        cv.paint1(disc(inner.cx + rr * std::cos(th), inner.cy + rr * std::sin(th), size));
    }
    return cv.result();
}

/// A sheet (material 1) covered in columns of ink glyphs (material 2).
inline ImagePair make_egypt_like(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Canvas cv(n);
    const double half_w = 0.3;
    const double half_h = 0.3;
    cv.paint1(rect(-half_w, -half_h, half_w, half_h));
    const double stroke = std::max(0.018, cv.min_width());
    const int columns = 5;
    const int rows = 6;
    const double cell_w = 2.0 * half_w / columns;
    const double cell_h = 2.0 * half_h / rows;
    for (int i = 0; i < columns; ++i) {
        // Vertical ruling between glyph columns.
        if (i > 0)
            cv.paint2(segment(-half_w + i * cell_w, -half_h + 0.02, -half_w + i * cell_w, half_h - 0.02, 0.6 * stroke));
        for (int j = 0; j < rows; ++j) {
            const double cx = -half_w + (i + 0.5) * cell_w;
            const double cy = -half_h + (j + 0.5) * cell_h;
            const double ex = 0.32 * cell_w;
            const double ey = 0.32 * cell_h;
            switch (rng.index(5)) {
            case 0: // eye-like ring with pupil
                cv.paint2(ring(cx, cy, ey * 0.55, ey * 0.55 + stroke));
                cv.paint2(disc(cx, cy, 0.35 * ey));
                break;
            case 1: // bird-like zigzag
                cv.paint2(segment(cx - ex, cy + ey, cx, cy - ey, stroke));
                cv.paint2(segment(cx, cy - ey, cx + ex, cy + ey, stroke));
                break;
            case 2: // ankh-like cross with loop
                cv.paint2(segment(cx, cy - ey, cx, cy + 0.2 * ey, stroke));
                cv.paint2(segment(cx - ex, cy + 0.2 * ey, cx + ex, cy + 0.2 * ey, stroke));
                cv.paint2(ring(cx, cy + 0.6 * ey, 0.25 * ey, 0.25 * ey + stroke));
                break;
            case 3: // water ripple
                for (int k = -1; k <= 1; ++k)
                    cv.paint2(segment(cx - ex, cy + k * 0.6 * ey, cx + ex, cy + k * 0.6 * ey + 0.3 * ey, stroke));
                break;
            default: // solid block sign
                cv.paint2(rect(cx - 0.6 * ex, cy - 0.4 * ey, cx + 0.6 * ex, cy + 0.4 * ey));
                cv.erase(rect(cx - 0.25 * ex, cy - 0.1 * ey, cx + 0.25 * ex, cy + 0.1 * ey));
                cv.paint1(rect(cx - 0.25 * ex, cy - 0.1 * ey, cx + 0.25 * ex, cy + 0.1 * ey));
                break;
            }
        }
    }
    return cv.result();
}

/// A board (material 1) with thin Manhattan traces and pads (material 2).
inline ImagePair make_circuit_like(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Canvas cv(n);
    const double half = 0.3;
    cv.paint1(rect(-half, -half, half, half));
    const double trace = std::max(0.012, cv.min_width());
    const int grid = 8;
    const double pitch = 2.0 * (half - 0.03) / grid;
    auto node = [&](int i, int j) {
        return std::array<double, 2>{-half + 0.03 + (i + 0.5) * pitch, -half + 0.03 + (j + 0.5) * pitch};
    };
    const std::size_t nets = 14;
    for (std::size_t k = 0; k < nets; ++k) {
        const int i0 = static_cast<int>(rng.index(grid));
        const int j0 = static_cast<int>(rng.index(grid));
        const int i1 = static_cast<int>(rng.index(grid));
        const int j1 = static_cast<int>(rng.index(grid));
        const auto a = node(i0, j0);
        const auto b = node(i1, j1);
        // L-shaped route, horizontal leg first or second.
        const bool horizontal_first = rng.uniform() < 0.5;
        const std::array<double, 2> corner = horizontal_first ? std::array<double, 2>{b[0], a[1]}
                                                              : std::array<double, 2>{a[0], b[1]};
        cv.paint2(segment(a[0], a[1], corner[0], corner[1], trace));
        cv.paint2(segment(corner[0], corner[1], b[0], b[1], trace));
        const double pad = std::max(0.018, cv.min_width());
        cv.paint2(rect(a[0] - pad, a[1] - pad, a[0] + pad, a[1] + pad));
        cv.paint2(rect(b[0] - pad, b[1] - pad, b[0] + pad, b[1] + pad));
    }
    // A couple of chips: solid material-2 bodies with material-1 windows.
    for (int k = 0; k < 2; ++k) {
        const auto c = node(1 + static_cast<int>(rng.index(grid - 2)), 1 + static_cast<int>(rng.index(grid - 2)));
        cv.paint2(rect(c[0] - 0.6 * pitch, c[1] - 0.35 * pitch, c[0] + 0.6 * pitch, c[1] + 0.35 * pitch));
        cv.paint1(rect(c[0] - 0.3 * pitch, c[1] - 0.1 * pitch, c[0] + 0.3 * pitch, c[1] + 0.1 * pitch));
    }
    return cv.result();
}

} // namespace phantom_detail

inline ImagePair load_phantom(const std::filesystem::path& material1, const std::filesystem::path& material2,
                              std::size_t expected_size = 0)
{
    const Image a = load_image(material1);
    const Image b = load_image(material2);
    if (a.n != b.n)
        throw std::invalid_argument("phantom files differ in size: " + std::to_string(a.n) + " vs " +
                                    std::to_string(b.n));
    if (expected_size != 0 && a.n != expected_size)
        throw std::invalid_argument("phantom files are " + std::to_string(a.n) + " pixels wide, expected " +
                                    std::to_string(expected_size));
    ImagePair g(a, b);
    validate_phantom(g);
    return g;
}

inline void save_phantom(const std::filesystem::path& material1, const std::filesystem::path& material2,
                         const ImagePair& g)
{
    save_image(material1, g.first_image());
    save_image(material2, g.second_image());
}

/// Deterministic in (kind, size, seed). HY ignores the seed.
inline ImagePair generate(const PhantomSpec& spec)
{
    if (spec.kind != PhantomKind::FROM_FILES && spec.size < 8)
        throw std::invalid_argument("phantom size must be at least 8");
    // Below 32 pixels the one-pixel strokes swamp the glyphs and traces.
    if ((spec.kind == PhantomKind::EGYPT_LIKE || spec.kind == PhantomKind::CIRCUIT_LIKE) && spec.size < 32)
        throw std::invalid_argument(to_string(spec.kind) + " phantom needs at least 32 pixels, got " +
                                    std::to_string(spec.size));
    ImagePair g;
    switch (spec.kind) {
    case PhantomKind::HY:
        g = phantom_detail::make_hy(spec.size);
        break;
    case PhantomKind::BONE:
        g = phantom_detail::make_bone(spec.size, spec.seed);
        break;
    case PhantomKind::EGYPT_LIKE:
        g = phantom_detail::make_egypt_like(spec.size, spec.seed);
        break;
    case PhantomKind::CIRCUIT_LIKE:
        g = phantom_detail::make_circuit_like(spec.size, spec.seed);
        break;
    case PhantomKind::FROM_FILES:
        return load_phantom(spec.material1_path, spec.material2_path, spec.size);
    }
    validate_phantom(g);
    return g;
}

} // namespace dexct
