#pragma once

// File formats:
//  * binary container: 16-byte header ("DEXC", u32 version, u32 rows, u32 cols)
//    followed by rows*cols little-endian IEEE-754 doubles, row-major;
//  * CSV dump of the same matrix for debugging;
//  * binary PGM (P5), 8 or 16 bit, linearly scaled with min/max recorded in a comment.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexct/image.hpp"

namespace dexct {

inline constexpr std::array<char, 4> container_magic{'D', 'E', 'X', 'C'};
inline constexpr std::uint32_t container_version = 1;

struct Matrix {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<double> values;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v)
{
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(const unsigned char* b)
{
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& out, double v)
{
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(bits & 0xffu);
        bits >>= 8;
    }
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(const unsigned char* b)
{
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i)
        bits = (bits << 8) | b[i];
    return std::bit_cast<double>(bits);
}

inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {})
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode | std::ios::out | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

} // namespace detail

inline void write_container(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                            std::span<const double> values)
{
    if (values.size() != rows * cols)
        throw std::invalid_argument("write_container: value count does not match rows*cols");
    if (rows > std::numeric_limits<std::uint32_t>::max() || cols > std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("write_container: dimensions exceed u32");
    auto out = detail::open_out(path, std::ios::binary);
    out.write(container_magic.data(), 4);
    detail::put_u32(out, container_version);
    detail::put_u32(out, static_cast<std::uint32_t>(rows));
    detail::put_u32(out, static_cast<std::uint32_t>(cols));
    for (double v : values)
        detail::put_f64(out, v);
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

inline Matrix read_container(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), container_magic.data(), 4) != 0)
        throw std::runtime_error(path.string() + ": not a DEXC container");
    const std::uint32_t version = detail::get_u32(bytes.data() + 4);
    if (version != container_version)
        throw std::runtime_error(path.string() + ": unsupported container version " + std::to_string(version));
    Matrix m;
    m.rows = detail::get_u32(bytes.data() + 8);
    m.cols = detail::get_u32(bytes.data() + 12);
    const std::size_t count = static_cast<std::size_t>(m.rows) * m.cols;
    if (bytes.size() != 16 + 8 * count)
        throw std::runtime_error(path.string() + ": payload size does not match header " +
                                 std::to_string(m.rows) + "x" + std::to_string(m.cols));
    m.values.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        m.values[i] = detail::get_f64(bytes.data() + 16 + 8 * i);
    return m;
}

inline void save_image(const std::filesystem::path& path, const Image& img)
{
    write_container(path, img.n, img.n, img.span());
}

inline Image load_image(const std::filesystem::path& path)
{
    Matrix m = read_container(path);
    if (m.rows != m.cols)
        throw std::runtime_error(path.string() + ": image container must be square");
    return Image(m.rows, std::move(m.values));
}

inline void save_sinogram(const std::filesystem::path& path, const Sinogram& s)
{
    write_container(path, s.n_angles, s.n_detectors, s.span());
}

inline Sinogram load_sinogram(const std::filesystem::path& path)
{
    Matrix m = read_container(path);
    Sinogram s(m.rows, m.cols);
    s.values = std::move(m.values);
    return s;
}

/// 17 significant digits, enough to reproduce every double.
inline void write_csv(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const double> values)
{
    auto out = detail::open_out(path);
    out << std::setprecision(17);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c)
                out << ',';
            out << values[r * cols + c];
        }
        out << '\n';
    }
}

/// Linear scaling of [min, max] onto the full grey range. bits must be 8 or 16.
inline void write_pgm(const std::filesystem::path& path, const Image& img, int bits = 8)
{
    if (bits != 8 && bits != 16)
        throw std::invalid_argument("write_pgm: bits must be 8 or 16");
    const auto [lo_it, hi_it] = std::minmax_element(img.values.begin(), img.values.end());
    const double lo = img.values.empty() ? 0.0 : *lo_it;
    const double hi = img.values.empty() ? 0.0 : *hi_it;
    const unsigned maxval = bits == 8 ? 255u : 65535u;
    auto out = detail::open_out(path, std::ios::binary);
    std::ostringstream header;
    header << std::setprecision(17) << "P5\n# min=" << lo << " max=" << hi << '\n'
           << img.n << ' ' << img.n << '\n'
           << maxval << '\n';
    out << header.str();
    const double scale = hi > lo ? static_cast<double>(maxval) / (hi - lo) : 0.0;
    for (double v : img.values) {
        const auto q = static_cast<unsigned>(std::clamp(std::lround((v - lo) * scale), 0L, static_cast<long>(maxval)));
        if (bits == 8) {
            out.put(static_cast<char>(q));
        } else {
            out.put(static_cast<char>(q >> 8));
            out.put(static_cast<char>(q & 0xffu));
        }
    }
}

} // namespace dexct
