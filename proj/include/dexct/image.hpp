#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dexct {

/// Square N x N image, stored row-major: index = row * N + col.
struct Image {
    std::size_t n = 0;
    std::vector<double> values;

    Image() = default;
    explicit Image(std::size_t size, double fill = 0.0) : n(size), values(size * size, fill) {}
    Image(std::size_t size, std::vector<double> data) : n(size), values(std::move(data))
    {
        if (values.size() != n * n)
            throw std::invalid_argument("Image: expected " + std::to_string(n * n) +
                                        " values, got " + std::to_string(values.size()));
    }

    std::size_t pixels() const { return values.size(); }
    double& at(std::size_t row, std::size_t col) { return values[row * n + col]; }
    double at(std::size_t row, std::size_t col) const { return values[row * n + col]; }

    std::span<double> span() { return values; }
    std::span<const double> span() const { return values; }
};

/// Projection data for one energy: n_angles rows of n_detectors bins, angle-major.
struct Sinogram {
    std::size_t n_angles = 0;
    std::size_t n_detectors = 0;
    std::vector<double> values;

    Sinogram() = default;
    Sinogram(std::size_t angles, std::size_t detectors, double fill = 0.0)
        : n_angles(angles), n_detectors(detectors), values(angles * detectors, fill)
    {
    }

    std::size_t size() const { return values.size(); }
    double& at(std::size_t angle, std::size_t bin) { return values[angle * n_detectors + bin]; }
    double at(std::size_t angle, std::size_t bin) const { return values[angle * n_detectors + bin]; }

    std::span<double> span() { return values; }
    std::span<const double> span() const { return values; }
};

} // namespace dexct
