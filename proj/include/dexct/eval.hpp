#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dexct/io.hpp"
#include "dexct/model.hpp"

namespace dexct {

namespace detail {

inline void check_same_size(const Image& a, const Image& b, const char* what)
{
    if (a.n != b.n || a.values.size() != b.values.size())
        throw std::invalid_argument(std::string(what) + ": images differ in size (" + std::to_string(a.n) + " vs " +
                                    std::to_string(b.n) + ")");
}

} // namespace detail

/// ||truth - recon|| / ||truth||.
inline double l2_error(const Image& recon, const Image& truth)
{
    detail::check_same_size(recon, truth, "l2_error");
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < truth.values.size(); ++i) {
        const double d = truth.values[i] - recon.values[i];
        diff += d * d;
        norm += truth.values[i] * truth.values[i];
    }
    if (norm == 0.0)
        throw std::invalid_argument("l2_error: reference image is zero");
    return std::sqrt(diff / norm);
}

struct SsimOptions {
    /// Side of the square window, clamped to the image size.
    std::size_t window = 8;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM over all window positions (stride 1, uniform weights). The
/// dynamic range is max(truth) - min(truth), or 1 for a constant reference.
inline double ssim(const Image& recon, const Image& truth, const SsimOptions& opt = {})
{
    detail::check_same_size(recon, truth, "ssim");
    if (opt.window == 0)
        throw std::invalid_argument("ssim: window must be positive");
    const std::size_t n = truth.n;
    const std::size_t w = std::min(opt.window, n);
    const auto [lo, hi] = std::minmax_element(truth.values.begin(), truth.values.end());
    const double range = *hi > *lo ? *hi - *lo : 1.0;
    const double c1 = (opt.k1 * range) * (opt.k1 * range);
    const double c2 = (opt.k2 * range) * (opt.k2 * range);
    const double count = static_cast<double>(w * w);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t r0 = 0; r0 + w <= n; ++r0) {
        for (std::size_t c0 = 0; c0 + w <= n; ++c0) {
            double sx = 0.0, sy = 0.0;
            for (std::size_t r = r0; r < r0 + w; ++r)
                for (std::size_t c = c0; c < c0 + w; ++c) {
                    sx += recon.at(r, c);
                    sy += truth.at(r, c);
                }
            const double mx = sx / count;
            const double my = sy / count;
            double vx = 0.0, vy = 0.0, cxy = 0.0;
            for (std::size_t r = r0; r < r0 + w; ++r)
                for (std::size_t c = c0; c < c0 + w; ++c) {
                    const double dx = recon.at(r, c) - mx;
                    const double dy = truth.at(r, c) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cxy += dx * dy;
                }
            vx /= count;
            vy /= count;
            cxy /= count;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

struct Segmentation {
    Image mask;
    /// Value of the target_count-th largest pixel (+inf when target_count = 0).
    double threshold = 0.0;
    std::size_t count = 0;
};

/// Marks exactly target_count pixels: the largest values, ties broken by pixel order.
inline Segmentation segment_by_fraction(const Image& recon, std::size_t target_count)
{
    const std::size_t total = recon.values.size();
    if (target_count > total)
        throw std::invalid_argument("segment_by_fraction: target count " + std::to_string(target_count) +
                                    " exceeds pixel count " + std::to_string(total));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return recon.values[a] > recon.values[b]; });
    Segmentation seg{Image(recon.n), std::numeric_limits<double>::infinity(), target_count};
    for (std::size_t k = 0; k < target_count; ++k)
        seg.mask.values[order[k]] = 1.0;
    if (target_count > 0)
        seg.threshold = recon.values[order[target_count - 1]];
    return seg;
}

/// Fraction of pixels where seg != truth.
inline double misclassification(const Image& seg, const Image& truth)
{
    detail::check_same_size(seg, truth, "misclassification");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.values.size(); ++i)
        wrong += (seg.values[i] != 0.0) != (truth.values[i] != 0.0);
    return static_cast<double>(wrong) / static_cast<double>(truth.values.size());
}

/// Fraction of pixels whose label pair (seg1, seg2) differs from (truth1, truth2).
inline double misclassification(const Image& seg1, const Image& seg2, const Image& truth1, const Image& truth2)
{
    detail::check_same_size(seg1, truth1, "misclassification");
    detail::check_same_size(seg2, truth2, "misclassification");
    detail::check_same_size(seg1, seg2, "misclassification");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth1.values.size(); ++i) {
        const bool bad1 = (seg1.values[i] != 0.0) != (truth1.values[i] != 0.0);
        const bool bad2 = (seg2.values[i] != 0.0) != (truth2.values[i] != 0.0);
        wrong += bad1 || bad2;
    }
    return static_cast<double>(wrong) / static_cast<double>(truth1.values.size());
}

struct MetricsReport {
    double l2_error_1 = 0.0;
    double l2_error_2 = 0.0;
    double e_mean = 0.0;
    double ssim_1 = 0.0;
    double ssim_2 = 0.0;
    /// Joint pixel-pair rate.
    double misclassification = 0.0;
    double misclassification_1 = 0.0;
    double misclassification_2 = 0.0;
    double threshold_1 = 0.0;
    double threshold_2 = 0.0;

    static constexpr const char* csv_header = "l2_error_1,l2_error_2,e_mean,ssim_1,ssim_2,misclassification,"
                                              "misclassification_1,misclassification_2,threshold_1,threshold_2";

    void write_csv_row(std::ostream& out) const
    {
        out << std::setprecision(17) << l2_error_1 << ',' << l2_error_2 << ',' << e_mean << ',' << ssim_1 << ','
            << ssim_2 << ',' << misclassification << ',' << misclassification_1 << ',' << misclassification_2 << ','
            << threshold_1 << ',' << threshold_2 << '\n';
    }

    void write_csv(const std::filesystem::path& path) const
    {
        auto out = detail::open_out(path);
        out << csv_header << '\n';
        write_csv_row(out);
    }
};

inline std::size_t count_nonzero(const Image& img)
{
    return static_cast<std::size_t>(
        std::count_if(img.values.begin(), img.values.end(), [](double v) { return v != 0.0; }));
}

struct Evaluation {
    MetricsReport metrics;
    Segmentation seg1;
    Segmentation seg2;
};

/// Full comparison against a binary ground truth. Each reconstruction is
/// segmented to the pixel count of its true material.
inline Evaluation evaluate(const ImagePair& recon, const ImagePair& truth, const SsimOptions& opt = {})
{
    const Image r1 = recon.first_image();
    const Image r2 = recon.second_image();
    const Image t1 = truth.first_image();
    const Image t2 = truth.second_image();
    Evaluation e{{}, segment_by_fraction(r1, count_nonzero(t1)), segment_by_fraction(r2, count_nonzero(t2))};
    MetricsReport& m = e.metrics;
    m.l2_error_1 = l2_error(r1, t1);
    m.l2_error_2 = l2_error(r2, t2);
    m.e_mean = std::sqrt(m.l2_error_1 * m.l2_error_2);
    m.ssim_1 = ssim(r1, t1, opt);
    m.ssim_2 = ssim(r2, t2, opt);
    m.misclassification = misclassification(e.seg1.mask, e.seg2.mask, t1, t2);
    m.misclassification_1 = misclassification(e.seg1.mask, t1);
    m.misclassification_2 = misclassification(e.seg2.mask, t2);
    m.threshold_1 = e.seg1.threshold;
    m.threshold_2 = e.seg2.threshold;
    return e;
}

struct AlphaSelection {
    double alpha = 0.0;
    /// E_mean per candidate, in input order.
    std::vector<double> e_mean;
};

/// Runs reconstruct(alpha) for every candidate and returns the one with the
/// smallest E_mean = sqrt(E1 E2); ties go to the smaller alpha. Candidates are
/// evaluated on up to `workers` threads; the result does not depend on it.
inline AlphaSelection select_alpha(const std::vector<double>& alphas,
                                   const std::function<ImagePair(double)>& reconstruct, const ImagePair& truth,
                                   std::size_t workers = 1)
{
    if (alphas.empty())
        throw std::invalid_argument("select_alpha: no candidates");
    AlphaSelection out;
    out.e_mean.assign(alphas.size(), 0.0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < alphas.size(); i = next++) {
            try {
                const ImagePair g = reconstruct(alphas[i]);
                const double e1 = l2_error(g.first_image(), truth.first_image());
                const double e2 = l2_error(g.second_image(), truth.second_image());
                out.e_mean[i] = std::sqrt(e1 * e2);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, alphas.size());
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back(work);
    }
    if (failure)
        std::rethrow_exception(failure);
    std::size_t best = 0;
    for (std::size_t i = 1; i < alphas.size(); ++i)
        if (out.e_mean[i] < out.e_mean[best] || (out.e_mean[i] == out.e_mean[best] && alphas[i] < alphas[best]))
            best = i;
    out.alpha = alphas[best];
    return out;
}

} // namespace dexct
