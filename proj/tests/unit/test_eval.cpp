#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"

using namespace dexct;

namespace {

Image structured(std::size_t n)
{
    Image img(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            img.at(r, c) = ((r / 4 + c / 4) % 2 == 0 ? 1.0 : 0.2) + 0.01 * static_cast<double>(c);
    return img;
}

} // namespace

TEST(L2Error, BasicCases)
{
    const Image truth = fixtures::random_image(8, 1);
    EXPECT_EQ(l2_error(truth, truth), 0.0);
    EXPECT_EQ(l2_error(Image(8), truth), 1.0);
    EXPECT_THROW(l2_error(truth, Image(8)), std::invalid_argument);
    EXPECT_THROW(l2_error(Image(4), truth), std::invalid_argument);

    const Image recon = fixtures::random_image(8, 2);
    long double diff = 0.0L;
    long double norm = 0.0L;
    for (std::size_t i = 64; i-- > 0;) {
        diff += (static_cast<long double>(recon.values[i]) - truth.values[i]) *
                (static_cast<long double>(recon.values[i]) - truth.values[i]);
        norm += static_cast<long double>(truth.values[i]) * truth.values[i];
    }
    const double expected = static_cast<double>(std::sqrt(diff) / std::sqrt(norm));
    EXPECT_LE(std::abs(l2_error(recon, truth) - expected) / expected, 1e-14);
}

TEST(Ssim, IdenticalImagesScoreOne)
{
    const Image img = structured(16);
    EXPECT_NEAR(ssim(img, img), 1.0, 1e-15);
}

TEST(Ssim, InvertedImageScoresLow)
{
    const Image img = structured(32);
    double peak = 0.0;
    for (double v : img.values)
        peak = std::max(peak, v);
    Image inverted(32);
    for (std::size_t i = 0; i < img.pixels(); ++i)
        inverted.values[i] = peak - img.values[i];
    EXPECT_LT(ssim(inverted, img), 0.5);
}

TEST(Ssim, ConstantShiftReducesToLuminanceTerm)
{
    const Image truth(2, {0.0, 1.0, 2.0, 3.0});
    Image shifted = truth;
    for (double& v : shifted.values)
        v += 0.5;
    SsimOptions opt;
    opt.window = 2;
    const double range = 3.0;
    const double c1 = (opt.k1 * range) * (opt.k1 * range);
    const double mu1 = 2.0;
    const double mu2 = 1.5;
    const double luminance = (2.0 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1);
    const double value = ssim(shifted, truth, opt);
    EXPECT_LT(value, 1.0);
    EXPECT_NEAR(value, luminance, 1e-14);
}

TEST(Segmentation, ExtremeCounts)
{
    const Image img = fixtures::random_image(6, 3);
    const Segmentation none = segment_by_fraction(img, 0);
    EXPECT_EQ(count_nonzero(none.mask), 0u);
    EXPECT_TRUE(std::isinf(none.threshold));
    const Segmentation all = segment_by_fraction(img, 36);
    EXPECT_EQ(count_nonzero(all.mask), 36u);
    EXPECT_THROW(segment_by_fraction(img, 37), std::invalid_argument);
}

TEST(Segmentation, LargestValuesAgainstFullSort)
{
    const Image img = fixtures::random_image(8, 4);
    std::vector<double> sorted = img.values;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const Segmentation seg = segment_by_fraction(img, 5);
    EXPECT_EQ(seg.threshold, sorted[4]);
    for (std::size_t i = 0; i < img.pixels(); ++i)
        EXPECT_EQ(seg.mask.values[i] == 1.0, img.values[i] >= sorted[4]);
}

TEST(Segmentation, TiesResolvedInPixelOrder)
{
    const Image img(2, {0.5, 0.9, 0.5, 0.5});
    const Segmentation seg = segment_by_fraction(img, 3);
    EXPECT_EQ(seg.mask.values, (std::vector<double>{1, 1, 1, 0}));
    EXPECT_EQ(seg.count, 3u);
}

TEST(Segmentation, InvariantUnderMonotoneTransform)
{
    const Image img = fixtures::random_image(8, 5, -2.0, 2.0);
    Image transformed = img;
    for (double& v : transformed.values)
        v = std::exp(3.0 * v) + 7.0;
    for (std::size_t k : {1u, 10u, 33u})
        EXPECT_EQ(segment_by_fraction(img, k).mask.values, segment_by_fraction(transformed, k).mask.values);
}

TEST(Misclassification, Counts)
{
    const ImagePair truth = generate({PhantomKind::HY, 16, 0, {}, {}});
    const Image t1 = truth.first_image();
    const Image t2 = truth.second_image();
    EXPECT_EQ(misclassification(t1, t2, t1, t2), 0.0);

    Image flipped = t1;
    flipped.values[37] = 1.0 - flipped.values[37];
    EXPECT_EQ(misclassification(flipped, t2, t1, t2), 1.0 / 256.0);
    EXPECT_EQ(misclassification(flipped, t1), 1.0 / 256.0);

    std::size_t differing = 0;
    for (std::size_t i = 0; i < 256; ++i)
        differing += t1.values[i] != t2.values[i];
    EXPECT_EQ(misclassification(t2, t1, t1, t2), static_cast<double>(differing) / 256.0);
}

TEST(Misclassification, PixelCountedOnceAndSymmetric)
{
    const Image t1(2, {1, 0, 0, 0});
    const Image t2(2, {0, 1, 0, 0});
    const Image s1(2, {0, 1, 0, 0});
    const Image s2(2, {1, 0, 0, 0});
    EXPECT_EQ(misclassification(s1, s2, t1, t2), 0.5);
    EXPECT_EQ(misclassification(s2, s1, t2, t1), misclassification(s1, s2, t1, t2));
}

TEST(Evaluate, GeometricMeanAndCsv)
{
    const ImagePair truth = generate({PhantomKind::HY, 16, 0, {}, {}});
    const ImagePair recon = fixtures::random_pair(16, 6);
    const Evaluation e = evaluate(recon, truth);
    EXPECT_EQ(e.metrics.e_mean, std::sqrt(e.metrics.l2_error_1 * e.metrics.l2_error_2));
    EXPECT_GE(e.metrics.misclassification, 0.0);
    EXPECT_LE(e.metrics.misclassification, 1.0);
    EXPECT_EQ(e.seg1.count, count_nonzero(truth.first_image()));

    std::ostringstream row;
    e.metrics.write_csv_row(row);
    const std::string line = row.str();
    const std::string header = MetricsReport::csv_header;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::count(header.begin(), header.end(), ','));
}

TEST(SelectAlpha, PicksLowestErrorAndBreaksTiesTowardSmallerAlpha)
{
    const ImagePair truth = fixtures::random_pair(4, 7, 0.5, 1.0);
    auto scaled = [&](double alpha) {
        ImagePair g = truth;
        for (double& v : g.stacked())
            v *= 1.0 + std::abs(alpha - 2.0);
        return g;
    };
    EXPECT_EQ(select_alpha({5.0}, scaled, truth).alpha, 5.0);
    EXPECT_EQ(select_alpha({5.0, 2.0, 4.0}, scaled, truth).alpha, 2.0);
    EXPECT_EQ(select_alpha({3.0, 1.0}, scaled, truth).alpha, 1.0);
    EXPECT_EQ(select_alpha({3.0, 1.0}, scaled, truth, 2).alpha, 1.0);
    EXPECT_THROW(select_alpha({}, scaled, truth), std::invalid_argument);
    auto failing = [](double) -> ImagePair { throw std::runtime_error("boom"); };
    EXPECT_THROW(select_alpha({1.0, 2.0}, failing, truth, 2), std::runtime_error);
}

TEST(SelectAlpha, ReproducibleParameterChoice)
{
    const std::size_t n = 64;
    const auto geo = make_geometries(n, 65, ScanProtocol::SAME_OPERATOR);
    const ImagePair truth = generate({PhantomKind::HY, n, 0, {}, {}});
    const SinogramPair m = simulate_measurement(truth, AttenuationCoeffs{}, geo.low, geo.high, 0.01, 45.0, 8);
    const std::vector<double> grid{50.0, 150.0, 500.0};
    const AlphaSelection a = select_alpha(m, truth, AttenuationCoeffs{}, geo, grid, Method::IP);
    const AlphaSelection b = select_alpha(m, truth, AttenuationCoeffs{}, geo, grid, Method::IP, {}, {}, 3);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.e_mean, b.e_mean);
}
