#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "dense.hpp"
#include "fixtures.hpp"

using namespace dexct;

namespace {

double adjoint_defect(const ParallelBeamProjector& a, std::uint64_t seed)
{
    const auto x = fixtures::random_vector(a.cols(), seed);
    const auto y = fixtures::random_vector(a.rows(), seed + 1000);
    std::vector<double> ax(a.rows()), aty(a.cols());
    a.forward(x, ax);
    a.adjoint(y, aty);
    return std::abs(dot(ax, y) - dot(x, aty)) / (std::sqrt(dot(ax, ax)) * std::sqrt(dot(y, y)));
}

Eigen::MatrixXd matrix_free_dense(const ParallelBeamProjector& a)
{
    return oracle::assemble(a.rows(), a.cols(), [&](auto x, auto y) { a.forward(x, y); });
}

} // namespace

TEST(Geometry, DetectorCountCoversDiagonalWithMatchingParity)
{
    EXPECT_EQ(Geometry::default_detector_count(16), 24u);
    EXPECT_EQ(Geometry::default_detector_count(17), 25u);
    EXPECT_EQ(Geometry::default_detector_count(1), 3u);
    for (std::size_t n : {4u, 8u, 31u, 64u, 128u}) {
        const std::size_t r0 = Geometry::default_detector_count(n);
        EXPECT_GE(static_cast<double>(r0), std::sqrt(2.0) * static_cast<double>(n));
        EXPECT_EQ(r0 % 2, n % 2);
    }
}

TEST(Geometry, ParallelBeamLayout)
{
    const Geometry geo = Geometry::parallel_beam(8, 4);
    EXPECT_EQ(geo.angles_deg, (std::vector<double>{0.0, 45.0, 90.0, 135.0}));
    EXPECT_EQ(geo.rows(), 4u * geo.n_detectors);
    EXPECT_EQ(geo.cols(), 64u);
}

TEST(Geometry, RejectsInvalidDescriptions)
{
    Geometry geo = Geometry::parallel_beam(8, 4);
    Geometry bad = geo;
    bad.angles_deg = {0.0, 10.0, 30.0};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = geo;
    bad.angles_deg = {0.0, 180.0};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = geo;
    bad.angles_deg = {90.0, 45.0};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = geo;
    bad.angles_deg.clear();
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = geo;
    bad.n_detectors = 8; // too narrow for the 45 degree footprint
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = geo;
    bad.n_pixels = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Radon, ZeroImageGivesZeroSinogram)
{
    const Geometry geo = Geometry::parallel_beam(4, 5);
    const Sinogram s = radon_forward(Image(4), geo);
    for (double v : s.values)
        EXPECT_EQ(v, 0.0);
    const Image back = radon_adjoint(Sinogram(5, geo.n_detectors), geo);
    for (double v : back.values)
        EXPECT_EQ(v, 0.0);
}

TEST(Radon, CentrePixelAtZeroDegreesHasPixelSideLength)
{
    const std::size_t n = 5;
    const Geometry geo = Geometry::parallel_beam(n, 1, 1.0 / n);
    Image img(n);
    img.at(2, 2) = 1.0;
    const Sinogram s = radon_forward(img, geo);
    const std::size_t centre = (geo.n_detectors - 1) / 2;
    EXPECT_NEAR(s.at(0, centre), 0.2, 1e-15);
    double total = 0.0;
    for (double v : s.values)
        total += v;
    EXPECT_NEAR(total, 0.2, 1e-15);
}

TEST(Radon, UniformImageGivesChordLengths)
{
    const std::size_t n = 16;
    const double h = 1.0 / n;
    const Geometry geo = Geometry::parallel_beam(n, 7, h, 3.0, 25.0);
    const Sinogram s = radon_forward(Image(n, 1.0), geo);
    for (std::size_t p = 0; p < geo.n_angles(); ++p)
        for (std::size_t d = 0; d < geo.n_detectors; ++d) {
            const double chord = oracle::chord_in_box(oracle::angle_rad(geo, p), oracle::ray_offset(geo, d), -0.5,
                                                      0.5, -0.5, 0.5);
            if (chord == 0.0)
                EXPECT_EQ(s.at(p, d), 0.0);
            else
                EXPECT_LE(std::abs(s.at(p, d) - chord) / chord, 1e-10) << "angle " << p << " bin " << d;
        }
}

TEST(Radon, AdjointIdentity)
{
    for (std::size_t n : {8u, 16u}) {
        const ParallelBeamProjector a(Geometry::parallel_beam(n, 13));
        for (std::uint64_t seed = 0; seed < 10; ++seed)
            EXPECT_LE(adjoint_defect(a, seed), 1e-12);
    }
}

TEST(Radon, UnitSinogramEntryBackprojectsOntoTheRay)
{
    const Geometry geo = Geometry::parallel_beam(8, 6, 1.0, 10.0);
    const ParallelBeamProjector a(geo);
    const Eigen::MatrixXd dense = oracle::system_matrix(geo);
    for (std::size_t row : {3u, 17u, 40u}) {
        Sinogram s(geo.n_angles(), geo.n_detectors);
        s.values[row] = 1.0;
        const Image back = a.adjoint(s);
        for (std::size_t i = 0; i < back.pixels(); ++i) {
            const double expected = dense(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(i));
            EXPECT_NEAR(back.values[i], expected, 1e-13);
            EXPECT_EQ(back.values[i] > 1e-13, expected > 1e-13);
        }
    }
}

TEST(Radon, MatchesClippingOracle)
{
    for (const Geometry& geo : {Geometry::parallel_beam(8, 65), Geometry::parallel_beam(7, 12, 1.0 / 7.0)}) {
        const ParallelBeamProjector a(geo);
        EXPECT_LE(oracle::relative_error(matrix_free_dense(a), oracle::system_matrix(geo)), 1e-12);
    }
}

TEST(Radon, LinearAndNonNegative)
{
    const ParallelBeamProjector a(Geometry::parallel_beam(16, 9));
    const auto x = fixtures::random_vector(a.cols(), 1);
    const auto y = fixtures::random_vector(a.cols(), 2);
    std::vector<double> combo(a.cols()), ax(a.rows()), ay(a.rows()), ac(a.rows());
    for (std::size_t i = 0; i < combo.size(); ++i)
        combo[i] = 2.5 * x[i] - 0.75 * y[i];
    a.forward(x, ax);
    a.forward(y, ay);
    a.forward(combo, ac);
    for (std::size_t i = 0; i < ac.size(); ++i)
        EXPECT_NEAR(ac[i], 2.5 * ax[i] - 0.75 * ay[i], 1e-12 * (1.0 + std::abs(ac[i])));

    const auto pos = fixtures::random_vector(a.cols(), 3, 0.0, 1.0);
    a.forward(pos, ax);
    for (double v : ax)
        EXPECT_GE(v, 0.0);
}

TEST(Radon, DimensionMismatchIsRejected)
{
    const ParallelBeamProjector a(Geometry::parallel_beam(8, 4));
    std::vector<double> img(63), sino(a.rows());
    EXPECT_THROW(a.forward(img, sino), std::invalid_argument);
    std::vector<double> img_ok(64), sino_bad(a.rows() + 1);
    EXPECT_THROW(a.adjoint(sino_bad, img_ok), std::invalid_argument);
    EXPECT_THROW(radon_forward(Image(4), Geometry::parallel_beam(8, 4)), std::invalid_argument);
}

TEST(Spectral, ColumnNormsMatchOracle)
{
    const Geometry geo = Geometry::parallel_beam(8, 11, 1.0, 2.0);
    const ParallelBeamProjector a(geo);
    const Eigen::MatrixXd dense = oracle::system_matrix(geo);
    for (std::size_t i = 0; i < a.cols(); ++i)
        EXPECT_NEAR(a.column_norm_squared(i), dense.col(static_cast<Eigen::Index>(i)).squaredNorm(), 1e-12);
}

TEST(Spectral, RhoOfIdentityIsOne)
{
    EXPECT_DOUBLE_EQ(estimate_rho(fixtures::IdentityProjector{25}, 10, 3), 1.0);
    EXPECT_THROW(estimate_rho(fixtures::IdentityProjector{25}, 0, 3), std::invalid_argument);
}

TEST(Spectral, RhoWithAllSamplesIsTheExhaustiveMean)
{
    const Geometry geo = Geometry::parallel_beam(32, 65);
    const Eigen::MatrixXd dense = oracle::system_matrix(geo);
    const double exhaustive = dense.colwise().squaredNorm().mean();
    const ParallelBeamProjector a(geo);
    EXPECT_NEAR(estimate_rho(a, 32 * 32, 11), exhaustive, 1e-10 * exhaustive);

    for (std::uint64_t seed : {1u, 2u}) {
        const double rho = estimate_rho(a, 64, seed);
        EXPECT_LE(std::abs(rho - exhaustive) / exhaustive, 0.2);
    }
    EXPECT_EQ(estimate_rho(a, 64, 5), estimate_rho(a, 64, 5));
}

TEST(Spectral, SigmaMaxOfIdentityIsOne)
{
    EXPECT_NEAR(estimate_sigma_max(fixtures::IdentityProjector{9}, 1e-10), 1.0, 1e-10);
    EXPECT_THROW(estimate_sigma_max(fixtures::IdentityProjector{9}, 0.0), std::invalid_argument);
}

TEST(Spectral, SigmaMaxMatchesSvd)
{
    const Geometry geo = Geometry::parallel_beam(8, 65);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(oracle::system_matrix(geo));
    const double exact = svd.singularValues()(0);
    EXPECT_LE(std::abs(estimate_sigma_max(geo, 1e-8) - exact) / exact, 1e-6);
}

TEST(Spectral, SigmaMaxGrowsWithImageSize)
{
    double previous = 0.0;
    for (std::size_t n : {8u, 16u, 32u}) {
        const double sigma = estimate_sigma_max(Geometry::parallel_beam(n, 65), 1e-8);
        EXPECT_GE(sigma, previous);
        previous = sigma;
    }
}
