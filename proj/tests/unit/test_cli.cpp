#include <gtest/gtest.h>

#include <sstream>

#include "config.hpp"
#include "fixtures.hpp"
#include "pipeline.hpp"

using namespace dexct;
using namespace dexct::cli;
namespace fs = std::filesystem;

namespace {

std::string config_error(const std::string& text)
{
    try {
        parse_config(text, "test.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(Config, DefaultsFromEmptyDocument)
{
    const ExperimentConfig cfg = parse_config("", "empty.yaml");
    EXPECT_EQ(cfg.phantom.kind, PhantomKind::HY);
    EXPECT_EQ(cfg.geometry.n_angles, 65u);
    EXPECT_FALSE(cfg.ip.enabled);
    EXPECT_FALSE(cfg.jtv.enabled);
    EXPECT_EQ(cfg.sha256, sha256_hex(""));
}

TEST(Config, ParsesNestedSections)
{
    const ExperimentConfig cfg = parse_config(R"(
seed: 11
phantom: {kind: circuit-like, size: 64}
geometry: {angles: 33, protocol: alternating_energy}
methods:
  ip: {alpha: 300, beta: 100, sweep: [10, 20], solver: {tol: 1.0e-6}}
  jtv: {gamma: 0.01, iterations: 5}
output: {directory: results, pgm_bits: 8}
)",
                                              "x.yaml", "/base");
    EXPECT_EQ(cfg.seed, 11u);
    EXPECT_EQ(cfg.phantom.kind, PhantomKind::CIRCUIT_LIKE);
    EXPECT_EQ(cfg.phantom.size, 64u);
    EXPECT_EQ(cfg.geometry.protocol, ScanProtocol::ALTERNATING_ENERGY);
    EXPECT_TRUE(cfg.ip.enabled);
    EXPECT_EQ(cfg.ip.weights.alpha, 300.0);
    EXPECT_EQ(cfg.ip.sweep, (std::vector<double>{10, 20}));
    EXPECT_EQ(cfg.ip.solver.tol, 1e-6);
    EXPECT_EQ(cfg.jtv.solver.n_iters, 5u);
    EXPECT_EQ(cfg.output.directory, fs::path("/base/results"));
    EXPECT_EQ(cfg.output.pgm_bits, 8);
}

TEST(Config, DiagnosticsCarryLineAndColumn)
{
    const std::string unknown = config_error("phantom:\n  kind: hy\n  sise: 32\n");
    EXPECT_NE(unknown.find("test.yaml:3:3"), std::string::npos) << unknown;
    EXPECT_NE(unknown.find("phantom.sise: unknown key"), std::string::npos) << unknown;

    const std::string order = config_error("methods:\n  ip:\n    alpha: 10\n    beta: 20\n");
    EXPECT_NE(order.find("methods.ip.alpha"), std::string::npos) << order;

    EXPECT_NE(config_error("phantom: [1, 2").find("syntax error"), std::string::npos);
    EXPECT_NE(config_error("geometry:\n  protocol: sideways\n").find("geometry.protocol"), std::string::npos);
    EXPECT_NE(config_error("geometry:\n  angles: many\n").find("geometry.angles"), std::string::npos);
    EXPECT_NE(config_error("output:\n  pgm_bits: 12\n").find("output.pgm_bits"), std::string::npos);
    EXPECT_NE(config_error("colour: blue\n").find("colour: unknown key"), std::string::npos);
}

TEST(Config, Sha256KnownDigests)
{
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Pipeline, MetadataRoundTrip)
{
    const fs::path dir = fs::temp_directory_path() / "dexct_unit_meta";
    fs::create_directories(dir);
    ScanMetadata meta;
    meta.n = 24;
    meta.n_angles = 17;
    meta.protocol = ScanProtocol::ALTERNATING_ENERGY;
    meta.pixel_size = 0.1;
    meta.coeffs = {0.3, 1.0 / 3.0, 0.7, 2.5};
    meta.noise_level = 0.02;
    meta.rotation_deg = -12.5;
    meta.noise_seed = 0xfedcba9876543210ull;
    write_metadata(dir / "metadata.txt", meta);
    const ScanMetadata back = read_metadata(dir / "metadata.txt");
    EXPECT_EQ(back.n, meta.n);
    EXPECT_EQ(back.n_angles, meta.n_angles);
    EXPECT_EQ(back.protocol, meta.protocol);
    EXPECT_EQ(back.pixel_size, meta.pixel_size);
    EXPECT_EQ(back.coeffs.c12, meta.coeffs.c12);
    EXPECT_EQ(back.coeffs.c22, meta.coeffs.c22);
    EXPECT_EQ(back.noise_level, meta.noise_level);
    EXPECT_EQ(back.rotation_deg, meta.rotation_deg);
    EXPECT_EQ(back.noise_seed, meta.noise_seed);
}

TEST(Pipeline, RunIsDeterministic)
{
    const fs::path base = fs::temp_directory_path() / "dexct_unit_run";
    fs::remove_all(base);
    const std::string text = R"(
seed: 3
phantom: {kind: hy, size: 16}
geometry: {angles: 17}
methods:
  ip: {alpha: 150, beta: 120}
  jtv: {gamma: 0.001, iterations: 20}
)";
    std::ostringstream log;
    for (const char* name : {"a", "b"}) {
        ExperimentConfig cfg = parse_config(text, "run.yaml");
        cfg.output.directory = base / name;
        EXPECT_TRUE(run_experiment(cfg, log, 1).converged);
    }
    for (const char* file : {"metrics.csv", "provenance.json", "ip/material1.dexc", "jtv/material2.dexc",
                             "ip/solver_report.csv", "sinogram/low.dexc"}) {
        const std::string a = slurp(base / "a" / file);
        EXPECT_FALSE(a.empty()) << file;
        EXPECT_EQ(a, slurp(base / "b" / file)) << file;
    }
    const std::string metrics = slurp(base / "a" / "metrics.csv");
    EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);
}

TEST(Pipeline, BenchWithoutSizesPrintsOnlyTheHeader)
{
    ExperimentConfig cfg = parse_config("", "bench.yaml");
    cfg.bench.sizes.clear();
    std::ostringstream csv, log;
    run_bench(cfg, csv, log);
    EXPECT_EQ(csv.str(), "N,dimension,ipm_iters,pcg_iters,seconds\n");
}

TEST(Pipeline, BenchRowReportsTheProblemDimension)
{
    ExperimentConfig cfg = parse_config("geometry: {angles: 33}\n", "bench.yaml");
    cfg.bench.sizes = {16};
    std::ostringstream csv, log;
    run_bench(cfg, csv, log);
    std::istringstream lines(csv.str());
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    EXPECT_EQ(row.substr(0, row.find(',', 3)), "16,512");
}
